"""Cyber-defence simulation with causal Bayesian intervention optimisation."""

from .engine import (
    BlueAction,
    BluePolicy,
    EpisodeState,
    StepRecord,
    attack_score,
    attempt_compromise,
    run_episode,
)
from .gp import GaussianProcessRegressor, GpFitError, KernelParams, StandardisedGp, kernel_eval
from .optim import (
    ConvergenceTrace,
    EstimatedSem,
    HistoryEntry,
    InterventionSet,
    Trial,
    evaluate_intervention,
    expected_improvement,
    fit_sem_estimators,
    interventional_mean,
    intervention_unit_cost,
    run_optimizer,
    run_sequence,
)
from .oracle import OracleResult, grid_search_optimum
from .scenario import (
    NetworkGraph,
    NodeAttr,
    ScenarioConfig,
    ScenarioError,
    generate_network,
    load_scenario,
    shortest_path_hops,
)
from .scm import (
    CausalDiagram,
    ObservationalDataset,
    SemSample,
    build_dag,
    collect_observational,
    compute_slice,
)

__all__ = [
    "BlueAction",
    "BluePolicy",
    "CausalDiagram",
    "ConvergenceTrace",
    "EpisodeState",
    "EstimatedSem",
    "GaussianProcessRegressor",
    "GpFitError",
    "HistoryEntry",
    "InterventionSet",
    "KernelParams",
    "NetworkGraph",
    "NodeAttr",
    "ObservationalDataset",
    "OracleResult",
    "ScenarioConfig",
    "ScenarioError",
    "SemSample",
    "StandardisedGp",
    "StepRecord",
    "Trial",
    "attack_score",
    "attempt_compromise",
    "build_dag",
    "collect_observational",
    "compute_slice",
    "evaluate_intervention",
    "expected_improvement",
    "fit_sem_estimators",
    "generate_network",
    "grid_search_optimum",
    "intervention_unit_cost",
    "interventional_mean",
    "kernel_eval",
    "load_scenario",
    "run_episode",
    "run_optimizer",
    "run_sequence",
    "shortest_path_hops",
]
