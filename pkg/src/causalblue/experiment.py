"""End-to-end experiment harness: data generation, optimiser runs, oracle, plot."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from . import optim, oracle, scm
from .scenario import NetworkGraph, ScenarioConfig, generate_network

DEFAULT_SLICES = (22, 23, 24)
DEFAULT_METHODS = ("BO", "CBO", "DCBO")

OBSERVATIONS_FILE = "observations.csv"
DAG_FILE = "dag_edges.txt"
TRACES_FILE = "traces.csv"
ORACLE_FILE = "oracle.csv"
PLOT_FILE = "convergence.svg"


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one experiment from a master seed."""

    config: ScenarioConfig = field(default_factory=ScenarioConfig)
    methods: tuple[str, ...] = DEFAULT_METHODS
    slices: tuple[int, ...] = DEFAULT_SLICES
    budget: int = 50
    replicates: int = 5
    master_seed: int = 3
    out_dir: Path = Path("out")
    n_envs: int = 10
    policy_mean: float = 0.5
    policy_sd: float = 0.3
    candidates_per_set: int = optim.DEFAULT_CANDIDATES
    # Objective rollouts match the oracle's so both measure the same
    # common-random-number surface and best-so-far is comparable to y*.
    n_rollouts: int = 50
    n_mc: int = optim.DEFAULT_N_MC
    oracle_resolution: int = oracle.DEFAULT_RESOLUTION
    oracle_rollouts: int = oracle.DEFAULT_ORACLE_ROLLOUTS
    n_jobs: int = 1

    def validate(self) -> "ExperimentSpec":
        self.config.validate()
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        for method in self.methods:
            if method not in optim.METHODS:
                raise ValueError(f"unknown method {method!r}")
        for t in self.slices:
            if not 0 <= t < self.config.horizon:
                raise ValueError("slices must lie within the horizon")
        return self


def _dataset_rng(spec: ExperimentSpec) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([spec.master_seed, 0]))


def _optimizer_seed(spec: ExperimentSpec, method: str, replicate: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        [spec.master_seed, 1, optim.METHODS.index(method), replicate]
    )


def generate_dataset(spec: ExperimentSpec) -> scm.ObservationalDataset:
    return scm.collect_observational(
        spec.config,
        n_envs=spec.n_envs,
        policy_mean=spec.policy_mean,
        policy_sd=spec.policy_sd,
        rng=_dataset_rng(spec),
    )


def cmd_generate(spec: ExperimentSpec) -> Path:
    """Write the observational CSV and the DAG edge list; returns the CSV path."""
    spec.validate()
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    dataset = generate_dataset(spec)
    obs_path = spec.out_dir / OBSERVATIONS_FILE
    with open(obs_path, "w", newline="") as fh:
        dataset.write_csv(fh)
    dag = scm.build_dag(spec.config.horizon)
    (spec.out_dir / DAG_FILE).write_text(dag.to_edge_list_text())
    return obs_path


def _run_one(
    spec: ExperimentSpec, sem: optim.EstimatedSem, method: str, replicate: int
) -> list[tuple[str, int, optim.ConvergenceTrace]]:
    graph = dataset_graph(spec)
    traces, _ = optim.run_sequence(
        method,
        spec.config,
        graph,
        sem if method != "BO" else None,
        spec.slices,
        spec.budget,
        candidates_per_set=spec.candidates_per_set,
        n_rollouts=spec.n_rollouts,
        n_mc=spec.n_mc,
        rng=np.random.default_rng(_optimizer_seed(spec, method, replicate)),
    )
    return [(method, replicate, trace) for trace in traces]


def dataset_graph(spec: ExperimentSpec) -> NetworkGraph:
    return generate_network(spec.config)


def cmd_optimize(spec: ExperimentSpec) -> Path:
    """Run every method x replicate x slice and write the trace CSV."""
    spec.validate()
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    dataset = generate_dataset(spec)
    sem = optim.fit_sem_estimators(dataset)
    tasks = [(method, rep) for method in spec.methods for rep in range(spec.replicates)]
    if spec.n_jobs > 1:
        results = Parallel(n_jobs=spec.n_jobs)(
            delayed(_run_one)(spec, sem, method, rep) for method, rep in tasks
        )
    else:
        results = [_run_one(spec, sem, method, rep) for method, rep in tasks]
    rows = [row for chunk in results for row in chunk]
    trace_path = spec.out_dir / TRACES_FILE
    with open(trace_path, "w", newline="") as fh:
        optim.write_traces(rows, fh)
    return trace_path


def cmd_oracle(spec: ExperimentSpec) -> Path:
    """Grid-search the true simulator optimum for every target slice."""
    spec.validate()
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    graph = dataset_graph(spec)
    results = [
        oracle.grid_search_optimum(
            spec.config,
            graph,
            t,
            resolution=spec.oracle_resolution,
            n_rollouts=spec.oracle_rollouts,
        )
        for t in spec.slices
    ]
    oracle_path = spec.out_dir / ORACLE_FILE
    with open(oracle_path, "w", newline="") as fh:
        oracle.write_oracle(results, fh)
    return oracle_path


def read_traces(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"trace file {path} is empty")
    return rows


def read_oracle_optima(path: Path) -> dict[int, float]:
    """Best mean objective per slice from the oracle CSV."""
    optima: dict[int, float] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            t = int(row["t"])
            value = float(row["mean_objective"])
            if t not in optima or value < optima[t]:
                optima[t] = value
    return optima


def best_so_far_on_cost_grid(
    rows: Sequence[dict], method: str, t: int, replicate: int, cost_grid: np.ndarray
) -> np.ndarray:
    """Step function of best-so-far versus cumulative cost; NaN before the
    first completed trial."""
    trials = sorted(
        (
            (int(r["cumulative_cost"]), float(r["best_so_far"]))
            for r in rows
            if r["method"] == method and int(r["t"]) == t and int(r["replicate"]) == replicate
        ),
        key=lambda cb: cb[0],
    )
    out = np.full(len(cost_grid), np.nan)
    for i, x in enumerate(cost_grid):
        best = np.nan
        for cost, bsf in trials:
            if cost <= x:
                best = bsf
            else:
                break
        out[i] = best
    return out


def cmd_plot(trace_path: Path, oracle_path: Path | None, out_path: Path) -> Path:
    """One panel per slice: mean best-so-far across replicates versus
    cumulative intervention cost, with a +/- one standard deviation band and
    the oracle optimum as a dashed line."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_traces(trace_path)
    optima = read_oracle_optima(oracle_path) if oracle_path else {}
    methods = sorted({r["method"] for r in rows}, key=lambda m: optim.METHODS.index(m))
    slices = sorted({int(r["t"]) for r in rows})
    replicates = sorted({int(r["replicate"]) for r in rows})
    max_cost = max(int(r["cumulative_cost"]) for r in rows)
    cost_grid = np.arange(1, max_cost + 1)

    fig, axes = plt.subplots(
        1, len(slices), figsize=(5 * len(slices), 4), sharey=True, squeeze=False
    )
    for ax, t in zip(axes[0], slices):
        for method in methods:
            curves = np.vstack(
                [
                    best_so_far_on_cost_grid(rows, method, t, rep, cost_grid)
                    for rep in replicates
                ]
            )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN columns
                mean = np.nanmean(curves, axis=0)
                sd = (
                    np.nanstd(curves, axis=0, ddof=1)
                    if len(replicates) > 1
                    else np.zeros_like(mean)
                )
            ax.plot(cost_grid, mean, label=method)
            ax.fill_between(cost_grid, mean - sd, mean + sd, alpha=0.2)
        if t in optima:
            ax.axhline(optima[t], color="black", linestyle="--", label="optimum")
        ax.set_title(f"t = {t}")
        ax.set_xlabel("cumulative intervention cost")
    axes[0][0].set_ylabel("best observed total cost")
    axes[0][-1].legend()
    fig.tight_layout()
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format=out_path.suffix.lstrip(".") or "svg")
    plt.close(fig)
    return out_path
