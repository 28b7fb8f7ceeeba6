"""Intervention-set search: BO, CBO and DCBO over the {P, I} powerset.

The objective is the simulated total operating cost at one time slice; CBO
and DCBO inject causal prior means computed by forward-sampling the
GP-estimated structural equations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, TextIO

import numpy as np
from scipy.stats import norm

from .engine import BluePolicy
from .gp import GaussianProcessRegressor, StandardisedGp
from .scm import ObservationalDataset, episode_slices
from .scenario import NetworkGraph, ScenarioConfig

METHODS = ("BO", "CBO", "DCBO")
MANIPULATIVE = ("P", "I")

# Blue policy assumed for non-intervened slices: the observational regime.
BASELINE_POLICY = BluePolicy(0.5, 0.5)

DEFAULT_N_MC = 50
DEFAULT_N_ROLLOUTS = 20
DEFAULT_CANDIDATES = 200

# Surrogate hyperparameter grids: isotropic on the [0,1]^d intervention box.
# Lengthscales are kept at the box scale so a handful of trials generalises
# across the whole box; sub-box lengthscales leave acquisition gaps between
# observed points that trap the search inside one intervention set.
_SURROGATE_KW = dict(shared_lengthscale=True, lengthscale_grid=[0.5, 1.0, 2.0])


@dataclass(frozen=True)
class InterventionSet:
    """A nonempty subset of {P, I} with the values it is clamped to."""

    variables: tuple[str, ...]
    values: tuple[float, ...]

    def validate(self) -> "InterventionSet":
        if not self.variables:
            raise ValueError("intervention set must be nonempty")
        if any(v not in MANIPULATIVE for v in self.variables):
            raise ValueError(f"intervention variables must come from {MANIPULATIVE}")
        if len(set(self.variables)) != len(self.variables):
            raise ValueError("duplicate intervention variable")
        if len(self.values) != len(self.variables):
            raise ValueError("one value per intervened variable required")
        if any(not 0.0 <= v <= 1.0 for v in self.values):
            raise ValueError("intervention values must lie in [0, 1]")
        return self

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.variables, self.values))

    def label(self) -> str:
        return ",".join(self.variables)


def intervention_unit_cost(iset: InterventionSet) -> int:
    """Unit cost per intervened variable, accumulated across trials."""
    iset.validate()
    return len(iset.variables)


@dataclass(frozen=True)
class HistoryEntry:
    """An already-optimised slice: its intervention and achieved slice values.

    `c` and `h` are the mean compromise cost and spread-likelihood achieved at
    that slice; they feed the transition inputs of later-slice causal priors.
    """

    t: int
    iset: InterventionSet
    y: float
    c: float
    h: float


@dataclass(frozen=True)
class Trial:
    index: int
    iset: InterventionSet
    observed_y: float
    cumulative_cost: int
    best_so_far: float


@dataclass(frozen=True)
class ConvergenceTrace:
    method: str
    t: int
    trials: tuple[Trial, ...]

    @property
    def optimum_found(self) -> tuple[InterventionSet, float]:
        best = min(self.trials, key=lambda tr: tr.observed_y)
        return best.iset, best.observed_y


@dataclass(frozen=True)
class EstimatedSem:
    """GP estimates of the structural equations plus dataset statistics."""

    f_s: StandardisedGp  # (C_{t-1}, I_t) -> S_t
    f_c: StandardisedGp  # (H_{t-1},)    -> C_t
    f_h: StandardisedGp  # (P_t, C_t)    -> H_t
    f_a: StandardisedGp  # (P_t, I_t)    -> A_t
    f_t: StandardisedGp  # (C_t, A_t)    -> T_t
    p_mean: float
    i_mean: float
    time_means: dict[str, np.ndarray]  # per-variable empirical mean over envs

    def mean_at(self, var: str, t: int) -> float:
        means = self.time_means[var]
        return float(means[min(max(t, 0), len(means) - 1)])


def fit_sem_estimators(dataset: ObservationalDataset, **gp_kwargs) -> EstimatedSem:
    """Fit one GP per structural equation, pooling envs and time slices.

    Padded rows (post-termination repeats) are excluded; transition pairs
    additionally require both endpoints to be unpadded.
    """
    live = ~dataset.padded
    d = dataset.data

    def pool(cols: Sequence[tuple[str, int]], target: str, target_lag: int):
        # lag 0 means slice t, lag 1 means slice t-1; rows valid where
        # every referenced slice is unpadded.
        max_lag = max([lag for _, lag in cols] + [target_lag])
        mask = live[:, max_lag:]
        for _, lag in cols:
            mask = mask & live[:, max_lag - lag : dataset.horizon - lag]
        X = np.column_stack(
            [d[v][:, max_lag - lag : dataset.horizon - lag][mask] for v, lag in cols]
        )
        y = d[target][:, max_lag - target_lag : dataset.horizon - target_lag][mask]
        if y.size == 0:
            raise ValueError(f"no unpadded samples available to fit f_{target}")
        return X, y

    def fit(name: str, cols, target):
        X, y = pool(cols, target, 0)
        try:
            return StandardisedGp(**gp_kwargs).fit(X, y)
        except Exception as exc:
            raise RuntimeError(f"failed to fit f_{name}: {exc}") from exc

    f_s = fit("S", [("C", 1), ("I", 0)], "S")
    f_c = fit("C", [("H", 1)], "C")
    f_h = fit("H", [("P", 0), ("C", 0)], "H")
    f_a = fit("A", [("P", 0), ("I", 0)], "A")
    f_t = fit("T", [("C", 0), ("A", 0)], "T")

    time_means = {}
    for var in d:
        means = np.empty(dataset.horizon)
        last = float(d[var][:, 0].mean())
        for t in range(dataset.horizon):
            col_live = live[:, t]
            if col_live.any():
                last = float(d[var][col_live, t].mean())
            means[t] = last
        time_means[var] = means
    return EstimatedSem(
        f_s=f_s,
        f_c=f_c,
        f_h=f_h,
        f_a=f_a,
        f_t=f_t,
        p_mean=float(d["P"][live].mean()),
        i_mean=float(d["I"][live].mean()),
        time_means=time_means,
    )


def _history_at(history: Sequence[HistoryEntry], t: int) -> HistoryEntry | None:
    for entry in history:
        if entry.t == t:
            return entry
    return None


def _interventional_mean_batch(
    sem: EstimatedSem,
    variables: tuple[str, ...],
    values: np.ndarray,
    history: Sequence[HistoryEntry],
    t: int,
    n_mc: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Monte-Carlo mean of T_t under do(variables = each row of `values`).

    Noise draws are shared across the candidate rows (common random numbers),
    so each row's estimate equals the single-candidate call under one seed.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    m = values.shape[0]
    p = np.full(m, sem.p_mean)
    i = np.full(m, sem.i_mean)
    for j, var in enumerate(variables):
        if var == "P":
            p = values[:, j]
        else:
            i = values[:, j]

    prev = _history_at(history, t - 1)
    h_prev = prev.h if prev is not None else sem.mean_at("H", t - 1)

    eps_c = rng.standard_normal(n_mc)
    eps_a = rng.standard_normal(n_mc)
    eps_t = rng.standard_normal(n_mc)

    mc, vc = sem.f_c.predict(np.array([[h_prev]]), return_var=True)
    c = mc[0] + math.sqrt(vc[0]) * eps_c  # (n_mc,)

    ma, va = sem.f_a.predict(np.column_stack([p, i]), return_var=True)
    a = ma[:, None] + np.sqrt(va)[:, None] * eps_a[None, :]  # (m, n_mc)

    pts = np.column_stack([np.broadcast_to(c, (m, n_mc)).ravel(), a.ravel()])
    mt, vt = sem.f_t.predict(pts, return_var=True)
    t_draws = mt.reshape(m, n_mc) + np.sqrt(vt).reshape(m, n_mc) * eps_t[None, :]
    return t_draws.mean(axis=1)


def interventional_mean(
    sem: EstimatedSem,
    iset: InterventionSet,
    history: Sequence[HistoryEntry],
    t: int,
    n_mc: int = DEFAULT_N_MC,
    rng: np.random.Generator | int | None = None,
) -> float:
    """Estimated E[T_t | do(iset), history] by forward-sampling the SEM."""
    iset.validate()
    if n_mc < 1:
        raise ValueError("n_mc must be at least 1")
    rng = np.random.default_rng(rng)
    out = _interventional_mean_batch(
        sem, iset.variables, np.array([iset.values]), history, t, n_mc, rng
    )
    return float(out[0])


def expected_improvement(mean, variance, best_so_far):
    """Minimisation EI; elementwise over array inputs."""
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(variance, dtype=float)
    if np.any(var < 0):
        raise ValueError("variance must be nonnegative")
    sigma = np.sqrt(var)
    improve = best_so_far - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, improve / np.where(sigma > 0, sigma, 1.0), 0.0)
    ei = np.where(
        sigma > 0,
        improve * norm.cdf(z) + sigma * norm.pdf(z),
        np.maximum(improve, 0.0),
    )
    if ei.ndim == 0:
        return float(ei)
    return ei


@dataclass(frozen=True)
class EvaluationResult:
    mean_t: float
    mean_c: float
    mean_h: float
    per_rollout_t: tuple[float, ...]


def _policy_schedule(
    iset: InterventionSet | None, t: int, history: Sequence[HistoryEntry]
) -> Callable[[int], BluePolicy]:
    by_slice: dict[int, dict[str, float]] = {}
    for entry in history:
        by_slice[entry.t] = entry.iset.as_dict()
    if iset is not None:
        by_slice[t] = iset.as_dict()

    def policy_fn(step_t: int) -> BluePolicy:
        clamp = by_slice.get(step_t)
        if clamp is None:
            return BASELINE_POLICY
        return BluePolicy(
            p_res=clamp.get("P", BASELINE_POLICY.p_res),
            p_iso=clamp.get("I", BASELINE_POLICY.p_iso),
        )

    return policy_fn


def evaluate_intervention_detail(
    config: ScenarioConfig,
    graph: NetworkGraph,
    iset: InterventionSet | None,
    t: int,
    history: Sequence[HistoryEntry] = (),
    n_rollouts: int = DEFAULT_N_ROLLOUTS,
    base_seed: int | None = None,
) -> EvaluationResult:
    """Simulate the intervention and return slice-t statistics.

    Rollout r always uses the stream derived from (base_seed, r), so repeated
    calls within one experiment share common random numbers and the objective
    is a deterministic function of the intervention.
    """
    if iset is not None:
        iset.validate()
    if t >= config.horizon:
        raise ValueError("target slice must lie within the horizon")
    if base_seed is None:
        base_seed = config.episode_seed
    policy_fn = _policy_schedule(iset, t, history)
    t_vals, c_vals, h_vals = [], [], []
    for r in range(n_rollouts):
        rng = np.random.default_rng(np.random.SeedSequence([base_seed, r]))
        slices, _ = episode_slices(config, graph, policy_fn, t + 1, rng)
        sample = slices[t]
        t_vals.append(sample.total)
        c_vals.append(sample.c)
        h_vals.append(sample.h)
    return EvaluationResult(
        mean_t=float(np.mean(t_vals)),
        mean_c=float(np.mean(c_vals)),
        mean_h=float(np.mean(h_vals)),
        per_rollout_t=tuple(t_vals),
    )


def evaluate_intervention(
    config: ScenarioConfig,
    graph: NetworkGraph,
    iset: InterventionSet,
    t: int,
    history: Sequence[HistoryEntry] = (),
    n_rollouts: int = DEFAULT_N_ROLLOUTS,
    base_seed: int | None = None,
) -> float:
    """Black-box objective: mean simulated T_t under the intervention."""
    return evaluate_intervention_detail(
        config, graph, iset, t, history, n_rollouts, base_seed
    ).mean_t


def _intervention_sets(method: str) -> list[tuple[str, ...]]:
    if method == "BO":
        return [("P", "I")]
    return [("P",), ("I",), ("P", "I")]


def run_optimizer(
    method: str,
    objective: Callable[[InterventionSet], float],
    sem: EstimatedSem | None,
    history: Sequence[HistoryEntry],
    t: int,
    budget_trials: int,
    candidates_per_set: int = DEFAULT_CANDIDATES,
    n_mc: int = DEFAULT_N_MC,
    rng: np.random.Generator | int | None = None,
) -> ConvergenceTrace:
    """Sequentially propose and evaluate `budget_trials` interventions.

    BO searches the full {P, I} box with a zero prior mean; CBO and DCBO
    search every nonempty subset with a causal prior mean from the estimated
    SEM (DCBO conditioning its transition inputs on `history`). The first
    trial of each set is a uniform random probe.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if budget_trials < 1:
        raise ValueError("budget_trials must be at least 1")
    if method != "BO" and sem is None:
        raise ValueError(f"{method} requires a fitted SEM")
    rng = np.random.default_rng(rng)
    sets = _intervention_sets(method)
    prior_history = () if method == "CBO" else tuple(history)

    prior_fns: dict[tuple[str, ...], Callable[[np.ndarray], np.ndarray] | None] = {}
    for variables in sets:
        seed = int(rng.integers(2**63 - 1))
        if method == "BO":
            prior_fns[variables] = None
        else:
            def prior(X, _vars=variables, _seed=seed):
                return _interventional_mean_batch(
                    sem, _vars, X, prior_history, t, n_mc, np.random.default_rng(_seed)
                )

            prior_fns[variables] = prior

    data: dict[tuple[str, ...], tuple[list, list]] = {v: ([], []) for v in sets}
    trials: list[Trial] = []
    best = math.inf
    cum_cost = 0
    for index in range(budget_trials):
        unprobed = [v for v in sets if not data[v][1]]
        if unprobed:
            variables = unprobed[0]
            x = rng.uniform(size=len(variables))
        else:
            choice = None
            for variables_k in sets:
                X = np.asarray(data[variables_k][0], dtype=float)
                y = np.asarray(data[variables_k][1], dtype=float)
                prior = prior_fns[variables_k]
                kw = dict(_SURROGATE_KW)
                if prior is not None:
                    # Kernel variance pinned to the residual scale against
                    # the causal prior, floored by the spread of all observed
                    # outcomes, so unexplored regions keep enough posterior
                    # spread to stay competitive in acquisition even where
                    # the prior is off.
                    resid = y - prior(X)
                    y_all = np.concatenate([np.asarray(d[1], dtype=float) for d in data.values()])
                    spread = float(np.var(y_all)) if y_all.size > 1 else 0.0
                    kw["variance_grid"] = [max(float(np.mean(resid**2)), spread, 1e-4)]
                gp = GaussianProcessRegressor(prior_mean=prior, **kw)
                gp.fit(X, y)
                cands = rng.uniform(size=(candidates_per_set, len(variables_k)))
                mu, var = gp.predict(cands, return_var=True)
                ei = expected_improvement(mu, var, best)
                j = int(np.lexsort((np.arange(len(ei)), mu, -ei))[0])
                # Maximise EI; break ties by lower surrogate mean, then by
                # lexicographically smaller intervention set.
                key = (float(ei[j]), -float(mu[j]))
                if (
                    choice is None
                    or key > choice[0]
                    or (key == choice[0] and variables_k < choice[1])
                ):
                    choice = (key, variables_k, cands[j])
            _, variables, x = choice
        iset = InterventionSet(variables, tuple(float(v) for v in x))
        try:
            y_obs = float(objective(iset))
        except Exception as exc:
            raise RuntimeError(f"objective failed at trial {index}: {exc}") from exc
        data[variables][0].append(x)
        data[variables][1].append(y_obs)
        cum_cost += intervention_unit_cost(iset)
        best = min(best, y_obs)
        trials.append(
            Trial(
                index=index,
                iset=iset,
                observed_y=y_obs,
                cumulative_cost=cum_cost,
                best_so_far=best,
            )
        )
    return ConvergenceTrace(method=method, t=t, trials=tuple(trials))


def run_sequence(
    method: str,
    config: ScenarioConfig,
    graph: NetworkGraph,
    sem: EstimatedSem | None,
    slices: Sequence[int],
    budget_trials: int,
    candidates_per_set: int = DEFAULT_CANDIDATES,
    n_rollouts: int = DEFAULT_N_ROLLOUTS,
    n_mc: int = DEFAULT_N_MC,
    rng: np.random.Generator | int | None = None,
    eval_seed: int | None = None,
) -> tuple[list[ConvergenceTrace], list[HistoryEntry]]:
    """Optimise the given time slices in order.

    DCBO threads each slice's optimum into the history that conditions the
    next slice's causal prior; the black-box objective itself always scores
    slice t against the baseline behaviour before t, so every method
    optimises the same per-slice surface. BO and CBO ignore history.
    """
    if list(slices) != sorted(set(slices)):
        raise ValueError("slices must be strictly increasing")
    rng = np.random.default_rng(rng)
    if eval_seed is None:
        eval_seed = config.episode_seed
    history: list[HistoryEntry] = []
    traces = []
    for t in slices:
        prior_history = tuple(history) if method == "DCBO" else ()

        def objective(iset, _t=t):
            return evaluate_intervention(
                config, graph, iset, _t, (), n_rollouts, eval_seed
            )

        trace = run_optimizer(
            method,
            objective,
            sem,
            prior_history,
            t,
            budget_trials,
            candidates_per_set,
            n_mc,
            rng,
        )
        traces.append(trace)
        if method == "DCBO":
            best_set, best_y = trace.optimum_found
            detail = evaluate_intervention_detail(
                config, graph, best_set, t, (), n_rollouts, eval_seed
            )
            history.append(
                HistoryEntry(t=t, iset=best_set, y=best_y, c=detail.mean_c, h=detail.mean_h)
            )
    return traces, history


def write_traces(
    rows: Sequence[tuple[str, int, ConvergenceTrace]], out: TextIO
) -> None:
    """Write (method, replicate, trace) triples as the flat trial CSV."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        [
            "method",
            "replicate",
            "t",
            "trial",
            "set",
            "p_value",
            "i_value",
            "observed_y",
            "cumulative_cost",
            "best_so_far",
        ]
    )
    for method, replicate, trace in rows:
        for trial in trace.trials:
            vals = trial.iset.as_dict()
            writer.writerow(
                [
                    method,
                    replicate,
                    trace.t,
                    trial.index,
                    trial.iset.label(),
                    repr(vals["P"]) if "P" in vals else "",
                    repr(vals["I"]) if "I" in vals else "",
                    repr(trial.observed_y),
                    trial.cumulative_cost,
                    repr(trial.best_so_far),
                ]
            )
