"""Causal diagram, true structural equations and observational-data collection."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Iterable, TextIO

import numpy as np

from .engine import BlueAction, BluePolicy, ISOLATE, RESTORE, StepRecord, run_episode
from .scenario import NetworkGraph, ScenarioConfig, generate_network

VARIABLES = ("P", "I", "S", "C", "H", "A", "T")

# Directed edges inside one time slice.
WITHIN_SLICE_EDGES = (
    ("I", "S"),
    ("C", "H"),
    ("A", "T"),
    ("P", "H"),
    ("P", "A"),
    ("I", "A"),
    ("C", "T"),
)

# Directed edges from slice t-1 into slice t.
TRANSITION_EDGES = (
    ("H", "C"),
    ("C", "S"),
)


@dataclass(frozen=True)
class CausalDiagram:
    """Time-unrolled causal DAG with identical topology in every slice."""

    variables: tuple[str, ...]
    within_slice_edges: tuple[tuple[str, str], ...]
    transition_edges: tuple[tuple[str, str], ...]
    n_slices: int

    def node_names(self) -> list[str]:
        return [f"{v}_{t}" for t in range(self.n_slices) for v in self.variables]

    def concrete_edges(self) -> list[tuple[str, str]]:
        edges = []
        for t in range(self.n_slices):
            for src, dst in self.within_slice_edges:
                edges.append((f"{src}_{t}", f"{dst}_{t}"))
        for t in range(1, self.n_slices):
            for src, dst in self.transition_edges:
                edges.append((f"{src}_{t - 1}", f"{dst}_{t}"))
        return edges

    def topological_order(self) -> list[str]:
        """Kahn's algorithm; raises ValueError on a cycle."""
        nodes = self.node_names()
        indeg = {n: 0 for n in nodes}
        out: dict[str, list[str]] = {n: [] for n in nodes}
        for src, dst in self.concrete_edges():
            out[src].append(dst)
            indeg[dst] += 1
        ready = [n for n in nodes if indeg[n] == 0]
        order = []
        while ready:
            n = ready.pop()
            order.append(n)
            for m in out[n]:
                indeg[m] -= 1
                if indeg[m] == 0:
                    ready.append(m)
        if len(order) != len(nodes):
            raise ValueError("diagram contains a cycle")
        return order

    def to_edge_list_text(self) -> str:
        return "".join(f"{src} -> {dst}\n" for src, dst in self.concrete_edges())


def build_dag(n_slices: int) -> CausalDiagram:
    if n_slices < 1:
        raise ValueError("n_slices must be at least 1")
    return CausalDiagram(
        variables=VARIABLES,
        within_slice_edges=WITHIN_SLICE_EDGES,
        transition_edges=TRANSITION_EDGES,
        n_slices=n_slices,
    )


@dataclass(frozen=True)
class SemSample:
    """One time slice of the seven model variables; total == c + a exactly."""

    t: int
    p: float
    i: float
    s: int
    c: float
    h: float
    a: float
    total: float


def compute_slice(
    graph: NetworkGraph,
    compromised: frozenset[int] | set[int],
    isolated: frozenset[int] | set[int],
    blue_action: BlueAction,
    policy: BluePolicy,
    config: ScenarioConfig,
    t: int,
) -> SemSample:
    """Evaluate the structural equations on one completed step.

    `compromised` and `isolated` are the sets at the end of the blue phase.
    """
    isolated = set(isolated)
    s = sum(1 for n in range(graph.n_nodes) if n not in compromised and n not in isolated)
    c = (config.cost_compromise * len(compromised)) ** 1.5
    h = 0.0
    for n in compromised:
        for v in graph.neighbors(n):
            if v not in isolated:
                h += graph.vulnerability(v)
    if blue_action.kind == RESTORE:
        a = config.cost_restore
    elif blue_action.kind == ISOLATE:
        a = config.cost_isolate
    else:
        a = 0.0
    return SemSample(t=t, p=policy.p_res, i=policy.p_iso, s=s, c=c, h=h, a=a, total=c + a)


def slice_from_record(
    graph: NetworkGraph,
    record: StepRecord,
    policy: BluePolicy,
    config: ScenarioConfig,
) -> SemSample:
    snap = record.state_after
    return compute_slice(
        graph,
        snap.compromised,
        snap.isolated_nodes(),
        record.blue_action,
        policy,
        config,
        record.t,
    )


def pad_slices(slices: list[SemSample], horizon: int) -> tuple[list[SemSample], list[bool]]:
    """Rectangularise an early-terminated episode: the terminal slice repeats
    with zero action cost. Returns the slices plus a per-step padded flag."""
    if not slices:
        raise ValueError("cannot pad an empty episode")
    padded_flags = [False] * len(slices)
    out = list(slices)
    last = slices[-1]
    for t in range(len(slices), horizon):
        out.append(replace(last, t=t, a=0.0, total=last.c))
        padded_flags.append(True)
    return out, padded_flags


@dataclass(frozen=True)
class ObservationalDataset:
    """Per-variable arrays of shape (n_envs, horizon) from one shared topology."""

    data: dict[str, np.ndarray]
    padded: np.ndarray  # bool, (n_envs, horizon)
    policies: tuple[BluePolicy, ...]
    seeds: tuple[int, ...]
    graph: NetworkGraph

    @property
    def n_envs(self) -> int:
        return self.padded.shape[0]

    @property
    def horizon(self) -> int:
        return self.padded.shape[1]

    def write_csv(self, out: TextIO) -> None:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["env", "t", "p", "i", "s", "c", "h", "a", "total", "padded"])
        for env in range(self.n_envs):
            for t in range(self.horizon):
                writer.writerow(
                    [env, t]
                    + [repr(float(self.data[v][env, t])) for v in ("P", "I")]
                    + [int(self.data["S"][env, t])]
                    + [repr(float(self.data[v][env, t])) for v in ("C", "H", "A", "T")]
                    + [int(self.padded[env, t])]
                )


def episode_slices(
    config: ScenarioConfig,
    graph: NetworkGraph,
    policy: BluePolicy | "callable",
    horizon: int,
    rng: np.random.Generator | int | None,
) -> tuple[list[SemSample], list[bool]]:
    """Run one episode and return its padded slice sequence."""
    policy_fn = policy if callable(policy) else (lambda _t: policy)
    records = run_episode(config, graph, policy_fn, horizon=horizon, rng=rng)
    slices = [slice_from_record(graph, rec, policy_fn(rec.t), config) for rec in records]
    return pad_slices(slices, horizon)


def collect_observational(
    config: ScenarioConfig,
    n_envs: int = 10,
    horizon: int | None = None,
    policy_mean: float = 0.5,
    policy_sd: float = 0.3,
    rng: np.random.Generator | int | None = None,
) -> ObservationalDataset:
    """Run `n_envs` identical environments under random blue policies.

    All environments share one topology (from the config's topology seed);
    per-env restore/isolate probabilities are drawn from a clipped Gaussian.
    """
    if n_envs < 1:
        raise ValueError("n_envs must be at least 1")
    if horizon is None:
        horizon = config.horizon
    rng = np.random.default_rng(rng)
    graph = generate_network(config)

    draws = np.clip(rng.normal(policy_mean, policy_sd, size=(n_envs, 2)), 0.0, 1.0)
    policies = tuple(BluePolicy(float(p), float(i)) for p, i in draws)
    seeds = tuple(int(s) for s in rng.integers(0, 2**63 - 1, size=n_envs))

    data = {v: np.zeros((n_envs, horizon)) for v in VARIABLES}
    padded = np.zeros((n_envs, horizon), dtype=bool)
    for env in range(n_envs):
        slices, flags = episode_slices(config, graph, policies[env], horizon, seeds[env])
        for t, sample in enumerate(slices):
            data["P"][env, t] = sample.p
            data["I"][env, t] = sample.i
            data["S"][env, t] = sample.s
            data["C"][env, t] = sample.c
            data["H"][env, t] = sample.h
            data["A"][env, t] = sample.a
            data["T"][env, t] = sample.total
        padded[env] = flags
    return ObservationalDataset(
        data=data, padded=padded, policies=policies, seeds=seeds, graph=graph
    )
