"""Scenario configuration and random network-topology generation."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

DETECTION_MODES = ("perfect", "probabilistic")

# Maximum Erdos-Renyi redraws before falling back to component stitching.
_MAX_CONNECTIVITY_RETRIES = 100


class ScenarioError(ValueError):
    """Raised when a scenario file cannot be parsed or fails validation."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Static game setup shared by the simulator, optimisers and oracle."""

    n_nodes: int = 10
    horizon: int = 25
    red_skill: float = 0.25
    vuln_range: tuple[float, float] = (0.2, 0.8)
    cost_compromise: float = 1.0
    cost_restore: float = 1.5
    cost_isolate: float = 0.75
    isolation_duration: int = 5
    topology_seed: int = 0
    episode_seed: int = 1
    edge_probability: float = 0.4
    detection: str = "perfect"
    detection_prob: float = 1.0

    def validate(self) -> "ScenarioConfig":
        if self.n_nodes < 2:
            raise ScenarioError("n_nodes must be at least 2")
        if self.horizon < 1:
            raise ScenarioError("horizon must be a positive count")
        if not 0.0 <= self.red_skill <= 1.0:
            raise ScenarioError("red_skill must lie in [0, 1]")
        lo, hi = self.vuln_range
        if not (0.0 <= lo <= hi <= 1.0):
            raise ScenarioError("vuln_range must satisfy 0 <= lo <= hi <= 1")
        for key in ("cost_compromise", "cost_restore", "cost_isolate"):
            if getattr(self, key) < 0:
                raise ScenarioError(f"{key} must be nonnegative")
        if self.isolation_duration < 1:
            raise ScenarioError("isolation_duration must be a positive count")
        if not 0.0 < self.edge_probability <= 1.0:
            raise ScenarioError("edge_probability must lie in (0, 1]")
        if self.topology_seed < 0 or self.episode_seed < 0:
            raise ScenarioError("topology_seed and episode_seed must be unsigned")
        if self.detection not in DETECTION_MODES:
            raise ScenarioError(f"detection must be one of {DETECTION_MODES}")
        if not 0.0 <= self.detection_prob <= 1.0:
            raise ScenarioError("detection_prob must lie in [0, 1]")
        return self


SCENARIO_SCHEMA = """\
# Scenario file schema: one `key = value` per line, `#` starts a comment.
# Unset keys take the defaults shown.
n_nodes = 10                 # number of hosts, >= 2
horizon = 25                 # episode length in time steps
red_skill = 0.25             # attacker skill in [0, 1]; 0 disables attacks
vuln_range = 0.2, 0.8        # uniform vulnerability draw bounds within [0, 1]
cost_compromise = 1.0        # per-node compromise cost
cost_restore = 1.5           # cost of the restore action
cost_isolate = 0.75          # cost of the isolate action
isolation_duration = 5       # steps until an isolated node auto-reconnects
topology_seed = 0            # seed for network generation
episode_seed = 1             # base seed for episode randomness
edge_probability = 0.4       # Erdos-Renyi edge probability in (0, 1]
detection = perfect          # `perfect` or `probabilistic <p>` with p in [0, 1]
"""

_INT_KEYS = ("n_nodes", "horizon", "isolation_duration", "topology_seed", "episode_seed")
_FLOAT_KEYS = (
    "red_skill",
    "cost_compromise",
    "cost_restore",
    "cost_isolate",
    "edge_probability",
)


def load_scenario(text: str) -> ScenarioConfig:
    """Parse a flat `key = value` scenario file into a validated config."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected `key = value`, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key in _INT_KEYS:
            try:
                values[key] = int(val)
            except ValueError:
                raise ScenarioError(f"{key}: expected an integer, got {val!r}") from None
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(val)
            except ValueError:
                raise ScenarioError(f"{key}: expected a number, got {val!r}") from None
        elif key == "vuln_range":
            parts = [p for p in val.replace(",", " ").split() if p]
            if len(parts) != 2:
                raise ScenarioError(f"vuln_range: expected two numbers, got {val!r}")
            try:
                values[key] = (float(parts[0]), float(parts[1]))
            except ValueError:
                raise ScenarioError(f"vuln_range: expected two numbers, got {val!r}") from None
        elif key == "detection":
            parts = val.split()
            mode = parts[0]
            if mode not in DETECTION_MODES:
                raise ScenarioError(f"detection: unknown mode {mode!r}")
            values["detection"] = mode
            if mode == "probabilistic":
                if len(parts) != 2:
                    raise ScenarioError("detection: probabilistic mode needs a probability")
                try:
                    values["detection_prob"] = float(parts[1])
                except ValueError:
                    raise ScenarioError(f"detection: bad probability {parts[1]!r}") from None
            elif len(parts) != 1:
                raise ScenarioError(f"detection: unexpected trailing value in {val!r}")
        else:
            raise ScenarioError(f"unknown key {key!r}")
    try:
        config = ScenarioConfig(**values)  # type: ignore[arg-type]
    except TypeError as exc:
        raise ScenarioError(str(exc)) from None
    return config.validate()


@dataclass(frozen=True)
class NodeAttr:
    vulnerability: float
    is_entry: bool = False


@dataclass(frozen=True)
class NetworkGraph:
    """Undirected host graph with entry node and high value target."""

    nodes: tuple[NodeAttr, ...]
    edges: frozenset[tuple[int, int]]
    entry_node: int
    hvt: int

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return tuple(tuple(sorted(n)) for n in adj)

    def neighbors(self, node: int) -> tuple[int, ...]:
        return self.adjacency[node]

    def vulnerability(self, node: int) -> float:
        return self.nodes[node].vulnerability


def _edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _components(n: int, edges: set[tuple[int, int]]) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = [False] * n
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        comp = [start]
        seen[start] = True
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    comp.append(v)
                    queue.append(v)
        comps.append(comp)
    return comps


def _random_er_edges(n: int, p: float, rng: np.random.Generator) -> set[tuple[int, int]]:
    edges = set()
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < p:
                edges.add((a, b))
    return edges


def generate_network(config: ScenarioConfig, rng: np.random.Generator | None = None) -> NetworkGraph:
    """Generate a connected seeded random topology with node attributes.

    Redraws the Erdos-Renyi graph until connected; after the retry budget the
    last draw is stitched together by bridging its components, so the result
    is connected by construction.
    """
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.topology_seed)
    n = config.n_nodes
    edges = _random_er_edges(n, config.edge_probability, rng)
    for _ in range(_MAX_CONNECTIVITY_RETRIES):
        if len(_components(n, edges)) == 1:
            break
        edges = _random_er_edges(n, config.edge_probability, rng)
    comps = _components(n, edges)
    while len(comps) > 1:
        a = comps[0][int(rng.integers(len(comps[0])))]
        b = comps[1][int(rng.integers(len(comps[1])))]
        edges.add(_edge(a, b))
        comps = [comps[0] + comps[1]] + comps[2:]

    lo, hi = config.vuln_range
    vulns = rng.uniform(lo, hi, size=n)
    entry = int(rng.integers(n))
    nodes = tuple(
        NodeAttr(vulnerability=float(v), is_entry=(i == entry)) for i, v in enumerate(vulns)
    )
    graph = NetworkGraph(
        nodes=nodes, edges=frozenset(edges), entry_node=entry, hvt=entry
    )
    dists = bfs_distances(graph, entry)
    max_dist = max(dists)
    candidates = sorted(i for i, d in enumerate(dists) if d == max_dist)
    hvt = candidates[int(rng.integers(len(candidates)))]
    return replace(graph, hvt=hvt)


def bfs_distances(graph: NetworkGraph, source: int) -> list[float]:
    """Hop distance from `source` to every node; `inf` where unreachable."""
    dists: list[float] = [math.inf] * graph.n_nodes
    dists[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in graph.neighbors(u):
            if dists[v] == math.inf:
                dists[v] = dists[u] + 1
                queue.append(v)
    return dists


def shortest_path_hops(graph: NetworkGraph, a: int, b: int) -> float:
    """Minimum edge count between `a` and `b`; `inf` if unreachable."""
    if not (0 <= a < graph.n_nodes and 0 <= b < graph.n_nodes):
        raise IndexError("node index out of range")
    return bfs_distances(graph, a)[b]
