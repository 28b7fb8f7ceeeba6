"""Episode simulation: red-agent attacks, blue-agent actions and turn order."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Iterable, TextIO

import numpy as np

from .scenario import NetworkGraph, ScenarioConfig

RESTORE = "restore"
ISOLATE = "isolate"
NOOP = "noop"


@dataclass(frozen=True)
class BluePolicy:
    """Per-step action probabilities of the probabilistic blue agent."""

    p_res: float
    p_iso: float

    def validate(self) -> "BluePolicy":
        if not (0.0 <= self.p_res <= 1.0 and 0.0 <= self.p_iso <= 1.0):
            raise ValueError("action probabilities must lie in [0, 1]")
        return self


@dataclass(frozen=True)
class BlueAction:
    kind: str = NOOP
    target: int | None = None


NO_OP = BlueAction()


@dataclass(frozen=True)
class StateSnapshot:
    """Frozen view of the episode state at the end of the blue phase."""

    t: int
    compromised: frozenset[int]
    blue_seen_compromised: frozenset[int]
    isolated: tuple[tuple[int, int], ...]  # (node, remaining steps) pairs
    hvt_compromised: bool
    terminated: bool

    def isolated_nodes(self) -> frozenset[int]:
        return frozenset(node for node, _ in self.isolated)


@dataclass
class EpisodeState:
    graph: NetworkGraph
    t: int = 0
    compromised: set[int] = field(default_factory=set)
    blue_seen_compromised: set[int] = field(default_factory=set)
    isolated: dict[int, int] = field(default_factory=dict)
    hvt_compromised: bool = False
    terminated: bool = False

    def snapshot(self) -> StateSnapshot:
        return StateSnapshot(
            t=self.t,
            compromised=frozenset(self.compromised),
            blue_seen_compromised=frozenset(self.blue_seen_compromised),
            isolated=tuple(sorted(self.isolated.items())),
            hvt_compromised=self.hvt_compromised,
            terminated=self.terminated,
        )


@dataclass(frozen=True)
class StepRecord:
    t: int
    red_target: int | None
    red_succeeded: bool
    blue_action: BlueAction
    state_after: StateSnapshot


def attack_score(skill: float, vuln: float) -> float:
    """Attack strength in [0, 100]; a zero-skill attacker scores zero."""
    if skill == 0.0:
        return 0.0
    return 100.0 * skill * skill / (skill + (1.0 - vuln))


def attempt_compromise(skill: float, vuln: float, rng: np.random.Generator) -> bool:
    """Single attack roll: succeeds iff the score beats u ~ U[0, 100)."""
    u = rng.uniform(0.0, 100.0)
    return attack_score(skill, vuln) >= u


def red_select_target(state: EpisodeState, rng: np.random.Generator) -> int | None:
    """Uniform draw over attackable nodes: non-compromised, non-isolated,
    and either an entry node or adjacent to a compromised non-isolated node."""
    graph = state.graph
    candidates = []
    for node in range(graph.n_nodes):
        if node in state.compromised or node in state.isolated:
            continue
        if node == graph.entry_node:
            candidates.append(node)
            continue
        for nb in graph.neighbors(node):
            if nb in state.compromised and nb not in state.isolated:
                candidates.append(node)
                break
    if not candidates:
        return None
    return candidates[int(rng.integers(len(candidates)))]


def blue_select_action(
    policy: BluePolicy, state: EpisodeState, rng: np.random.Generator
) -> BlueAction:
    """Sequentially gated choice: restore w.p. p_res, else isolate w.p. p_iso,
    else no-op. Targets are uniform over the seen-compromised set."""
    if rng.random() < policy.p_res:
        kind = RESTORE
    elif rng.random() < policy.p_iso:
        kind = ISOLATE
    else:
        return NO_OP
    seen = sorted(state.blue_seen_compromised)
    if not seen:
        return NO_OP
    return BlueAction(kind=kind, target=seen[int(rng.integers(len(seen)))])


def apply_blue_action(state: EpisodeState, action: BlueAction, config: ScenarioConfig) -> None:
    """Mutate `state` per the action; isolation never cleanses compromise."""
    if action.kind == RESTORE:
        state.compromised.discard(action.target)
        state.blue_seen_compromised.discard(action.target)
    elif action.kind == ISOLATE:
        state.isolated[action.target] = config.isolation_duration


def _update_detection(state: EpisodeState, config: ScenarioConfig, rng: np.random.Generator) -> None:
    if config.detection == "perfect":
        state.blue_seen_compromised = set(state.compromised)
        return
    for node in sorted(state.compromised - state.blue_seen_compromised):
        if rng.random() < config.detection_prob:
            state.blue_seen_compromised.add(node)


def step(
    state: EpisodeState,
    config: ScenarioConfig,
    policy: BluePolicy,
    rng: np.random.Generator,
) -> StepRecord:
    """Advance one time step: red phase, terminal check, blue phase, then
    isolation-counter decrement. Raises if the state is already terminated."""
    if state.terminated:
        raise RuntimeError("cannot step a terminated episode")

    red_target = red_select_target(state, rng)
    red_succeeded = False
    if red_target is not None:
        red_succeeded = attempt_compromise(
            config.red_skill, state.graph.vulnerability(red_target), rng
        )
        if red_succeeded:
            state.compromised.add(red_target)
    _update_detection(state, config, rng)

    blue_action = NO_OP
    if state.graph.hvt in state.compromised:
        state.hvt_compromised = True
        state.terminated = True
    else:
        blue_action = blue_select_action(policy, state, rng)
        apply_blue_action(state, blue_action, config)

    snapshot = state.snapshot()

    for node in list(state.isolated):
        state.isolated[node] -= 1
        if state.isolated[node] == 0:
            del state.isolated[node]
    state.t += 1
    return StepRecord(
        t=snapshot.t,
        red_target=red_target,
        red_succeeded=red_succeeded,
        blue_action=blue_action,
        state_after=snapshot,
    )


def run_episode(
    config: ScenarioConfig,
    graph: NetworkGraph,
    policy: BluePolicy | Callable[[int], BluePolicy],
    horizon: int | None = None,
    rng: np.random.Generator | int | None = None,
) -> list[StepRecord]:
    """Run up to `horizon` steps or until the HVT falls.

    `policy` is either a fixed BluePolicy or a per-step callable t -> policy.
    """
    if horizon is None:
        horizon = config.horizon
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    rng = np.random.default_rng(rng)
    policy_fn = policy if callable(policy) else (lambda _t: policy)
    state = EpisodeState(graph=graph)
    records = []
    for t in range(horizon):
        if state.terminated:
            break
        records.append(step(state, config, policy_fn(t), rng))
    return records


def write_trajectory(records: Iterable[StepRecord], out: TextIO) -> None:
    """Dump step records as CSV for offline inspection."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        [
            "t",
            "red_target",
            "red_succeeded",
            "blue_action_kind",
            "blue_target",
            "n_compromised",
            "n_isolated",
            "hvt_compromised",
        ]
    )
    for rec in records:
        writer.writerow(
            [
                rec.t,
                "" if rec.red_target is None else rec.red_target,
                int(rec.red_succeeded),
                rec.blue_action.kind,
                "" if rec.blue_action.target is None else rec.blue_action.target,
                len(rec.state_after.compromised),
                len(rec.state_after.isolated),
                int(rec.state_after.hvt_compromised),
            ]
        )
