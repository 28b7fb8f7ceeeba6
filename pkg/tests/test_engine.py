import numpy as np
import pytest

from causalblue.engine import (
    ISOLATE,
    NO_OP,
    NOOP,
    RESTORE,
    BlueAction,
    BluePolicy,
    EpisodeState,
    apply_blue_action,
    attack_score,
    attempt_compromise,
    blue_select_action,
    red_select_target,
    run_episode,
    step,
    write_trajectory,
)
from causalblue.scenario import NetworkGraph, NodeAttr, ScenarioConfig

from test_scenario import path_graph


def star_graph(n_leaves, vuln=0.5):
    nodes = tuple(NodeAttr(vulnerability=vuln, is_entry=(i == 0)) for i in range(n_leaves + 1))
    edges = frozenset((0, i) for i in range(1, n_leaves + 1))
    return NetworkGraph(nodes=nodes, edges=edges, entry_node=0, hvt=1)


class TestAttackScore:
    def test_maximal_case(self):
        assert attack_score(1.0, 1.0) == 100.0

    def test_quarter_skill_full_vuln(self):
        # 100 * 0.0625 / 0.25
        assert attack_score(0.25, 1.0) == pytest.approx(25.0)

    def test_quarter_skill_half_vuln(self):
        # 6.25 / 0.75
        assert attack_score(0.25, 0.5) == pytest.approx(6.25 / 0.75)

    def test_zero_skill_scores_zero(self):
        assert attack_score(0.0, 1.0) == 0.0

    def test_bounded(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            s = rng.uniform(1e-6, 1.0)
            v = rng.uniform(0.0, 1.0)
            assert 0.0 <= attack_score(s, v) <= 100.0


class TestAttemptCompromise:
    def test_certain_success_at_max_score(self):
        rng = np.random.default_rng(0)
        assert all(attempt_compromise(1.0, 1.0, rng) for _ in range(1000))

    def test_empirical_rate_matches_score(self):
        rng = np.random.default_rng(7)
        n = 100_000
        hits = sum(attempt_compromise(0.25, 1.0, rng) for _ in range(n))
        assert hits / n == pytest.approx(0.25, abs=0.01)

    def test_within_three_standard_errors(self):
        rng = np.random.default_rng(11)
        n = 100_000
        p = attack_score(0.6, 0.3) / 100.0
        hits = sum(attempt_compromise(0.6, 0.3, rng) for _ in range(n))
        se = np.sqrt(p * (1 - p) / n)
        assert abs(hits / n - p) <= 3 * se


class TestRedSelectTarget:
    def test_only_entry_available_initially(self):
        state = EpisodeState(graph=path_graph(4))
        assert red_select_target(state, np.random.default_rng(0)) == 0

    def test_all_compromised_gives_none(self):
        g = path_graph(3)
        state = EpisodeState(graph=g, compromised={0, 1, 2})
        assert red_select_target(state, np.random.default_rng(0)) is None

    def test_star_candidates_match_brute_force(self):
        g = star_graph(5)
        state = EpisodeState(graph=g, compromised={0}, isolated={3: 2})
        rng = np.random.default_rng(0)
        brute = {
            v
            for v in range(g.n_nodes)
            if v not in state.compromised
            and v not in state.isolated
            and (
                v == g.entry_node
                or any(
                    nb in state.compromised and nb not in state.isolated
                    for nb in g.neighbors(v)
                )
            )
        }
        assert brute == {1, 2, 4, 5}
        picks = {red_select_target(state, rng) for _ in range(300)}
        assert picks == brute

    def test_isolated_foothold_blocks_spread(self):
        # centre compromised but isolated: leaves are unreachable
        g = star_graph(3)
        state = EpisodeState(graph=g, compromised={0}, isolated={0: 5})
        picks = {red_select_target(state, np.random.default_rng(2)) for _ in range(100)}
        assert picks == {None}  # entry is compromised, leaves unreachable


class TestBlueSelectAction:
    def test_certain_restore(self):
        state = EpisodeState(graph=path_graph(3), compromised={1}, blue_seen_compromised={1})
        rng = np.random.default_rng(0)
        for _ in range(100):
            action = blue_select_action(BluePolicy(1.0, 0.0), state, rng)
            assert action.kind == RESTORE and action.target == 1

    def test_all_zero_probabilities_noop(self):
        state = EpisodeState(graph=path_graph(3), compromised={1}, blue_seen_compromised={1})
        rng = np.random.default_rng(0)
        for _ in range(100):
            assert blue_select_action(BluePolicy(0.0, 0.0), state, rng) == NO_OP

    def test_gate_frequencies(self):
        state = EpisodeState(graph=path_graph(3), compromised={1}, blue_seen_compromised={1})
        rng = np.random.default_rng(5)
        n = 100_000
        counts = {RESTORE: 0, ISOLATE: 0, NOOP: 0}
        for _ in range(n):
            counts[blue_select_action(BluePolicy(0.5, 0.5), state, rng).kind] += 1
        assert counts[RESTORE] / n == pytest.approx(0.50, abs=0.01)
        assert counts[ISOLATE] / n == pytest.approx(0.25, abs=0.01)
        assert counts[NOOP] / n == pytest.approx(0.25, abs=0.01)

    def test_empty_seen_set_forces_noop(self):
        state = EpisodeState(graph=path_graph(3))
        assert blue_select_action(BluePolicy(1.0, 1.0), state, np.random.default_rng(0)) == NO_OP


class TestApplyBlueAction:
    def test_restore_removes_compromise(self):
        config = ScenarioConfig()
        state = EpisodeState(graph=path_graph(3), compromised={1}, blue_seen_compromised={1})
        apply_blue_action(state, BlueAction(RESTORE, 1), config)
        assert 1 not in state.compromised and 1 not in state.blue_seen_compromised

    def test_restore_uncompromised_is_noop(self):
        config = ScenarioConfig()
        state = EpisodeState(graph=path_graph(3))
        apply_blue_action(state, BlueAction(RESTORE, 2), config)
        assert not state.compromised

    def test_isolate_sets_default_counter(self):
        config = ScenarioConfig()
        state = EpisodeState(graph=path_graph(3), compromised={1})
        apply_blue_action(state, BlueAction(ISOLATE, 1), config)
        assert state.isolated == {1: 5}
        assert 1 in state.compromised  # isolation does not cleanse

    def test_noop_leaves_state_unchanged(self):
        config = ScenarioConfig()
        state = EpisodeState(graph=path_graph(3), compromised={1}, blue_seen_compromised={1})
        before = state.snapshot()
        apply_blue_action(state, NO_OP, config)
        assert state.snapshot() == before


class TestStep:
    def test_terminates_before_blue_acts_when_hvt_falls(self):
        g = path_graph(2, vuln=1.0)  # entry 0, hvt 1
        config = ScenarioConfig(red_skill=1.0)
        state = EpisodeState(graph=g, compromised={0}, blue_seen_compromised={0})
        rec = step(state, config, BluePolicy(1.0, 1.0), np.random.default_rng(0))
        assert rec.state_after.terminated and rec.state_after.hvt_compromised
        assert rec.blue_action == NO_OP

    def test_idle_step_only_advances_time_and_counters(self):
        g = path_graph(3)
        config = ScenarioConfig(red_skill=0.0)
        state = EpisodeState(graph=g, compromised={0, 1, 2}, isolated={1: 3})
        rec = step(state, config, BluePolicy(0.0, 0.0), np.random.default_rng(0))
        assert rec.red_target is None
        assert rec.blue_action == NO_OP
        assert state.t == 1 and state.isolated == {1: 2}

    def test_reconnect_exactly_after_isolation_duration(self):
        g = path_graph(4)
        config = ScenarioConfig(red_skill=0.0)
        state = EpisodeState(graph=g, compromised={1}, blue_seen_compromised={1})
        rng = np.random.default_rng(0)
        step(state, config, BluePolicy(0.0, 1.0), rng)  # isolates node 1 at t=0
        assert state.isolated == {1: 4}
        for t in range(1, 5):
            step(state, config, BluePolicy(0.0, 0.0), rng)
        assert state.isolated == {}  # reconnected at t=5
        assert state.t == 5

    def test_stepping_terminated_state_raises(self):
        state = EpisodeState(graph=path_graph(2), terminated=True)
        with pytest.raises(RuntimeError):
            step(state, ScenarioConfig(), BluePolicy(0.5, 0.5), np.random.default_rng(0))


class TestRunEpisode:
    def test_inert_red_full_horizon(self):
        config = ScenarioConfig(red_skill=0.0)
        g = path_graph(10)
        records = run_episode(config, g, BluePolicy(1.0, 0.0), rng=0)
        assert len(records) == 25
        assert all(not r.state_after.compromised for r in records)

    def test_deterministic_under_seed(self):
        config = ScenarioConfig()
        g = path_graph(6)
        r1 = run_episode(config, g, BluePolicy(0.5, 0.5), rng=9)
        r2 = run_episode(config, g, BluePolicy(0.5, 0.5), rng=9)
        assert r1 == r2

    def test_certain_red_marches_down_path(self):
        d = 4
        g = path_graph(d + 1, vuln=1.0)
        config = ScenarioConfig(red_skill=1.0)
        records = run_episode(config, g, BluePolicy(0.0, 0.0), rng=1)
        assert len(records) == d + 1
        assert records[-1].state_after.hvt_compromised

    def test_compromise_monotone_except_restore(self):
        config = ScenarioConfig()
        g = path_graph(8)
        records = run_episode(config, g, BluePolicy(0.3, 0.3), rng=4)
        prev = frozenset()
        for rec in records:
            now = rec.state_after.compromised
            removed = prev - now
            if removed:
                assert rec.blue_action.kind == RESTORE
                assert removed == {rec.blue_action.target}
            prev = now

    def test_perfect_detection_sees_everything(self):
        config = ScenarioConfig()
        g = path_graph(8)
        for seed in range(20):
            for rec in run_episode(config, g, BluePolicy(0.4, 0.4), rng=seed):
                snap = rec.state_after
                assert snap.blue_seen_compromised == snap.compromised

    def test_isolated_nodes_never_red_targets(self):
        config = ScenarioConfig(red_skill=0.9)
        g = star_graph(6, vuln=0.9)
        for seed in range(30):
            isolated_now: set[int] = set()
            for rec in run_episode(config, g, BluePolicy(0.1, 0.8), rng=seed):
                if rec.red_target is not None:
                    assert rec.red_target not in isolated_now
                # counter-1 nodes reconnect before the next red phase
                isolated_now = {n for n, c in rec.state_after.isolated if c > 1}

    def test_isolation_counters_in_range(self):
        config = ScenarioConfig()
        g = path_graph(8)
        for seed in range(20):
            for rec in run_episode(config, g, BluePolicy(0.2, 0.8), rng=seed):
                for _, counter in rec.state_after.isolated:
                    assert 1 <= counter <= config.isolation_duration


def test_trajectory_csv(tmp_path):
    config = ScenarioConfig()
    records = run_episode(config, path_graph(5), BluePolicy(0.5, 0.5), rng=2)
    out = tmp_path / "traj.csv"
    with open(out, "w") as fh:
        write_trajectory(records, fh)
    lines = out.read_text().splitlines()
    assert lines[0].split(",")[:3] == ["t", "red_target", "red_succeeded"]
    assert len(lines) == len(records) + 1
