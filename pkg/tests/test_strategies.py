import csv
import math

import numpy as np
import pytest

from statebandits import (
    BOUNDED_UNIT,
    ConfigurationError,
    Environment,
    EnvironmentSpec,
    PullStats,
    RecommendationError,
    ScheduleError,
    eba_recommend,
    instantiate,
    log_bar,
    make_state_sequence,
    run_sb_ucb,
    run_uniform_eba,
    sb_ucb_select,
    sr_counts,
    sr_schedule,
    substream,
    successive_rejects,
    uniform_select,
    write_trace_csv,
)

from _oracles import classical_ucb_run, sr_transcript


class TestPullStats:
    def test_accumulates(self):
        stats = PullStats(2, 2)
        stats.update(0, 1, 1.0)
        stats.update(0, 1, 0.0)
        assert stats.t == 2
        assert stats.counts[0, 1] == 2
        assert stats.sums[0, 1] == 1.0

    def test_means_nan_when_unpulled(self):
        stats = PullStats(2, 1)
        stats.update(1, 0, 0.5)
        means = stats.means
        assert np.isnan(means[0, 0])
        assert means[1, 0] == 0.5

    def test_copy_is_independent(self):
        stats = PullStats(2, 1)
        stats.update(0, 0, 1.0)
        other = stats.copy()
        other.update(0, 0, 1.0)
        assert stats.counts[0, 0] == 1 and other.counts[0, 0] == 2


class TestOptimismIndex:
    def test_forced_exploration_picks_lowest_unpulled(self):
        stats = PullStats(3, 1)
        assert sb_ucb_select(stats, 0, 1, 3.0, BOUNDED_UNIT) == 0
        stats.update(0, 0, 1.0)
        assert sb_ucb_select(stats, 0, 2, 3.0, BOUNDED_UNIT) == 1

    def test_hand_evaluated_indices(self):
        stats = PullStats(2, 1)
        for _ in range(4):
            stats.update(0, 0, 0.5)
        stats.update(1, 0, 0.4)
        bonus0 = math.sqrt(3.0 * math.log(10) / (2.0 * 4.0))
        bonus1 = math.sqrt(3.0 * math.log(10) / 2.0)
        assert bonus0 == pytest.approx(0.9292, abs=2e-4)
        assert bonus1 == pytest.approx(1.8585, abs=2e-4)
        assert 0.5 + bonus0 == pytest.approx(1.4292, abs=2e-4)
        assert 0.4 + bonus1 == pytest.approx(2.2585, abs=2e-4)
        assert sb_ucb_select(stats, 0, 10, 3.0, BOUNDED_UNIT) == 1

    def test_alpha_must_exceed_two(self):
        stats = PullStats(2, 1)
        with pytest.raises(ConfigurationError, match="alpha"):
            sb_ucb_select(stats, 0, 1, 2.0, BOUNDED_UNIT)

    def test_per_state_statistics_are_separate(self):
        stats = PullStats(2, 2)
        stats.update(0, 0, 1.0)
        stats.update(1, 0, 1.0)
        assert sb_ucb_select(stats, 1, 3, 3.0, BOUNDED_UNIT) == 0


class TestUniformRotation:
    def test_single_state_cycle(self):
        seq = (0, 0, 0, 0)
        assert [uniform_select(seq, t, 2) for t in (1, 2, 3, 4)] == [1, 0, 1, 0]

    def test_two_state_example(self):
        seq = (0, 1, 0, 1)
        assert uniform_select(seq, 3, 3) == 2

    def test_balance_within_one(self):
        seq = make_state_sequence(3, 200, "iid_uniform", seed=3)
        counts = np.zeros((4, 3), dtype=int)
        for t in range(1, 201):
            s = seq[t - 1]
            counts[uniform_select(seq, t, 4), s] += 1
            per_state = counts[:, s]
            assert per_state.max() - per_state.min() <= 1


class TestRecommendation:
    def test_best_row_average(self):
        stats = PullStats(2, 2)
        for (a, s), value in {(0, 0): 0.9, (0, 1): 0.5, (1, 0): 0.6, (1, 1): 0.7}.items():
            stats.update(a, s, value)
        assert eba_recommend(stats) == 0

    def test_tie_goes_to_lowest_index(self):
        stats = PullStats(3, 1)
        for a in range(3):
            stats.update(a, 0, 0.5)
        assert eba_recommend(stats) == 0

    def test_close_row_means(self):
        stats = PullStats(2, 2)
        for (a, s), value in {(0, 0): 0.6, (0, 1): 0.6, (1, 0): 0.61, (1, 1): 0.61}.items():
            stats.update(a, s, value)
        assert eba_recommend(stats) == 1

    def test_unpulled_arm_is_an_error(self):
        stats = PullStats(3, 2)
        stats.update(0, 0, 1.0)
        stats.update(2, 1, 1.0)
        with pytest.raises(RecommendationError, match="arm 1"):
            eba_recommend(stats)

    def test_partial_cells_use_defined_means_only(self):
        stats = PullStats(2, 2)
        stats.update(0, 0, 0.2)
        stats.update(1, 1, 0.9)
        assert eba_recommend(stats) == 1


class TestSchedules:
    def test_log_bar(self):
        assert log_bar(3) == pytest.approx(0.5 + 0.5 + 1.0 / 3.0)
        assert log_bar(2) == pytest.approx(1.0)

    def test_uniform_examples(self):
        assert sr_schedule("uniform", 4, 12).t_k == (4, 8, 12)
        assert sr_schedule("uniform", 2, 10).t_k == (10,)

    def test_reference_hand_example(self):
        # per-arm targets n_1 = ceil(97/4) = 25, n_2 = ceil(97/(8/3)) = 37;
        # phase lengths 3*25 = 75 and 2*(37-25) = 24, last boundary forced up
        sched = sr_schedule("reference", 3, 100)
        assert sched.t_k == (75, 100)

    def test_reference_matches_per_arm_targets(self):
        for K, n in [(3, 100), (4, 90), (6, 300), (10, 500)]:
            bar = log_bar(K)
            targets = [math.ceil((n - K) / (bar * (K + 1 - j))) for j in range(1, K)]
            steps, total, prev = [], 0, 0
            for j, cum in enumerate(targets, start=1):
                total += (K + 1 - j) * (cum - prev)
                prev = cum
                steps.append(min(total, n))
            steps[-1] = n
            assert sr_schedule("reference", K, n).t_k == tuple(steps)

    def test_reference_two_arms_coincides_with_uniform(self):
        assert sr_schedule("reference", 2, 10).t_k == (10,)

    def test_reference_caps_final_phase(self):
        for K, n in [(3, 60), (4, 100), (5, 200)]:
            sched = sr_schedule("reference", K, n)
            assert sched.t_k[-1] == n
            assert all(a < b for a, b in zip(sched.t_k, sched.t_k[1:]))

    def test_schedule_properties(self):
        sched = sr_schedule("uniform", 5, 50)
        assert sched.K == 5
        assert sched.n == 50

    def test_errors(self):
        with pytest.raises(ScheduleError):
            sr_schedule("uniform", 1, 10)
        with pytest.raises(ScheduleError):
            sr_schedule("uniform", 4, 3)
        with pytest.raises(ScheduleError, match="kind"):
            sr_schedule("geometric", 3, 30)


def noiseless_env(m, n, state_mode="round_robin"):
    m = np.asarray(m, dtype=float)
    K, S = m.shape
    spec = EnvironmentSpec(
        K=K, S=S, mu=tuple(float(v) for v in m.mean(axis=1)), sigma2=0.01,
        state_sequence=make_state_sequence(S, n, state_mode),
        reward_family="truncated_gaussian", reward_sigma2=1e-18,
    )
    return Environment(spec=spec, m=m)


class TestSuccessiveRejects:
    def test_noiseless_ordering(self):
        env = noiseless_env([[0.9], [0.5], [0.1]], 30)
        res = successive_rejects(env, sr_schedule("uniform", 3, 30), substream(0, "sr"))
        assert res.rejected == [2, 1]
        assert res.winner == 0

    def test_two_arms_match_uniform_rotation(self):
        spec = EnvironmentSpec(K=2, S=2, mu=(0.7, 0.4), sigma2=0.05,
                               state_sequence=make_state_sequence(2, 40, "iid_uniform", seed=2))
        env = instantiate(spec)
        res = successive_rejects(env, sr_schedule("uniform", 2, 40), substream(1, "sr"))
        assert len(res.rejected) == 1
        for t, s, arm, _, phase in res.steps:
            assert phase == 1
            assert arm == uniform_select(spec.state_sequence, t, 2)

    def test_transcript_matches_independent_resimulation(self):
        spec = EnvironmentSpec(K=3, S=2, mu=(0.8, 0.5, 0.2), sigma2=0.05,
                               state_sequence=make_state_sequence(2, 60, "iid_uniform", seed=4),
                               seed=11)
        env = instantiate(spec)
        sched = sr_schedule("uniform", 3, 60)
        res = successive_rejects(env, sched, substream(9, "sr-test"))
        winner, steps, rejected = sr_transcript(env, sched.t_k, substream(9, "sr-test"))
        assert res.winner == winner
        assert res.rejected == rejected
        assert res.steps == steps

    def test_count_table_matches_closed_form(self):
        for seed in range(5):
            seq = make_state_sequence(3, 90, "iid_uniform", seed=seed)
            spec = EnvironmentSpec(K=4, S=3, mu=(0.9, 0.7, 0.5, 0.3), sigma2=0.05,
                                   state_sequence=seq, seed=seed)
            env = instantiate(spec)
            for kind in ("uniform", "reference"):
                sched = sr_schedule(kind, 4, 90)
                res = successive_rejects(env, sched, substream(seed, "sr-table"))
                assert np.array_equal(res.n_table, sr_counts(seq, sched, 4, 3))

    def test_pull_accounting(self):
        spec = EnvironmentSpec(K=3, S=2, mu=(0.8, 0.5, 0.2), sigma2=0.05,
                               state_sequence=make_state_sequence(2, 45, "iid_uniform", seed=6))
        env = instantiate(spec)
        sched = sr_schedule("uniform", 3, 45)
        res = successive_rejects(env, sched, substream(2, "sr"))
        assert len(res.steps) == 45
        phases = [phase for _, _, _, _, phase in res.steps]
        boundaries = [0] + list(sched.t_k)
        for k in range(1, 3):
            assert phases[boundaries[k - 1]:boundaries[k]] == [k] * (boundaries[k] - boundaries[k - 1])
        active_per_phase = {k: set() for k in (1, 2)}
        for _, _, arm, _, phase in res.steps:
            active_per_phase[phase].add(arm)
        assert len(active_per_phase[1]) == 3
        assert len(active_per_phase[2]) == 2

    def test_within_phase_balance(self):
        spec = EnvironmentSpec(K=3, S=2, mu=(0.8, 0.5, 0.2), sigma2=0.05,
                               state_sequence=make_state_sequence(2, 66, "iid_uniform", seed=8))
        env = instantiate(spec)
        sched = sr_schedule("uniform", 3, 66)
        res = successive_rejects(env, sched, substream(3, "sr"))
        for k, (lo, hi) in enumerate(zip((0,) + sched.t_k, sched.t_k), start=1):
            per_cell: dict = {}
            for t, s, arm, _, phase in res.steps[lo:hi]:
                assert phase == k
                per_cell[(arm, s)] = per_cell.get((arm, s), 0) + 1
            for s in range(2):
                vals = [per_cell.get((arm, s), 0) for arm in set(a for a, ss in per_cell if ss == s)]
                if vals:
                    assert max(vals) - min(vals) <= 1

    def test_schedule_env_mismatch(self):
        env = instantiate(EnvironmentSpec(K=3, S=1, mu=(0.8, 0.5, 0.2), sigma2=0.05,
                                          state_sequence=(0,) * 30))
        with pytest.raises(ScheduleError):
            successive_rejects(env, sr_schedule("uniform", 4, 28), substream(0, "sr"))
        with pytest.raises(ScheduleError):
            successive_rejects(env, sr_schedule("uniform", 3, 60), substream(0, "sr"))


class TestRunners:
    def test_uniform_eba_counts_balanced(self):
        spec = EnvironmentSpec(K=3, S=2, mu=(0.9, 0.5, 0.1), sigma2=0.01,
                               state_sequence=make_state_sequence(2, 120, "round_robin"))
        env = instantiate(spec)
        pick, stats = run_uniform_eba(env, 120, substream(4, "run"))
        assert stats.t == 120
        assert stats.counts.max() - stats.counts.min() <= 1
        assert pick in range(3)

    def test_sb_ucb_prefers_best_arm(self):
        env = noiseless_env([[0.9], [0.2]], 200)
        stats, chosen = run_sb_ucb(env, 200, 3.0, BOUNDED_UNIT, substream(5, "run"))
        assert stats.counts[0, 0] > stats.counts[1, 0]
        assert chosen[:2] == [0, 1]

    def test_sb_ucb_single_state_matches_classical(self):
        for seed in range(5):
            rng = substream(seed, "cls-m")
            K = int(rng.integers(2, 5))
            m_vec = 0.1 + 0.8 * rng.random(K)
            spec = EnvironmentSpec(K=K, S=1, mu=tuple(float(v) for v in m_vec),
                                   sigma2=0.01, state_sequence=(0,) * 200)
            env = Environment(spec=spec, m=m_vec[:, None])
            _, chosen = run_sb_ucb(env, 200, 3.0, BOUNDED_UNIT, substream(seed, "cls-r"))
            reference = classical_ucb_run(m_vec, 200, 3.0, substream(seed, "cls-r").random(200))
            assert chosen == reference


def test_write_trace_csv(tmp_path):
    env = noiseless_env([[0.9], [0.5], [0.1]], 30)
    res = successive_rejects(env, sr_schedule("uniform", 3, 30), substream(0, "sr"))
    path = tmp_path / "trace.csv"
    write_trace_csv(res.steps, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "state", "arm", "reward", "phase"]
    assert len(rows) == 31
    assert rows[1][0] == "1"
    assert min(abs(float(rows[1][3]) - v) for v in (0.9, 0.5, 0.1)) < 1e-8
