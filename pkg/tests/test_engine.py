import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cabai.engine import (ConfigError, Environment, TrajectoryError, TrajectoryRecord,
                          geometric_checkpoints, pull_count_series, read_records_csv,
                          read_snapshots_csv, replay, run_batch, run_trajectory, summarize,
                          trajectory_seed, write_records_csv, write_snapshots_csv)
from cabai.exp_family import BanditInstance, CostModel, RewardFamily
from cabai.policies import PolicyConfig

G = RewardFamily("gaussian")
TWO = BanditInstance(G, [1.0, 0.0], [1.0, 0.25], instance_id="two")
TABLE1 = BanditInstance(G, [1.5, 1.0, 0.5], [1.0, 0.1, 0.01], instance_id="table1")
NOISY = BanditInstance(RewardFamily("bernoulli"), [0.7, 0.5, 0.3],
                       [CostModel(0.6, "uniform", 0.3), CostModel(0.2, "uniform", 0.1), CostModel(0.05)],
                       instance_id="noisy")


def test_checkpoints_and_seeds():
    assert geometric_checkpoints(1000) == [128, 256, 512]
    assert trajectory_seed(0, 1) == trajectory_seed(0, 1)
    assert len({trajectory_seed(0, i) for i in range(1000)}) == 1000
    assert trajectory_seed(0, 1) != trajectory_seed(1, 0)


def test_environment_streams_are_per_arm():
    # the k-th draw of an arm does not depend on how other arms were pulled
    a, b = Environment(NOISY, 9), Environment(NOISY, 9)
    xs = [a.pull(0) for _ in range(300)]
    ys = []
    for _ in range(300):
        b.pull(2)
        ys.append(b.pull(0))
    assert xs == ys


@pytest.mark.parametrize("kind", ["ctas", "tas", "co", "uniform"])
def test_trajectory_is_deterministic(kind):
    a = run_trajectory(NOISY, PolicyConfig(kind), 0.05, 77)
    b = run_trajectory(NOISY, PolicyConfig(kind), 0.05, 77)
    assert a.key() == b.key()
    assert not a.censored and a.tau == sum(a.counts)
    assert a.total_cost == pytest.approx(sum(a.cost_totals))


def test_easy_instance():
    inst = BanditInstance(G, [10.0, 0.0], [1.0, 1.0])
    ok = 0
    for i in range(100):
        r = run_trajectory(inst, PolicyConfig("ctas"), 0.1, trajectory_seed(0, i))
        ok += r.correct and r.tau < 500
    assert ok >= 99


def test_cost_grows_with_log_inverse_delta():
    recs = run_batch(TWO, [PolicyConfig("ctas")], [1e-2, 1e-6], 200, base_seed=4, checkpoints=None)
    j2 = np.mean([r.total_cost for r in recs[:200]])
    j6 = np.mean([r.total_cost for r in recs[200:]])
    assert all(r.delta == 1e-2 for r in recs[:200])
    assert j6 > j2


def test_censoring_and_stopping_off():
    r = run_trajectory(TABLE1, PolicyConfig("ctas"), 1e-6, 1, tau_max=300, stopping=False)
    assert r.censored and r.tau == 300
    assert [t for t, _, _ in r.snapshots] == [128, 256]
    for t, pulls, costs in r.snapshots:
        assert sum(pulls) == pytest.approx(1.0) and sum(costs) == pytest.approx(1.0)


def test_tau_max_validation():
    with pytest.raises(ConfigError):
        run_trajectory(TABLE1, PolicyConfig(), 0.1, 0, tau_max=2)


def test_replay_reproduces_stop_and_decision():
    for kind in ("ctas", "co"):
        r = run_trajectory(NOISY, PolicyConfig(kind), 0.01, 5, keep_log=True)
        assert replay(r, NOISY, PolicyConfig(kind)) == (r.tau, r.decision)
        # replaying under a different policy diverges from the log
        other = PolicyConfig("uniform")
        with pytest.raises(TrajectoryError):
            replay(r, NOISY, other)


def test_run_batch_validation():
    with pytest.raises(ConfigError):
        run_batch(TWO, [PolicyConfig()], [0.1], 0)
    with pytest.raises(ConfigError):
        run_batch(TWO, [PolicyConfig()], [1.5], 3)
    with pytest.raises(ConfigError):
        run_batch(TWO, [], [0.1], 3)


def test_batch_order_and_common_seeds():
    recs = run_batch(TWO, [PolicyConfig("ctas"), PolicyConfig("co")], [0.1, 0.01], 3)
    assert [(r.policy, r.delta) for r in recs] == [(p, d) for p in ("ctas", "co") for d in (0.1, 0.01)
                                                    for _ in range(3)]
    assert [r.seed for r in recs[:3]] == [r.seed for r in recs[9:]]


@pytest.mark.slow
def test_parallel_batch_matches_serial():
    cfgs = [PolicyConfig("ctas"), PolicyConfig("co")]
    a = run_batch(NOISY, cfgs, [0.05], 8, base_seed=3, parallelism=1)
    b = run_batch(NOISY, cfgs, [0.05], 8, base_seed=3, parallelism=8)
    assert sorted(r.key() for r in a) == sorted(r.key() for r in b)
    assert [r.key() for r in a] == [r.key() for r in b]


def test_errors_are_recorded_per_run(monkeypatch):
    import cabai.policies
    from cabai.oracle import ConvergenceError

    def broken(*args, **kwargs):
        raise ConvergenceError("forced failure", (0.0, 1.0))

    monkeypatch.setattr(cabai.policies, "solve_proportions", broken)
    recs = run_batch(TABLE1, [PolicyConfig("ctas"), PolicyConfig("co")], [0.1], 2, checkpoints=None)
    ctas, co = recs[:2], recs[2:]
    for r in ctas:
        assert r.error.startswith("TrajectoryError") and "counts=" in r.error
    assert all(r.error is None for r in co)
    assert summarize(ctas, TABLE1).n_errors == 2


def _rec(cost, correct=True, censored=False, error=None):
    return TrajectoryRecord("two", "ctas", 0.1, 0, 10, cost, 0 if correct else 1, correct, (5, 5),
                            (cost / 2, cost / 2), censored, error=error)


def test_summarize():
    s = summarize([_rec(3.0)], TWO)
    assert s.mean_cost == s.median_cost == 3.0 and s.error_rate == 0.0
    s = summarize([_rec(1.0), _rec(3.0, correct=False), _rec(100.0, censored=True),
                   _rec(0.0, error="boom")], TWO)
    assert s.n_runs == 4 and s.n_completed == 2 and s.n_censored == 1 and s.n_errors == 1
    assert s.mean_cost == 2.0 and s.error_rate == 0.5
    assert s.t_star == pytest.approx(4.5)
    assert s.cost_ratio == pytest.approx(2.0 / (4.5 * math.log(10)))
    with pytest.raises(ValueError):
        summarize([], TWO)
    other = TrajectoryRecord("two", "co", 0.1, 0, 10, 1.0, 0, True, (5, 5), (0.5, 0.5), False)
    with pytest.raises(ValueError):
        summarize([_rec(1.0), other], TWO)


def test_csv_round_trip(tmp_path):
    recs = run_batch(NOISY, [PolicyConfig("ctas")], [0.05], 4, tau_max=2000)
    write_records_csv(tmp_path / "r.csv", recs, NOISY.K)
    write_snapshots_csv(tmp_path / "s.csv", recs)
    back = read_records_csv(tmp_path / "r.csv")
    snaps = read_snapshots_csv(tmp_path / "s.csv")
    for a, b in zip(recs, back):
        b.snapshots = snaps.get(b.seed, [])
        b.compute_seconds = a.compute_seconds
        assert a.key() == b.key()
    series = pull_count_series(recs)
    assert series[0]["t"] == 128 and series[0]["survivors"] <= 4


def test_csv_rejects_bad_rows(tmp_path):
    recs = run_batch(TWO, [PolicyConfig("co")], [0.1], 2)
    p = tmp_path / "r.csv"
    write_records_csv(p, recs, 2)
    p.write_text(p.read_text() + "two,co,0.1\n")
    with pytest.raises(ValueError, match=":4:"):
        read_records_csv(p)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**40), kind=st.sampled_from(["ctas", "co", "tas"]))
def test_records_are_consistent(seed, kind):
    r = run_trajectory(NOISY, PolicyConfig(kind), 0.1, seed, tau_max=20000)
    assert r.tau == sum(r.counts) and min(r.counts) >= 1
    assert r.correct == (r.decision == NOISY.best_arm)
    lo = [c.support[0] for c in NOISY.costs]
    hi = [c.support[1] for c in NOISY.costs]
    for a in range(3):
        assert lo[a] * r.counts[a] - 1e-9 <= r.cost_totals[a] <= hi[a] * r.counts[a] + 1e-9
