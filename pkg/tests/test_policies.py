import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cabai.engine import run_trajectory, trajectory_seed
from cabai.exp_family import BanditInstance, CostModel, DomainError, RewardFamily
from cabai.glr import EmpiricalState, UnpulledArmError, threshold
from cabai.policies import (CoState, NotStoppedError, PolicyConfig, co_eliminate, co_select_arm,
                            ctas_select_arm, ctas_should_stop, decide, forced_arm, make_policy,
                            tas_select_arm, uniform_select_arm)

G = RewardFamily("gaussian")
CTAS = PolicyConfig("ctas")


def test_forced_exploration_at_start():
    s = EmpiricalState.from_stats([1, 1, 1], [0.0, 1.0, 2.0])
    assert ctas_select_arm(s, CTAS, np.array([0.1, 0.1, 0.8])) == 0
    assert forced_arm(EmpiricalState.from_stats([10, 10, 10], [0, 1, 2])) is None


def test_ctas_deficit_argmax_and_ties():
    s = EmpiricalState.from_stats([10, 10, 10], [1.0, 0.5, 0.0])
    # J = 30, c_hat = 1: deficits J w - N = [0.5, -0.2, -0.3]
    assert ctas_select_arm(s, CTAS, np.array([10.5, 9.8, 9.7]) / 30) == 0
    # deficits [0.1, 0.1, -0.2] tie between arms 0 and 1
    assert ctas_select_arm(s, CTAS, np.array([10.1, 10.1, 9.8]) / 30) == 0
    assert ctas_select_arm(s, CTAS, np.array([9.8, 10.1, 10.1]) / 30) == 1


def test_select_requires_every_arm_pulled():
    with pytest.raises(UnpulledArmError):
        ctas_select_arm(EmpiricalState.from_stats([0, 3], [0, 1]), CTAS, np.array([0.5, 0.5]))


def test_ctas_stopping_examples():
    s = EmpiricalState.from_stats([200, 200], [1.0, 0.0])
    assert threshold(400, 0.1, 1.0, 4.0) == pytest.approx(math.log(16000))
    assert ctas_should_stop(s, CTAS, 0.1, G)
    # ln(4 * 400 / delta) > 100 once delta < 1600 e^-100
    assert not ctas_should_stop(s, CTAS, 1e-45, G)
    assert not ctas_should_stop(EmpiricalState.from_stats([50, 50, 50], [0.2] * 3), CTAS, 0.5, G)


def test_co_select():
    s = EmpiricalState.from_stats([2, 3], [1.0, 0.0], [1.0, 0.25])
    # scores sqrt(c) N = 2.0 vs 1.5
    assert co_select_arm(s, CoState((0, 1))) == 1
    assert co_select_arm(s, CoState((0,))) == 0
    tie = EmpiricalState.from_stats([1, 4, 4], [1.0, 0.0, 0.5], [1.0, 0.0625, 0.0625])
    assert co_select_arm(tie, CoState((0, 1, 2))) == 0


def test_co_eliminate():
    cfg = PolicyConfig("co")
    s = EmpiricalState.from_stats([200, 200], [1.0, 0.0])
    assert co_eliminate(s, CoState((0, 1)), cfg, 0.1, G).active == (0,)
    tiny = EmpiricalState.from_stats([1, 1, 1], [1.0, 0.0, 0.5])
    r = CoState((0, 1, 2))
    assert co_eliminate(tiny, r, cfg, 1e-6, G) is r
    with pytest.raises(DomainError):
        CoState(())


def test_decide():
    assert decide(EmpiricalState.from_stats([1, 1, 1], [0.2, 0.9, 0.1])) == 1
    assert decide(EmpiricalState.from_stats([1, 1, 1], [0.9, 0.9, 0.1])) == 0
    assert decide(EmpiricalState.from_stats([1, 1, 1], [0.9, 0.5, 0.1]), CoState((2,))) == 2


def test_decide_before_stop_raises():
    p = make_policy(CTAS, G, 2)
    with pytest.raises(NotStoppedError):
        p.decide(EmpiricalState.from_stats([1, 1], [1.0, 0.0]))


def test_uniform_round_robin():
    s = EmpiricalState(3)
    assert uniform_select_arm(s) == 0
    s.t = 4
    assert uniform_select_arm(s) == 1
    s = EmpiricalState(4)
    rng = np.random.default_rng(0)
    for _ in range(103):
        s.update(uniform_select_arm(s), rng.normal(), 1.0)
        assert max(s.counts) - min(s.counts) <= 1


def test_policy_config_validation():
    with pytest.raises(DomainError):
        PolicyConfig("thompson")
    with pytest.raises(DomainError):
        PolicyConfig(alpha=0.9)
    with pytest.raises(DomainError):
        PolicyConfig(exploration=0.0)
    assert PolicyConfig(alpha=1.3).has_optimality_guarantee
    assert not PolicyConfig(alpha=1.4).has_optimality_guarantee
    assert PolicyConfig(alpha=2.0, B=10.0).resolve_B(3) == 10.0
    assert PolicyConfig("co", name="co2").label == "co2"


def test_tas_unit_cost_deficit():
    s = EmpiricalState.from_stats([10, 30], [1.0, 0.0], [1.0, 0.1])
    # t w - N = [10, -10]: TAS ignores costs entirely
    assert tas_select_arm(s, PolicyConfig("tas"), np.array([0.5, 0.5])) == 0


def test_tas_long_run_fractions_equal_for_two_gaussian_arms():
    inst = BanditInstance(G, [1.0, 0.0], [1.0, 0.25])
    r = run_trajectory(inst, PolicyConfig("tas"), 0.1, seed=3, tau_max=20000, stopping=False)
    assert np.array(r.counts) / r.tau == pytest.approx([0.5, 0.5], abs=0.01)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32), kind=st.sampled_from(["gaussian", "bernoulli", "poisson"]))
def test_ctas_equals_tas_when_costs_are_equal(seed, kind):
    # with c_a = 0.5 for every arm the cost deficit is half the count deficit
    means = {"gaussian": [1.0, 0.4, 0.0], "bernoulli": [0.8, 0.5, 0.3], "poisson": [3.0, 2.0, 1.0]}[kind]
    inst = BanditInstance(RewardFamily(kind), means, [CostModel(0.5)] * 3)
    a = run_trajectory(inst, PolicyConfig("ctas"), 0.05, seed, tau_max=5000, keep_log=True)
    b = run_trajectory(inst, PolicyConfig("tas"), 0.05, seed, tau_max=5000, keep_log=True)
    assert [x[0] for x in a.log] == [x[0] for x in b.log]
    assert (a.tau, a.decision) == (b.tau, b.decision)
