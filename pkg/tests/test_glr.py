import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cabai.exp_family import DomainError, RewardFamily
from cabai.glr import (EmpiricalState, UnpulledArmError, UnsupportedAlphaError, chernoff_stat,
                       default_B, mixture_mean, pairwise_glr, threshold)

import reference as ref

G = RewardFamily("gaussian")
B = RewardFamily("bernoulli")
P = RewardFamily("poisson")


def test_mixture_mean():
    assert mixture_mean(EmpiricalState.from_stats([5, 5], [1.0, 0.0]), 0, 1) == 0.5
    assert mixture_mean(EmpiricalState.from_stats([3, 1], [1.0, 0.0]), 0, 1) == 0.75


def test_pairwise_glr_values():
    assert pairwise_glr(EmpiricalState.from_stats([4, 9], [0.3, 0.3]), 0, 1, B) == 0.0
    assert pairwise_glr(EmpiricalState.from_stats([8, 8], [1.0, 0.0]), 0, 1, G) == pytest.approx(2.0, abs=1e-14)
    z = pairwise_glr(EmpiricalState.from_stats([10, 10], [0.8, 0.2]), 0, 1, B)
    assert z == pytest.approx(20 * ref.binary_kl(0.8, 0.5), rel=1e-12)
    assert z == pytest.approx(3.8549, abs=5e-5)


def test_unpulled_arm():
    s = EmpiricalState.from_stats([3, 0], [1.0, 0.0])
    with pytest.raises(UnpulledArmError):
        pairwise_glr(s, 0, 1, G)
    with pytest.raises(UnpulledArmError):
        chernoff_stat(s, G)


def test_chernoff_special_cases():
    assert chernoff_stat(EmpiricalState.from_stats([3, 4, 5], [0.5, 0.5, 0.5]), G) == 0.0
    s = EmpiricalState.from_stats([7, 3], [0.9, 0.1])
    assert chernoff_stat(s, B) == pairwise_glr(s, 0, 1, B)


def test_threshold():
    assert threshold(10, 0.1, 1.0, 6.0) == pytest.approx(math.log(600), rel=1e-14)
    assert threshold(10, 0.1, 1.0, 6.0) == pytest.approx(6.39693, abs=5e-6)
    # B t^alpha = delta
    assert threshold(1, 0.5, 1.0, 0.5) == pytest.approx(0.0, abs=1e-15)
    for bad in [dict(t=0, delta=0.1), dict(t=5, delta=0.0), dict(t=5, delta=1.0),
                dict(t=5, delta=0.1, alpha=0.5), dict(t=5, delta=0.1, B=0.0)]:
        with pytest.raises(DomainError):
            threshold(**bad)


def test_default_B():
    assert default_B(1.0, 3) == 6
    assert default_B(1.0, 2) == 4
    with pytest.raises(UnsupportedAlphaError):
        default_B(1.5, 3)


def _means(kind):
    return {"gaussian": st.floats(-5, 5), "bernoulli": st.floats(0.0, 1.0),
            "poisson": st.floats(0.0, 10.0)}[kind]


@pytest.mark.parametrize("fam", [G, B, P])
@settings(max_examples=150, deadline=None)
@given(data=st.data())
def test_glr_symmetric_and_nonnegative(fam, data):
    K = data.draw(st.integers(2, 5))
    counts = data.draw(st.lists(st.integers(1, 10**4), min_size=K, max_size=K))
    means = data.draw(st.lists(_means(fam.kind), min_size=K, max_size=K))
    s = EmpiricalState.from_stats(counts, means)
    for a in range(K):
        for b in range(K):
            z = pairwise_glr(s, a, b, fam)
            assert z >= 0.0
            assert z == pairwise_glr(s, b, a, fam)
    # Chernoff statistic equals the max-min of the signed statistic (brute force)
    signed = lambda a, b: math.copysign(1.0, s.mean_reward[a] - s.mean_reward[b]) * pairwise_glr(s, a, b, fam)
    brute = max(min(signed(a, b) for b in range(K) if b != a) for a in range(K))
    assert chernoff_stat(s, fam) == pytest.approx(max(brute, 0.0), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 10**5), m=st.integers(1, 10**5), a=st.floats(-10, 10), b=st.floats(-10, 10),
       sigma=st.floats(0.1, 5))
def test_gaussian_glr_closed_form(n, m, a, b, sigma):
    fam = RewardFamily("gaussian", sigma)
    z = pairwise_glr(EmpiricalState.from_stats([n, m], [a, b]), 0, 1, fam)
    assert z == pytest.approx(ref.gaussian_glr(n, m, a, b, sigma), rel=1e-9, abs=1e-12)


def test_state_rebuilt_from_log_matches():
    rng = np.random.default_rng(5)
    log = [(int(a), float(r), float(c)) for a, r, c in
           zip(rng.integers(0, 3, 500), rng.normal(size=500), rng.uniform(0.1, 1, 500))]
    s = EmpiricalState(3)
    for a, r, c in log:
        s.update(a, r, c)
    arr = np.array(log)
    for a in range(3):
        sel = arr[arr[:, 0] == a]
        assert s.counts[a] == len(sel)
        assert s.mean_reward[a] == pytest.approx(sel[:, 1].mean(), rel=1e-12)
        assert s.mean_cost[a] == pytest.approx(sel[:, 2].mean(), rel=1e-12)
    assert s.t == 500 and s.J == pytest.approx(arr[:, 2].sum(), rel=1e-12)
