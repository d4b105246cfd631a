"""Sufficient statistics and generalized likelihood ratio stopping."""

from __future__ import annotations

import math

from .exp_family import DomainError, RewardFamily, _kl


class UnpulledArmError(ValueError):
    pass


class UnsupportedAlphaError(ValueError):
    pass


class EmpiricalState:
    """Per-arm counts, running mean reward and cost, and cumulative cost J.

    Plain lists rather than arrays: the engine updates one arm per step and
    small-array numpy overhead dominates at that granularity.
    """

    def __init__(self, K: int):
        self.K = K
        self.t = 0
        self.counts = [0] * K
        self.mean_reward = [0.0] * K
        self.mean_cost = [0.0] * K
        self.cost_totals = [0.0] * K
        self.J = 0.0

    def update(self, arm: int, reward: float, cost: float) -> None:
        n = self.counts[arm] + 1
        self.counts[arm] = n
        self.mean_reward[arm] += (reward - self.mean_reward[arm]) / n
        self.mean_cost[arm] += (cost - self.mean_cost[arm]) / n
        self.cost_totals[arm] += cost
        self.J += cost
        self.t += 1

    @classmethod
    def from_stats(cls, counts, mean_reward, mean_cost=None) -> "EmpiricalState":
        """Build a state directly from summary statistics (tests, replays)."""
        K = len(counts)
        s = cls(K)
        s.counts = [int(n) for n in counts]
        s.mean_reward = [float(m) for m in mean_reward]
        s.mean_cost = [1.0] * K if mean_cost is None else [float(c) for c in mean_cost]
        s.cost_totals = [c * n for c, n in zip(s.mean_cost, s.counts)]
        s.t = sum(s.counts)
        s.J = sum(s.cost_totals)
        return s

    def empirical_best(self) -> int:
        """Arm with the largest empirical mean; ties go to the lowest index."""
        means = self.mean_reward
        best = 0
        for a in range(1, self.K):
            if means[a] > means[best]:
                best = a
        return best

    def require_all_pulled(self) -> None:
        if min(self.counts) < 1:
            raise UnpulledArmError("every arm must be pulled at least once")


def _require_pulled(state, *arms):
    for a in arms:
        if state.counts[a] < 1:
            raise UnpulledArmError(f"arm {a} has not been pulled")


def mixture_mean(state: EmpiricalState, a: int, b: int) -> float:
    _require_pulled(state, a, b)
    na, nb = state.counts[a], state.counts[b]
    return (na * state.mean_reward[a] + nb * state.mean_reward[b]) / (na + nb)


def pairwise_glr(state: EmpiricalState, a: int, b: int, family: RewardFamily) -> float:
    """Z_ab = N_a d(mu_a, mu_ab) + N_b d(mu_b, mu_ab), symmetric and unsigned."""
    _require_pulled(state, a, b)
    na, nb = state.counts[a], state.counts[b]
    ma = family.clamp(state.mean_reward[a])
    mb = family.clamp(state.mean_reward[b])
    if ma == mb:
        return 0.0
    # sort the pair so Z_ab and Z_ba run the exact same float operations
    if ma > mb:
        ma, mb, na, nb = mb, ma, nb, na
    m = (na * ma + nb * mb) / (na + nb)
    code, s = family.code, family.sigma
    return na * _kl(code, s, ma, m) + nb * _kl(code, s, mb, m)


def chernoff_stat(state: EmpiricalState, family: RewardFamily) -> float:
    """max_a min_{b != a} of the signed statistic, i.e. min_b Z(a_hat, b)."""
    state.require_all_pulled()
    best = state.empirical_best()
    return min(pairwise_glr(state, best, b, family) for b in range(state.K) if b != best)


def threshold(t: int, delta: float, alpha: float = 1.0, B: float = 4.0) -> float:
    """Stopping threshold log(B t^alpha / delta)."""
    if t < 1:
        raise DomainError("t must be at least 1")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    if alpha < 1.0:
        raise DomainError("alpha must be at least 1")
    if not B > 0:
        raise DomainError("B must be positive")
    return math.log(B) + alpha * math.log(t) - math.log(delta)


def default_B(alpha: float, K: int) -> float:
    """B = 2K for alpha = 1. Larger alpha has no closed-form constant; pass B yourself."""
    if K < 2:
        raise DomainError("K must be at least 2")
    if alpha < 1.0:
        raise DomainError("alpha must be at least 1")
    if alpha != 1.0:
        raise UnsupportedAlphaError(f"no default B for alpha={alpha}; supply B explicitly")
    return 2.0 * K
