"""Sampling, stopping and decision rules.

* CTAS tracks the plug-in optimal cost proportions with sqrt(t) forced
  exploration and Chernoff stopping.
* TAS is the same procedure run as if every arm cost 1 (classic
  pull-count tracking); the environment still charges true costs.
* CO (Chernoff-Overlap) pulls argmin sqrt(c_hat_a) N_a over the surviving
  arms and eliminates an arm once its GLR against the empirical leader
  clears the threshold.
* Uniform is a round-robin baseline with Chernoff stopping.

Every argmin/argmax breaks ties toward the lowest arm index, so a policy is a
deterministic function of the observation stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exp_family import DomainError, RewardFamily
from .glr import EmpiricalState, chernoff_stat, default_B, pairwise_glr, threshold
from .oracle import DEFAULT_TOL, DegenerateInstanceError, OptimalProportions, solve_proportions

CTAS, TAS, CO, UNIFORM = "ctas", "tas", "co", "uniform"
POLICY_KINDS = (CTAS, TAS, CO, UNIFORM)


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = CTAS
    alpha: float = 1.0
    B: float | str = "auto"
    exploration: float = 1.0  # forced exploration when N_a < exploration * sqrt(t)
    oracle_tol: float = DEFAULT_TOL
    recompute_period: int = 1  # >1 reuses w* between oracle calls instead of every step
    name: str | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise DomainError(f"unknown policy kind {self.kind!r}; expected one of {POLICY_KINDS}")
        if self.alpha < 1.0:
            raise DomainError("alpha must be at least 1")
        if self.B != "auto" and not (isinstance(self.B, (int, float)) and self.B > 0):
            raise DomainError(f"B must be positive or 'auto', got {self.B!r}")
        if not self.exploration > 0:
            raise DomainError("exploration multiplier must be positive")
        if not self.oracle_tol > 0:
            raise DomainError("oracle_tol must be positive")
        if int(self.recompute_period) != self.recompute_period or self.recompute_period < 1:
            raise DomainError("recompute_period must be a positive integer")

    @property
    def label(self) -> str:
        return self.name or self.kind

    @property
    def has_optimality_guarantee(self) -> bool:
        return 1.0 <= self.alpha <= math.e / 2

    def resolve_B(self, K: int) -> float:
        return default_B(self.alpha, K) if self.B == "auto" else float(self.B)


@dataclass(frozen=True)
class CoState:
    active: tuple[int, ...]

    def __post_init__(self):
        if not self.active:
            raise DomainError("the active set of CO can never be empty")


# -- rule functions ----------------------------------------------------------


def _least_pulled(counts) -> int:
    return min(range(len(counts)), key=counts.__getitem__)


def _argmax_first(values) -> int:
    best = 0
    for a in range(1, len(values)):
        if values[a] > values[best]:
            best = a
    return best


def forced_arm(state: EmpiricalState, exploration: float = 1.0) -> int | None:
    """Least-pulled arm if some N_a < exploration * sqrt(t), else None."""
    floor = exploration * math.sqrt(state.t)
    if min(state.counts) < floor:
        return _least_pulled(state.counts)
    return None


def _weights(props) -> np.ndarray:
    return props.w if isinstance(props, OptimalProportions) else np.asarray(props, dtype=float)


def ctas_select_arm(state: EmpiricalState, cfg: PolicyConfig, props) -> int:
    """Forced exploration, else the arm with the largest cost deficit J w_a - c_hat_a N_a."""
    state.require_all_pulled()
    arm = forced_arm(state, cfg.exploration)
    if arm is not None:
        return arm
    w = _weights(props)
    J, mc, n = state.J, state.mean_cost, state.counts
    return _argmax_first([J * w[a] - mc[a] * n[a] for a in range(state.K)])


def tas_select_arm(state: EmpiricalState, cfg: PolicyConfig, props) -> int:
    """CTAS with unit costs: ``props`` come from the oracle fed c = 1 and the deficit is t w_a - N_a."""
    state.require_all_pulled()
    arm = forced_arm(state, cfg.exploration)
    if arm is not None:
        return arm
    w = _weights(props)
    t, n = state.t, state.counts
    return _argmax_first([t * w[a] - n[a] for a in range(state.K)])


def ctas_should_stop(state: EmpiricalState, cfg: PolicyConfig, delta: float,
                     family: RewardFamily) -> bool:
    B = cfg.resolve_B(state.K)
    return chernoff_stat(state, family) > threshold(state.t, delta, cfg.alpha, B)


def co_select_arm(state: EmpiricalState, co_state: CoState) -> int:
    """argmin over the active set of sqrt(c_hat_a) N_a, using empirical costs."""
    active = co_state.active
    if len(active) == 1:
        return active[0]
    mc, n = state.mean_cost, state.counts
    return min(active, key=lambda a: (math.sqrt(mc[a]) * n[a], a))


def co_eliminate(state: EmpiricalState, co_state: CoState, cfg: PolicyConfig, delta: float,
                 family: RewardFamily) -> CoState:
    """Drop active arms below the empirical leader whose GLR against it clears the threshold.

    The leader is taken over all arms. If that would empty the active set (the
    leader was eliminated earlier and every survivor now clears the bar), the
    survivor with the highest empirical mean is kept.
    """
    leader = state.empirical_best()
    level = threshold(state.t, delta, cfg.alpha, cfg.resolve_B(state.K))
    mr = state.mean_reward
    keep = tuple(
        a for a in co_state.active
        if a == leader or not (mr[a] < mr[leader] and pairwise_glr(state, leader, a, family) > level)
    )
    if not keep:
        keep = (max(co_state.active, key=lambda a: (mr[a], -a)),)
    if keep == co_state.active:
        return co_state
    return CoState(keep)


def decide(state: EmpiricalState, co_state: CoState | None = None) -> int:
    """Empirical argmax, restricted to the active set for CO."""
    mr = state.mean_reward
    if co_state is None:
        return state.empirical_best()
    if len(co_state.active) == 1:
        return co_state.active[0]
    return max(co_state.active, key=lambda a: (mr[a], -a))


def uniform_select_arm(state: EmpiricalState) -> int:
    return state.t % state.K


# -- stateful policies driven by the engine --------------------------------------


class NotStoppedError(RuntimeError):
    pass


class Policy:
    """Owns per-trajectory policy state. One instance per trajectory."""

    def __init__(self, cfg: PolicyConfig, family: RewardFamily, K: int):
        self.cfg = cfg
        self.family = family
        self.K = K
        self.B = cfg.resolve_B(K)
        self.stopped = False

    def select(self, state: EmpiricalState) -> int:
        raise NotImplementedError

    def should_stop(self, state: EmpiricalState, delta: float) -> bool:
        z = chernoff_stat(state, self.family)
        self.stopped = z > threshold(state.t, delta, self.cfg.alpha, self.B)
        return self.stopped

    def decide(self, state: EmpiricalState, censored: bool = False) -> int:
        if not (self.stopped or censored):
            raise NotStoppedError("decide() called before the stopping rule fired")
        return decide(state)


class TrackingPolicy(Policy):
    """CTAS (cost-aware) or TAS (unit-cost) tracking of plug-in proportions."""

    def __init__(self, cfg, family, K):
        super().__init__(cfg, family, K)
        self.unit_cost = cfg.kind == TAS
        self._props = None
        self._age = 0
        self.oracle_calls = 0

    def _plug_in(self, state):
        if self._props is not None and self._age < self.cfg.recompute_period:
            self._age += 1
            return self._props
        means = [self.family.clamp(m) for m in state.mean_reward]
        costs = [1.0] * self.K if self.unit_cost else state.mean_cost
        self.oracle_calls += 1
        try:
            self._props = solve_proportions(self.family, means, costs, self.cfg.oracle_tol)
        except DegenerateInstanceError:
            self._props = None
        self._age = 1
        return self._props

    def select(self, state):
        arm = forced_arm(state, self.cfg.exploration)
        if arm is not None:
            return arm
        props = self._plug_in(state)
        if props is None:
            # tie at the top of the empirical means: nothing to track yet
            return _least_pulled(state.counts)
        if self.unit_cost:
            return tas_select_arm(state, self.cfg, props)
        return ctas_select_arm(state, self.cfg, props)


class ChernoffOverlap(Policy):
    def __init__(self, cfg, family, K):
        super().__init__(cfg, family, K)
        self.co_state = CoState(tuple(range(K)))
        self.eliminated_at: dict[int, int] = {}

    def select(self, state):
        return co_select_arm(state, self.co_state)

    def should_stop(self, state, delta):
        before = self.co_state.active
        self.co_state = co_eliminate(state, self.co_state, self.cfg, delta, self.family)
        for a in before:
            if a not in self.co_state.active:
                self.eliminated_at[a] = state.t
        self.stopped = len(self.co_state.active) <= 1
        return self.stopped

    def decide(self, state, censored=False):
        if not (self.stopped or censored):
            raise NotStoppedError("decide() called before the active set shrank to one arm")
        return decide(state, self.co_state)


class UniformPolicy(Policy):
    def select(self, state):
        return uniform_select_arm(state)


def make_policy(cfg: PolicyConfig, family: RewardFamily, K: int) -> Policy:
    if cfg.kind in (CTAS, TAS):
        return TrackingPolicy(cfg, family, K)
    if cfg.kind == CO:
        return ChernoffOverlap(cfg, family, K)
    return UniformPolicy(cfg, family, K)
