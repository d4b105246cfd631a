"""Reward families, cost models and bandit instances.

Rewards come from a one-parameter exponential family parameterized by its
mean (Gaussian with known variance, Bernoulli, Poisson). Costs are bounded
in ``[ell, 1]`` and drawn independently of rewards.

Adding a family means adding a code to ``FAMILY_CODES``, a branch in
``_kl`` and in ``sample_rewards``; the oracle and GLR code only ever go
through ``_kl``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

GAUSSIAN = "gaussian"
BERNOULLI = "bernoulli"
POISSON = "poisson"

FAMILY_CODES = {GAUSSIAN: 0, BERNOULLI: 1, POISSON: 2}

# Empirical means are pushed this far inside the family domain before any KL
# evaluation; d(x, y) is infinite on the boundary.
CLAMP_EPS = 1e-6

DETERMINISTIC = "deterministic"
UNIFORM = "uniform"


class DomainError(ValueError):
    """A mean, probability or parameter lies outside its valid set."""


@njit(cache=True)
def _kl(code, sigma, x, y):
    if code == 0:
        return (x - y) * (x - y) / (2.0 * sigma * sigma)
    if code == 1:
        out = 0.0
        if x > 0.0:
            out += x * math.log(x / y)
        if x < 1.0:
            out += (1.0 - x) * math.log((1.0 - x) / (1.0 - y))
        return max(out, 0.0)
    if x == 0.0:
        return y
    return max(x * math.log(x / y) - x + y, 0.0)


@dataclass(frozen=True)
class RewardFamily:
    kind: str = GAUSSIAN
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in FAMILY_CODES:
            raise DomainError(f"unknown reward family {self.kind!r}")
        if self.kind == GAUSSIAN and not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be positive, got {self.sigma}")

    @property
    def code(self) -> int:
        return FAMILY_CODES[self.kind]

    def is_valid_mean(self, mu: float) -> bool:
        if not math.isfinite(mu):
            return False
        if self.kind == BERNOULLI:
            return 0.0 < mu < 1.0
        if self.kind == POISSON:
            return mu > 0.0
        return True

    def check_mean(self, mu: float) -> float:
        mu = float(mu)
        if not self.is_valid_mean(mu):
            raise DomainError(f"{mu} is not a valid {self.kind} mean")
        return mu

    def clamp(self, mu: float) -> float:
        """Push an empirical mean inside the open domain of the family."""
        if self.kind == BERNOULLI:
            return min(max(mu, CLAMP_EPS), 1.0 - CLAMP_EPS)
        if self.kind == POISSON:
            return max(mu, CLAMP_EPS)
        return mu


@dataclass(frozen=True)
class CostModel:
    """Cost distribution of one arm: a point mass or uniform on ``mean +- half_width``."""

    mean: float
    kind: str = DETERMINISTIC
    half_width: float = 0.0

    def __post_init__(self):
        if self.kind not in (DETERMINISTIC, UNIFORM):
            raise DomainError(f"unknown cost model {self.kind!r}")
        if self.kind == DETERMINISTIC and self.half_width != 0.0:
            raise DomainError("a deterministic cost has no half_width")
        if self.half_width < 0:
            raise DomainError("half_width must be nonnegative")
        lo, hi = self.support
        if not (lo > 0 and hi <= 1.0):
            raise DomainError(f"cost support [{lo}, {hi}] must lie in (0, 1]")

    @property
    def support(self) -> tuple[float, float]:
        return self.mean - self.half_width, self.mean + self.half_width


@dataclass(frozen=True)
class BanditInstance:
    """Ground truth for one cost-aware bandit problem.

    ``ell`` defaults to the smallest lower end of the cost supports.
    """

    family: RewardFamily
    means: tuple[float, ...]
    costs: tuple[CostModel, ...]
    ell: float | None = None
    instance_id: str = field(default="instance", compare=False)

    def __post_init__(self):
        means = tuple(self.family.check_mean(m) for m in self.means)
        costs = tuple(c if isinstance(c, CostModel) else CostModel(float(c)) for c in self.costs)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "costs", costs)
        if len(means) < 2:
            raise DomainError("a bandit instance needs at least two arms")
        if len(costs) != len(means):
            raise DomainError(f"{len(means)} means but {len(costs)} cost models")
        top = max(means)
        if sum(1 for m in means if m == top) > 1:
            raise DomainError("the best arm must be unique")
        ell = min(c.support[0] for c in costs) if self.ell is None else float(self.ell)
        if not ell > 0:
            raise DomainError("ell must be positive")
        for a, c in enumerate(costs):
            lo, hi = c.support
            if lo < ell - 1e-15 or hi > 1.0:
                raise DomainError(f"cost support of arm {a} leaves [{ell}, 1]")
        object.__setattr__(self, "ell", ell)

    @property
    def K(self) -> int:
        return len(self.means)

    @property
    def best_arm(self) -> int:
        return int(np.argmax(self.means))

    @property
    def cost_means(self) -> tuple[float, ...]:
        return tuple(c.mean for c in self.costs)


def kl_div(family: RewardFamily, mu: float, lam: float) -> float:
    """KL divergence d(mu, lam) from nu_mu to nu_lam within ``family``."""
    mu = family.check_mean(mu)
    lam = family.check_mean(lam)
    return float(_kl(family.code, family.sigma, mu, lam))


def binary_kl(p: float, q: float) -> float:
    """Bernoulli KL d(p, q); endpoints allowed for ``p`` only."""
    if not (0.0 <= p <= 1.0 and 0.0 < q < 1.0):
        raise DomainError(f"binary_kl needs p in [0,1], q in (0,1); got {p}, {q}")
    return float(_kl(1, 1.0, p, q))


def sample_rewards(family: RewardFamily, mu: float, rng: np.random.Generator, size: int) -> np.ndarray:
    mu = family.check_mean(mu)
    if family.kind == GAUSSIAN:
        return mu + family.sigma * rng.standard_normal(size)
    if family.kind == BERNOULLI:
        return (rng.random(size) < mu).astype(float)
    # numpy's Poisson sampler is exact (inversion for small means, PTRS above)
    return rng.poisson(mu, size).astype(float)


def sample_reward(family: RewardFamily, mu: float, rng: np.random.Generator) -> float:
    return float(sample_rewards(family, mu, rng, 1)[0])


def sample_costs(model: CostModel, rng: np.random.Generator, size: int) -> np.ndarray:
    if model.kind == DETERMINISTIC:
        return np.full(size, model.mean)
    lo, hi = model.support
    return rng.uniform(lo, hi, size)


def sample_cost(model: CostModel, rng: np.random.Generator) -> float:
    return float(sample_costs(model, rng, 1)[0])
