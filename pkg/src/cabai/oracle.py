"""Optimal cost proportions w* and the complexity constant T*.

The sup-inf problem behind the lower bound reduces to a one-dimensional
balancing condition. With the best arm relabeled to index 0 and

    g_a(x) = d(mu_0, m_a(x)) + x d(mu_a, m_a(x)),   m_a(x) = (mu_0 + x mu_a) / (1 + x),

the optimum has every g_a(x_a*) equal to a common value y*, which is the
root of

    F(y) = sum_a c_a d(mu_0, m_a) / (c_0 d(mu_a, m_a)) = 1,   m_a = m_a(g_a^{-1}(y)).

Then ``w_a = c_a x_a / (c_0 + sum_b c_b x_b)`` with ``x_0 = 1``. Both the
outer root and every inner inverse are found by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .exp_family import BanditInstance, DomainError, RewardFamily, _kl, binary_kl

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200
BRACKET_EPS = 1e-12
MIN_GAP = 1e-8

# kernel status codes
_OK, _NO_CONVERGENCE, _BAD_BRACKET = 0, 1, 2


class OracleError(RuntimeError):
    pass


class DegenerateInstanceError(OracleError):
    """The best arm is not separated from the runner-up."""


class ConvergenceError(OracleError):
    def __init__(self, message, bracket=None):
        super().__init__(message if bracket is None else f"{message}; bracket={bracket}")
        self.bracket = bracket


@dataclass(frozen=True)
class OptimalProportions:
    w: np.ndarray
    pull_fractions: np.ndarray
    y_star: float
    t_star: float
    best_arm: int
    x: np.ndarray  # pull-rate ratios relative to the best arm (x[best] == 1)


# -- numba kernels ---------------------------------------------------------


@njit(cache=True)
def _g(code, sigma, mu1, mua, x):
    m = (mu1 + x * mua) / (1.0 + x)
    return _kl(code, sigma, mu1, m) + x * _kl(code, sigma, mua, m)


@njit(cache=True)
def _g_inv(code, sigma, mu1, mua, y, tol, max_iter):
    if y <= 0.0:
        return 0.0, _OK
    lo, glo = 0.0, 0.0
    hi = 1.0
    ghi = _g(code, sigma, mu1, mua, hi)
    n = 0
    while ghi < y:
        lo, glo = hi, ghi
        hi *= 2.0
        ghi = _g(code, sigma, mu1, mua, hi)
        n += 1
        if n > max_iter:
            return hi, _BAD_BRACKET
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if (hi - lo <= tol and ghi - glo <= tol) or mid <= lo or mid >= hi:
            return mid, _OK
        gm = _g(code, sigma, mu1, mua, mid)
        if gm < y:
            lo, glo = mid, gm
        else:
            hi, ghi = mid, gm
    return 0.5 * (lo + hi), _NO_CONVERGENCE


@njit(cache=True)
def _big_f(code, sigma, mu1, mus, c1, cs, y, tol, max_iter):
    total = 0.0
    status = _OK
    for i in range(mus.shape[0]):
        x, st = _g_inv(code, sigma, mu1, mus[i], y, tol, max_iter)
        if st != _OK:
            status = st
        m = (mu1 + x * mus[i]) / (1.0 + x)
        den = _kl(code, sigma, mus[i], m)
        if den <= 0.0:
            return np.inf, status
        total += cs[i] * _kl(code, sigma, mu1, m) / (c1 * den)
    return total, status


@njit(cache=True)
def _objective(code, sigma, mu1, mus, c1, cs, w1, ws):
    # min_a (w1/c1 + wa/ca) I_alpha(mu1, mu_a), alpha = (w1/c1) / (w1/c1 + wa/ca)
    best = np.inf
    u1 = w1 / c1
    for i in range(mus.shape[0]):
        ua = ws[i] / cs[i]
        tot = u1 + ua
        if tot <= 0.0:
            return 0.0
        alpha = u1 / tot
        m = alpha * mu1 + (1.0 - alpha) * mus[i]
        val = tot * (alpha * _kl(code, sigma, mu1, m) + (1.0 - alpha) * _kl(code, sigma, mus[i], m))
        if val < best:
            best = val
    return best


@njit(cache=True)
def _solve(code, sigma, mu1, mus, c1, cs, tol, max_iter):
    n = mus.shape[0]
    dmin = np.inf
    for i in range(n):
        d = _kl(code, sigma, mu1, mus[i])
        if d < dmin:
            dmin = d
    lo = BRACKET_EPS * dmin
    hi = (1.0 - BRACKET_EPS) * dmin
    xs = np.zeros(n)
    flo, _ = _big_f(code, sigma, mu1, mus, c1, cs, lo, tol, max_iter)
    fhi, _ = _big_f(code, sigma, mu1, mus, c1, cs, hi, tol, max_iter)
    if not (flo < 1.0 < fhi):
        return 0.0, xs, _BAD_BRACKET, lo, hi
    ytol = tol * min(1.0, dmin)
    status = _NO_CONVERGENCE
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= ytol or mid <= lo or mid >= hi:
            status = _OK
            break
        f, st = _big_f(code, sigma, mu1, mus, c1, cs, mid, tol, max_iter)
        if st == _BAD_BRACKET:
            return mid, xs, st, lo, hi
        if f < 1.0:
            lo = mid
        else:
            hi = mid
    y = 0.5 * (lo + hi)
    for i in range(n):
        x, st = _g_inv(code, sigma, mu1, mus[i], y, tol, max_iter)
        if st != _OK:
            return y, xs, st, lo, hi
        xs[i] = x
    return y, xs, status, lo, hi


# -- public API ------------------------------------------------------------


def i_alpha(alpha: float, mu1: float, mu2: float, family: RewardFamily) -> float:
    """Jensen-Shannon style divergence alpha d(mu1, m) + (1-alpha) d(mu2, m)."""
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    mu1, mu2 = family.check_mean(mu1), family.check_mean(mu2)
    m = alpha * mu1 + (1.0 - alpha) * mu2
    code, s = family.code, family.sigma
    return float(alpha * _kl(code, s, mu1, m) + (1.0 - alpha) * _kl(code, s, mu2, m))


def _check_pair(mu1, mu_a, family):
    mu1, mu_a = family.check_mean(mu1), family.check_mean(mu_a)
    if not mu1 > mu_a:
        raise DomainError(f"need mu1 > mu_a, got {mu1} <= {mu_a}")
    return mu1, mu_a


def g_fn(x: float, mu1: float, mu_a: float, family: RewardFamily) -> float:
    mu1, mu_a = _check_pair(mu1, mu_a, family)
    if x < 0:
        raise DomainError("x must be nonnegative")
    return float(_g(family.code, family.sigma, mu1, mu_a, float(x)))


def g_inverse(y: float, mu1: float, mu_a: float, family: RewardFamily,
              tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> float:
    """Solve g_a(x) = y for x >= 0 by bisection after doubling the upper bracket."""
    mu1, mu_a = _check_pair(mu1, mu_a, family)
    dmax = _kl(family.code, family.sigma, mu1, mu_a)
    if not 0.0 <= y < dmax:
        raise DomainError(f"y must lie in [0, d(mu1, mu_a)) = [0, {dmax}), got {y}")
    x, status = _g_inv(family.code, family.sigma, mu1, mu_a, float(y), tol, max_iter)
    if status != _OK:
        raise ConvergenceError(f"g_inverse failed for y={y}")
    return float(x)


def _relabel(means, costs):
    """Put the best arm first; the rest keep their relative order."""
    means = np.asarray(means, dtype=float)
    costs = np.asarray(costs, dtype=float)
    best = int(np.argmax(means))
    others = np.array([a for a in range(means.size) if a != best], dtype=np.int64)
    gap = means[best] - means[others].max()
    if gap < MIN_GAP:
        raise DegenerateInstanceError(f"best-arm gap {gap:.3g} is below {MIN_GAP}")
    return best, others, means, costs


def big_f(y: float, instance: BanditInstance, tol: float = DEFAULT_TOL,
          max_iter: int = DEFAULT_MAX_ITER) -> float:
    fam = instance.family
    best, others, means, costs = _relabel(instance.means, instance.cost_means)
    mu1 = means[best]
    ymax = min(_kl(fam.code, fam.sigma, mu1, means[a]) for a in others)
    if not 0.0 <= y < ymax:
        raise DomainError(f"y must lie in [0, {ymax}), got {y}")
    f, status = _big_f(fam.code, fam.sigma, mu1, means[others], costs[best], costs[others],
                       float(y), tol, max_iter)
    if status != _OK:
        raise ConvergenceError(f"F({y}) failed to converge")
    return float(f)


def solve_proportions(family: RewardFamily, means, costs, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER) -> OptimalProportions:
    """Oracle on raw mean/cost vectors (used for plug-in estimates).

    Means are taken as given; callers with empirical means clamp them first.
    """
    best, others, means, costs = _relabel(means, costs)
    code, sigma = family.code, family.sigma
    mu1, c1 = means[best], costs[best]
    mus, cs = means[others], costs[others]
    y, xs, status, lo, hi = _solve(code, sigma, mu1, mus, c1, cs, tol, max_iter)
    if status == _BAD_BRACKET:
        raise ConvergenceError("F(y) - 1 does not change sign on the bracket", (lo, hi))
    if status != _OK:
        raise ConvergenceError(f"no convergence after {max_iter} bisection steps", (lo, hi))

    x = np.empty(means.size)
    x[best] = 1.0
    x[others] = xs
    cx = costs * x
    w = cx / cx.sum()
    pulls = x / x.sum()
    value = _objective(code, sigma, mu1, mus, c1, cs, w[best], w[others])
    return OptimalProportions(w=w, pull_fractions=pulls, y_star=float(y),
                              t_star=float(1.0 / value), best_arm=best, x=x)


def compute_proportions(instance: BanditInstance, tol: float = DEFAULT_TOL,
                        max_iter: int = DEFAULT_MAX_ITER) -> OptimalProportions:
    return solve_proportions(instance.family, instance.means, instance.cost_means, tol, max_iter)


def cost_weighted_objective(w, family: RewardFamily, means, costs) -> float:
    """inf over alternatives of sum_a (w_a / c_a) d(mu_a, lambda_a), in pairwise form."""
    w = np.asarray(w, dtype=float)
    best, others, means, costs = _relabel(means, costs)
    return float(_objective(family.code, family.sigma, means[best], means[others],
                            costs[best], costs[others], w[best], w[others]))


def t_star_closed_two_arm(mu1: float, mu2: float, c1: float, c2: float, sigma: float = 1.0) -> float:
    """2 sigma^2 (sqrt c1 + sqrt c2)^2 / (mu1 - mu2)^2 for two Gaussian arms."""
    if not mu1 > mu2:
        raise DomainError("need mu1 > mu2")
    return 2.0 * sigma**2 * (math.sqrt(c1) + math.sqrt(c2)) ** 2 / (mu1 - mu2) ** 2


def t_star_closed_symmetric(mu1: float, mu_a: float, c1: float, c_a: float, K: int) -> float:
    """2 (c1 + c_a + K sqrt(c1 c_a) / sqrt(K-1)) / Delta^2 for one best arm and K-1 identical ones.

    This expression equals T* only for K = 2. For K >= 3 it undershoots the
    true value; see ``t_star_exact_symmetric``.
    """
    _check_symmetric(mu1, mu_a, K)
    return 2.0 * (c1 + c_a + K * math.sqrt(c1 * c_a) / math.sqrt(K - 1)) / (mu1 - mu_a) ** 2


def t_star_exact_symmetric(mu1: float, mu_a: float, c1: float, c_a: float, K: int) -> float:
    """T* = 2 (sqrt(c1) + sqrt((K-1) c_a))^2 / Delta^2 for unit-variance Gaussian arms
    with one best arm and K-1 identical suboptimal arms."""
    _check_symmetric(mu1, mu_a, K)
    return 2.0 * (math.sqrt(c1) + math.sqrt((K - 1) * c_a)) ** 2 / (mu1 - mu_a) ** 2


def _check_symmetric(mu1, mu_a, K):
    if K < 2:
        raise DomainError("K must be at least 2")
    if not mu1 > mu_a:
        raise DomainError("need mu1 > mu_a")


def _check_delta(delta):
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")


def lower_bound_cost(instance: BanditInstance, delta: float,
                     props: OptimalProportions | None = None) -> float:
    """Non-asymptotic bound T* d(delta, 1 - delta) on the expected cost of a delta-PAC policy."""
    _check_delta(delta)
    t_star = (props or compute_proportions(instance)).t_star
    return t_star * binary_kl(delta, 1.0 - delta)


def asymptotic_cost(instance: BanditInstance, delta: float,
                    props: OptimalProportions | None = None) -> float:
    """Leading term T* log(1/delta)."""
    _check_delta(delta)
    t_star = (props or compute_proportions(instance)).t_star
    return t_star * math.log(1.0 / delta)
