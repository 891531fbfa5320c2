"""Edgeworth accountant for m-fold compositions of the subsampled Gaussian.

Per-step cumulants of the privacy loss are obtained from Gauss-Hermite
quadrature, scaled by ``m`` (cumulants add over iid sums) and fed into an
Edgeworth series for the CDFs of the summed losses under P and Q. Those
CDFs plug into

    delta(eps) = 1 - F_Y(eps) - e^eps * (1 - F_X(eps))

which is then inverted numerically for epsilon(delta).
"""

from __future__ import annotations

import dataclasses
import functools
import math
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize, special

from .errors import DegenerateDistribution, NoFiniteEpsilon, QuadratureFailure
from .mechanism import Hypothesis, MechanismSpec, pllr_inverse, pllr_log_ratio
from .results import AccountantResult, Method

BERRY_ESSEEN_CONSTANT = 0.56
DEFAULT_ORDER = 2
MIN_NODES = 64
MAX_NODES = 1024
QUADRATURE_RTOL = 1e-10
EPSILON_CAP = 1e4
EPSILON_TOL = 1e-6

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_HALF_PI = math.sqrt(0.5 * math.pi)


@functools.lru_cache(maxsize=None)
def _hermite_rule(n: int):
    nodes, weights = special.roots_hermitenorm(n)
    weights = weights * _INV_SQRT_2PI
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _components(spec: MechanismSpec, hypothesis: Hypothesis):
    # (weight, mean) pairs of the Gaussian components of the sampling law.
    if hypothesis is Hypothesis.UNDER_P or spec.q == 0.0:
        return [(1.0, 0.0)]
    if spec.q == 1.0:
        return [(1.0, 1.0)]
    return [(1.0 - spec.q, 0.0), (spec.q, 1.0)]


def _gh_expect(spec, hypothesis, func, n):
    total = 0.0
    nodes, weights = _hermite_rule(n)
    for w, mu in _components(spec, hypothesis):
        x = pllr_log_ratio(mu + spec.sigma * nodes, spec)
        total = total + w * (weights[:, None] * func(np.asarray(x))).sum(axis=0)
    return total


def pllr_expectation(spec: MechanismSpec, hypothesis: Hypothesis, func,
                     *, rtol: float = QUADRATURE_RTOL,
                     min_nodes: int = MIN_NODES, max_nodes: int = MAX_NODES):
    """E[func(X)] by Gauss-Hermite quadrature with node doubling.

    ``func`` maps an array of losses to an array of shape (n_nodes, k); the
    result has shape (k,). Raises QuadratureFailure if doubling the node count
    still changes some entry by more than ``rtol`` (relative) at ``max_nodes``.
    """
    n = min_nodes
    prev = _gh_expect(spec, hypothesis, func, n)
    while n < max_nodes:
        n *= 2
        cur = _gh_expect(spec, hypothesis, func, n)
        scale = np.maximum(np.abs(cur), np.finfo(float).tiny)
        if np.all(np.abs(cur - prev) <= rtol * scale):
            return cur
        prev = cur
    raise QuadratureFailure(
        f"quadrature did not settle to {rtol:g} with {max_nodes} nodes "
        f"(q={spec.q}, sigma={spec.sigma})")


def compute_moments(spec: MechanismSpec, hypothesis: Hypothesis, max_order: int,
                    **quad_kw) -> np.ndarray:
    """Raw moments E[X^j], j = 1..max_order, of the single-step privacy loss."""
    if max_order < 2:
        raise ValueError("max_order must be at least 2")
    if spec.q == 0.0:
        return np.zeros(max_order)
    powers = np.arange(1, max_order + 1)
    return pllr_expectation(spec, hypothesis, lambda x: x[:, None] ** powers, **quad_kw)


@dataclasses.dataclass(frozen=True)
class CumulantVector:
    cumulants: tuple[float, ...]
    abs_third_central: Optional[float] = None
    steps: int = 1

    def __post_init__(self):
        if len(self.cumulants) < 2:
            raise ValueError("need at least two cumulants")
        if not self.cumulants[1] > 0:
            raise DegenerateDistribution("second cumulant must be positive")
        if self.steps < 1:
            raise ValueError("steps must be positive")

    @property
    def mean(self) -> float:
        return self.cumulants[0]

    @property
    def variance(self) -> float:
        return self.cumulants[1]


def moments_to_cumulants(moments: Sequence[float], *,
                         abs_third_central: Optional[float] = None) -> CumulantVector:
    """Standard raw-moment to cumulant recursion."""
    mom = [float(v) for v in moments]
    if len(mom) < 2:
        raise ValueError("need at least two moments")
    kappa: list[float] = []
    for n in range(1, len(mom) + 1):
        acc = mom[n - 1]
        for k in range(1, n):
            acc -= math.comb(n - 1, k - 1) * kappa[k - 1] * mom[n - k - 1]
        kappa.append(acc)
    if not kappa[1] > 0:
        raise DegenerateDistribution(
            f"second cumulant {kappa[1]:.3g} is not positive; the loss is constant")
    return CumulantVector(tuple(kappa), abs_third_central, 1)


def abs_third_central_moment(spec: MechanismSpec, hypothesis: Hypothesis,
                             center: float) -> float:
    """E|X - center|^3 by adaptive quadrature, split where X crosses ``center``."""
    total = 0.0
    for w, mu in _components(spec, hypothesis):
        def integrand(z, mu=mu):
            x = float(pllr_log_ratio(mu + spec.sigma * z, spec))
            return abs(x - center) ** 3 * _INV_SQRT_2PI * math.exp(-0.5 * z * z)

        if center > spec.support_lower:
            z_star = (float(pllr_inverse(center, spec)) - mu) / spec.sigma
            pieces = [(-np.inf, z_star), (z_star, np.inf)]
        else:
            pieces = [(-np.inf, np.inf)]
        for lo, hi in pieces:
            val, _ = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-10, limit=200)
            total += w * val
    return total


@functools.lru_cache(maxsize=4096)
def _step_cumulants(q: float, sigma: float, hypothesis: Hypothesis,
                    n_cumulants: int, with_abs_third: bool) -> CumulantVector:
    spec = MechanismSpec(q, sigma)
    moments = compute_moments(spec, hypothesis, max(n_cumulants, 3))
    cv = moments_to_cumulants(moments)
    rho = abs_third_central_moment(spec, hypothesis, cv.mean) if with_abs_third else None
    return CumulantVector(cv.cumulants[:n_cumulants], rho, 1)


def step_cumulants(spec: MechanismSpec, hypothesis: Hypothesis,
                   n_cumulants: int = DEFAULT_ORDER + 2, *,
                   with_abs_third: bool = True) -> CumulantVector:
    """Per-step cumulants kappa_1..kappa_n plus E|X - kappa_1|^3."""
    return _step_cumulants(spec.q, spec.sigma, hypothesis, n_cumulants, with_abs_third)


def compose_cumulants(cv: CumulantVector, m: int) -> CumulantVector:
    if cv.steps != 1:
        raise ValueError("compose a per-step cumulant vector")
    if m < 1:
        raise ValueError("m must be at least 1")
    rho = None if cv.abs_third_central is None else m * cv.abs_third_central
    return CumulantVector(tuple(m * k for k in cv.cumulants), rho, m)


def _series_terms(z, cv: CumulantVector, order: int):
    if order not in (0, 1, 2):
        raise ValueError("Edgeworth order must be 0, 1 or 2")
    if len(cv.cumulants) < order + 2:
        raise ValueError(f"order {order} needs {order + 2} cumulants")
    k2 = cv.cumulants[1]
    corr = np.zeros_like(z)
    if order >= 1:
        lam3 = cv.cumulants[2] / k2 ** 1.5
        corr = corr + lam3 / 6.0 * (z * z - 1.0)
    if order >= 2:
        lam4 = cv.cumulants[3] / k2 ** 2
        z3 = z ** 3
        corr = corr + lam4 / 24.0 * (z3 - 3.0 * z) + lam3 * lam3 / 72.0 * (
            z ** 5 - 10.0 * z3 + 15.0 * z)
    return corr


def edgeworth_cdf(x, cv: CumulantVector, order: int = DEFAULT_ORDER):
    """Edgeworth approximation of P(S <= x) for the sum described by ``cv``.

    Clamped to [0, 1]; the raw series can leave that range and is not
    monotone in general.
    """
    z = (np.asarray(x, dtype=float) - cv.mean) / math.sqrt(cv.variance)
    raw = special.ndtr(z) - _INV_SQRT_2PI * np.exp(-0.5 * z * z) * _series_terms(z, cv, order)
    return np.clip(raw, 0.0, 1.0)[()]


def _log_sf(x, cv: CumulantVector, order: int):
    # log of the unclamped-above series P(S > x), -inf where the series is <= 0.
    # For z > 0 the tail is written as phi(z) * (Mills ratio + correction) so
    # that neither factor underflows far out in the tail.
    z = (np.asarray(x, dtype=float) - cv.mean) / math.sqrt(cv.variance)
    corr = _series_terms(z, cv, order)
    log_phi = -0.5 * z * z - _LOG_SQRT_2PI
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        bracket = _SQRT_HALF_PI * special.erfcx(np.maximum(z, 0.0) / math.sqrt(2.0)) + corr
        upper = log_phi + np.log(np.where(bracket > 0, bracket, 0.0))
        lower = np.log(np.maximum(special.ndtr(-z) + np.exp(log_phi) * corr, 0.0))
    return np.minimum(np.where(z > 0, upper, lower), 0.0)


def edgeworth_sf(x, cv: CumulantVector, order: int = DEFAULT_ORDER):
    """1 - edgeworth_cdf, evaluated directly so small tails keep precision."""
    return np.exp(_log_sf(x, cv, order))[()]


def berry_esseen_envelope(cv: CumulantVector) -> float:
    """Uniform bound C0 * rho / (s^3 sqrt(m)) on |F_m - Phi| for the normalized sum."""
    if cv.abs_third_central is None:
        raise ValueError("cumulant vector carries no absolute third moment")
    m = cv.steps
    rho = cv.abs_third_central / m
    s = math.sqrt(cv.variance / m)
    return BERRY_ESSEEN_CONSTANT * rho / (s ** 3 * math.sqrt(m))


@dataclasses.dataclass(frozen=True)
class _Composed:
    x: CumulantVector
    y: CumulantVector


def _composed(spec: MechanismSpec, m: int, order: int, with_abs_third: bool) -> _Composed:
    n = max(order + 2, 3)
    return _Composed(*(
        compose_cumulants(step_cumulants(spec, hyp, n, with_abs_third=with_abs_third), m)
        for hyp in (Hypothesis.UNDER_P, Hypothesis.UNDER_Q)))


def _delta(composed: _Composed, epsilon, order: int):
    eps = np.asarray(epsilon, dtype=float)
    sf_y = np.exp(_log_sf(eps, composed.y, order))
    with np.errstate(over="ignore"):
        scaled_sf_x = np.exp(eps + _log_sf(eps, composed.x, order))
    return np.clip(sf_y - scaled_sf_x, 0.0, 1.0)


def delta_of_epsilon_ew(spec: MechanismSpec, m: int, epsilon: float,
                        order: int = DEFAULT_ORDER, *,
                        berry_esseen: bool = False) -> AccountantResult:
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if spec.q == 0.0:
        return AccountantResult(epsilon, 0.0, Method.EDGEWORTH, m,
                                0.0 if berry_esseen else None)
    composed = _composed(spec, m, order, berry_esseen)
    delta = float(_delta(composed, epsilon, order))
    envelope = None
    if berry_esseen:
        envelope = max(berry_esseen_envelope(composed.x), berry_esseen_envelope(composed.y))
    return AccountantResult(epsilon, delta, Method.EDGEWORTH, m, envelope,
                            {"order": order})


def _invert(fn, delta: float) -> float:
    # Largest root of fn(eps) = delta on [0, cap], fn possibly non-monotone.
    if fn(0.0) <= delta:
        return 0.0
    hi = 1.0
    while fn(hi) > delta:
        if hi >= EPSILON_CAP:
            raise NoFiniteEpsilon(f"delta stays above {delta:g} up to epsilon {EPSILON_CAP:g}")
        hi = min(2.0 * hi, EPSILON_CAP)
    grid = np.linspace(0.0, hi, 513)
    vals = fn(grid)
    above = np.nonzero(vals > delta)[0]
    lo = grid[above[-1]]
    hi = grid[above[-1] + 1]
    while hi - lo >= EPSILON_TOL:
        mid = 0.5 * (lo + hi)
        if fn(mid) > delta:
            lo = mid
        else:
            hi = mid
    # Polish inside the final bracket so delta(eps) reproduces the target.
    root = optimize.brentq(lambda e: float(fn(e)) - delta, lo, hi, xtol=1e-15, rtol=1e-15)
    while fn(root) > delta:
        root = np.nextafter(root, np.inf)
    return float(root)


def epsilon_of_delta_ew(spec: MechanismSpec, m: int, delta: float,
                        order: int = DEFAULT_ORDER, *,
                        berry_esseen: bool = False) -> AccountantResult:
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if spec.q == 0.0:
        return AccountantResult(0.0, 0.0, Method.EDGEWORTH, m,
                                0.0 if berry_esseen else None)
    composed = _composed(spec, m, order, berry_esseen)
    eps = _invert(lambda e: _delta(composed, e, order), delta)
    envelope = None
    if berry_esseen:
        envelope = max(berry_esseen_envelope(composed.x), berry_esseen_envelope(composed.y))
    return AccountantResult(eps, float(_delta(composed, eps, order)), Method.EDGEWORTH, m,
                            envelope, {"order": order})
