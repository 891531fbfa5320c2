"""Privacy-loss log-likelihood ratios of the Poisson-subsampled Gaussian.

The dominating pair is P = N(0, sigma^2) against the mixture
Q = (1 - q) N(0, sigma^2) + q N(1, sigma^2). A draw ``t`` from either
distribution maps to the privacy loss

    X(t) = log((1 - q) + q * exp((2 t - 1) / (2 sigma^2)))

which is what every accountant in this package works with. Sensitivity is
fixed at 1; the clipping norm only scales the training noise.
"""

from __future__ import annotations

import dataclasses
import enum
import math

import numpy as np
from scipy import special

from .errors import DomainError

# Above this exponent log1p(q * expm1(a)) is replaced by its asymptotic form.
_LARGE_EXPONENT = 30.0


class Hypothesis(enum.Enum):
    UNDER_P = "P"
    UNDER_Q = "Q"


@dataclasses.dataclass(frozen=True)
class MechanismSpec:
    """One step of DP-SGD: sampling rate, noise multiplier and clip norm."""

    q: float
    sigma: float
    clip_norm: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise DomainError(f"sampling rate q must lie in [0, 1], got {self.q}")
        if not self.sigma > 0.0:
            raise DomainError(f"noise multiplier must be positive, got {self.sigma}")
        if not self.clip_norm > 0.0:
            raise DomainError(f"clip norm must be positive, got {self.clip_norm}")

    @classmethod
    def from_counts(cls, batch_size: int, n_samples: int, sigma: float,
                    clip_norm: float = 1.0) -> "MechanismSpec":
        if not 1 <= batch_size <= n_samples:
            raise DomainError("need 1 <= batch_size <= n_samples")
        return cls(q=batch_size / n_samples, sigma=sigma, clip_norm=clip_norm)

    @property
    def support_lower(self) -> float:
        """Infimum of the privacy loss, log(1 - q)."""
        if self.q >= 1.0:
            return -math.inf
        return math.log1p(-self.q)


@dataclasses.dataclass(frozen=True)
class PllrSample:
    value: float
    hypothesis: Hypothesis


def _exponent(t, sigma):
    return (2.0 * t - 1.0) / (2.0 * sigma * sigma)


def pllr_log_ratio(t, spec: MechanismSpec):
    """Privacy loss log(dQ/dP) at output ``t``. Vectorised over ``t``."""
    t = np.asarray(t, dtype=float)
    q = spec.q
    if q == 0.0:
        return np.zeros_like(t)[()]
    a = _exponent(t, spec.sigma)
    if q == 1.0:
        return a[()]
    a = np.atleast_1d(a)
    u = q * np.expm1(np.minimum(a, _LARGE_EXPONENT))
    out = np.log1p(u)
    # Near the lower edge of the support 1 + u cancels; both terms of
    # (1 - q) + q e^a are positive there and 1 - q is exact since q > 1/2.
    low = u < -0.5
    if np.any(low):
        out[low] = np.log((1.0 - q) + q * np.exp(a[low]))
    big = a > _LARGE_EXPONENT
    if np.any(big):
        ab = a[big]
        out[big] = math.log(q) + ab + np.log1p((1.0 - q) / q * np.exp(-ab))
    return out.reshape(t.shape)[()]


def _inverse_unchecked(x, spec: MechanismSpec):
    # NaN wherever x is outside (log(1 - q), inf).
    x = np.asarray(x, dtype=float)
    q, s2 = spec.q, spec.sigma * spec.sigma
    if q == 1.0:
        return (s2 * x + 0.5)[()]
    log1mq = math.log1p(-q)
    with np.errstate(divide="ignore", invalid="ignore"):
        near = x <= 1.0
        # e^x - (1 - q) = (1 - q) * expm1(x - log(1 - q)) keeps precision near
        # the support edge; the far branch avoids overflow of e^x.
        lo = log1mq + np.log(np.expm1(np.where(near, x, 0.0) - log1mq))
        hi = x + np.log1p(-(1.0 - q) * np.exp(-np.where(near, 1.0, x)))
        log_excess = np.where(near, lo, hi)
        t = s2 * (log_excess - math.log(q)) + 0.5
    t = np.where(x > log1mq, t, np.nan)
    return t[()]


def pllr_inverse(x, spec: MechanismSpec):
    """Output ``t`` whose privacy loss equals ``x``; inverse of :func:`pllr_log_ratio`."""
    if spec.q == 0.0:
        raise DomainError("privacy loss is identically zero when q = 0")
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > spec.support_lower)):
        raise DomainError(
            f"privacy loss must exceed log(1 - q) = {spec.support_lower:.6g}")
    return _inverse_unchecked(xa, spec)


def _tail_pair(x, spec: MechanismSpec, upper: bool):
    x = np.asarray(x, dtype=float)
    if spec.q == 0.0:
        below = (x >= 0.0).astype(float)
        return (1.0 - below if upper else below), None
    t = _inverse_unchecked(x, spec)
    inside = ~np.isnan(t)
    t = np.where(inside, t, 0.0)
    sign = -1.0 if upper else 1.0
    p_part = special.ndtr(sign * t / spec.sigma)
    q_part = special.ndtr(sign * (t - 1.0) / spec.sigma)
    return (p_part, q_part), inside


def pllr_cdf(x, spec: MechanismSpec, hypothesis: Hypothesis = Hypothesis.UNDER_P):
    """Exact CDF of the single-step privacy loss under P or Q."""
    parts, inside = _tail_pair(x, spec, upper=False)
    if inside is None:
        return parts[()]
    p_part, q_part = parts
    if hypothesis is Hypothesis.UNDER_P:
        cdf = p_part
    else:
        cdf = (1.0 - spec.q) * p_part + spec.q * q_part
    return np.where(inside, cdf, 0.0)[()]


def pllr_sf(x, spec: MechanismSpec, hypothesis: Hypothesis = Hypothesis.UNDER_P):
    """Survival function 1 - CDF, computed without cancellation in the tail."""
    parts, inside = _tail_pair(x, spec, upper=True)
    if inside is None:
        return parts[()]
    p_part, q_part = parts
    if hypothesis is Hypothesis.UNDER_P:
        sf = p_part
    else:
        sf = (1.0 - spec.q) * p_part + spec.q * q_part
    return np.where(inside, sf, 1.0)[()]


def draw_outputs(spec: MechanismSpec, hypothesis: Hypothesis, size: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Mechanism outputs t ~ P or t ~ Q.

    Normals are drawn before the component-selection uniforms; the compiled
    Monte Carlo kernel consumes the generator in the same order.
    """
    t = spec.sigma * rng.standard_normal(size)
    if hypothesis is Hypothesis.UNDER_Q:
        shifted = rng.random(size) < spec.q
        t = t + shifted
    return t


class PllrSampler:
    """Seeded stream of privacy-loss draws. Not shareable across threads."""

    def __init__(self, spec: MechanismSpec, hypothesis: Hypothesis, seed: int):
        self.spec = spec
        self.hypothesis = hypothesis
        self._rng = np.random.default_rng(seed)

    def draw(self, size: int) -> np.ndarray:
        t = draw_outputs(self.spec, self.hypothesis, size, self._rng)
        return np.asarray(pllr_log_ratio(t, self.spec), dtype=float)


def sample_pllr(spec: MechanismSpec, hypothesis: Hypothesis, rng_seed: int) -> PllrSample:
    value = PllrSampler(spec, hypothesis, rng_seed).draw(1)[0]
    return PllrSample(float(value), hypothesis)


def sample_pllrs(spec: MechanismSpec, hypothesis: Hypothesis, n: int,
                 rng_seed: int) -> np.ndarray:
    return PllrSampler(spec, hypothesis, rng_seed).draw(n)


def analytic_gaussian_delta(sigma: float, epsilon: float) -> float:
    """Exact delta(epsilon) of one unsubsampled Gaussian mechanism."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    a = 0.5 / sigma
    first = special.ndtr(a - epsilon * sigma)
    second = math.exp(epsilon + special.log_ndtr(-a - epsilon * sigma))
    return float(min(max(first - second, 0.0), 1.0))
