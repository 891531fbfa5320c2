"""RDP accountant for the Poisson-subsampled Gaussian (integer orders)."""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np
from scipy import special

from .errors import OrderTooLarge
from .results import AccountantResult, Method

DEFAULT_ORDERS: tuple[int, ...] = tuple(range(2, 65)) + (128, 256)


@dataclasses.dataclass(frozen=True)
class RdpCurve:
    orders: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.orders) != len(self.values):
            raise ValueError("orders and values differ in length")
        if any(a < 2 for a in self.orders):
            raise ValueError("RDP orders must be integers >= 2")
        if any(v < 0 for v in self.values):
            raise ValueError("RDP values must be nonnegative")


def rdp_sampled_gaussian(q: float, sigma: float, alpha: int) -> float:
    """Renyi divergence of order ``alpha`` between Q and P for one step.

    For q < 1 this is (1/(alpha-1)) log sum_j C(alpha, j) (1-q)^(alpha-j) q^j
    exp(j (j-1) / (2 sigma^2)), summed in log space.
    """
    if int(alpha) != alpha or alpha < 2:
        raise ValueError("alpha must be an integer >= 2")
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    alpha = int(alpha)
    if q == 1.0:
        return alpha / (2.0 * sigma * sigma)
    j = np.arange(alpha + 1, dtype=float)
    log_binom = special.gammaln(alpha + 1) - special.gammaln(j + 1) - special.gammaln(alpha - j + 1)
    with np.errstate(over="ignore"):
        terms = (log_binom + (alpha - j) * math.log1p(-q) + j * math.log(q)
                 + j * (j - 1) / (2.0 * sigma * sigma))
        total = special.logsumexp(terms)
    if not np.isfinite(total):
        raise OrderTooLarge(f"order {alpha} overflows at sigma={sigma}")
    # Exact value is >= 0; round-off can make it slightly negative for tiny q.
    return max(float(total) / (alpha - 1), 0.0)


def rdp_curve(q: float, sigma: float, orders: Sequence[int] = DEFAULT_ORDERS) -> RdpCurve:
    orders = tuple(int(a) for a in orders)
    return RdpCurve(orders, tuple(rdp_sampled_gaussian(q, sigma, a) for a in orders))


def rdp_epsilon(q: float, sigma: float, m: int, delta: float,
                orders: Sequence[int] = DEFAULT_ORDERS) -> AccountantResult:
    """epsilon = min over orders of m * RDP(alpha) + log(1/delta) / (alpha - 1)."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if q == 0.0:
        return AccountantResult(0.0, delta, Method.RDP, m, details={"order": None})
    best_eps, best_order = math.inf, None
    for alpha in orders:
        try:
            rdp = rdp_sampled_gaussian(q, sigma, alpha)
        except OrderTooLarge:
            continue
        eps = m * rdp + math.log(1.0 / delta) / (alpha - 1)
        if eps < best_eps:
            best_eps, best_order = eps, int(alpha)
    return AccountantResult(best_eps, delta, Method.RDP, m, details={"order": best_order})


def rdp_delta(q: float, sigma: float, m: int, epsilon: float,
              orders: Sequence[int] = DEFAULT_ORDERS) -> AccountantResult:
    """delta(epsilon) implied by the same conversion rule, minimized over orders.

    Solving epsilon = m * RDP(alpha) + log(1/delta) / (alpha - 1) for delta
    gives exp(-(alpha - 1) (epsilon - m * RDP(alpha))), capped at 1.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if q == 0.0:
        return AccountantResult(epsilon, 0.0, Method.RDP, m, details={"order": None})
    best_log, best_order = 0.0, None
    for alpha in orders:
        try:
            rdp = rdp_sampled_gaussian(q, sigma, alpha)
        except OrderTooLarge:
            continue
        log_delta = -(alpha - 1) * (epsilon - m * rdp)
        if log_delta < best_log:
            best_log, best_order = log_delta, int(alpha)
    return AccountantResult(epsilon, math.exp(best_log), Method.RDP, m,
                            details={"order": best_order})
