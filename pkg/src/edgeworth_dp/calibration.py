"""Noise-multiplier calibration by step reduction.

Starting from a large sigma, sigma is reduced by ``r`` while the accountant's
epsilon stays within the target. On overshoot the step is divided by ten, and
the search stops once the step falls below ``min_step``.
"""

from __future__ import annotations

import functools
import logging
import math
from typing import Callable

from .edgeworth import DEFAULT_ORDER, epsilon_of_delta_ew
from .errors import AccountingError, NoFiniteEpsilon, TargetUnreachable
from .mechanism import MechanismSpec
from .prv import GridConfig, epsilon_of_delta_prv
from .rdp import DEFAULT_ORDERS, rdp_epsilon

logger = logging.getLogger(__name__)

# (q, sigma, m, delta) -> epsilon
Evaluator = Callable[[float, float, int, float], float]

SIGMA_INIT = 10.0
INITIAL_STEP = 0.5
MIN_STEP = 1e-4
STEP_SHRINK = 10.0


@functools.lru_cache(maxsize=1 << 16)
def _edgeworth_eps(q, sigma, m, delta, order):
    return epsilon_of_delta_ew(MechanismSpec(q, sigma), m, delta, order).epsilon


@functools.lru_cache(maxsize=1 << 16)
def _rdp_eps(q, sigma, m, delta, orders):
    return rdp_epsilon(q, sigma, m, delta, orders).epsilon


@functools.lru_cache(maxsize=1 << 12)
def _prv_eps(q, sigma, m, delta, config):
    return epsilon_of_delta_prv(MechanismSpec(q, sigma), m, delta, config).epsilon


def edgeworth_evaluator(order: int = DEFAULT_ORDER) -> Evaluator:
    return functools.partial(_ew_call, order=order)


def _ew_call(q, sigma, m, delta, order):
    return _edgeworth_eps(q, sigma, m, delta, order)


def rdp_evaluator(orders=DEFAULT_ORDERS) -> Evaluator:
    orders = tuple(int(a) for a in orders)
    return lambda q, sigma, m, delta: _rdp_eps(q, sigma, m, delta, orders)


def prv_evaluator(config: GridConfig | None = None) -> Evaluator:
    config = config or GridConfig()
    return lambda q, sigma, m, delta: _prv_eps(q, sigma, m, delta, config)


def make_evaluator(name: str, *, order: int = DEFAULT_ORDER,
                   grid: GridConfig | None = None) -> Evaluator:
    name = name.lower()
    if name in ("ew", "edgeworth"):
        return edgeworth_evaluator(order)
    if name == "rdp":
        return rdp_evaluator()
    if name == "prv":
        return prv_evaluator(grid)
    raise ValueError(f"unknown accountant {name!r}")


def _epsilon_or_inf(evaluator: Evaluator, q, sigma, m, delta) -> float:
    try:
        return evaluator(q, sigma, m, delta)
    except NoFiniteEpsilon:
        return math.inf


def calibrate_sigma(evaluator: Evaluator, epsilon_target: float, delta: float,
                    q: float, m: int, *, sigma_init: float = SIGMA_INIT,
                    step: float = INITIAL_STEP, min_step: float = MIN_STEP) -> float:
    """Smallest noise multiplier on the reduction path with epsilon <= target.

    The returned sigma satisfies eps(sigma) <= epsilon_target < eps(sigma - s),
    where s is the last step tried (ten times the final step).
    """
    if epsilon_target <= 0:
        raise ValueError("epsilon target must be positive")
    eps = _epsilon_or_inf(evaluator, q, sigma_init, m, delta)
    if eps > epsilon_target:
        raise TargetUnreachable(
            f"epsilon {eps:.4g} at sigma={sigma_init:g} already exceeds {epsilon_target:g}")
    sigma = sigma_init
    while step >= min_step:
        candidate = round(sigma - step, 12)
        if candidate > 0:
            try:
                ok = _epsilon_or_inf(evaluator, q, candidate, m, delta) <= epsilon_target
            except AccountingError as exc:
                logger.debug("treating sigma=%g as overshoot: %s", candidate, exc)
                ok = False
        else:
            ok = False
        if ok:
            sigma = candidate
        else:
            step /= STEP_SHRINK
    return sigma
