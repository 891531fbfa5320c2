"""PRV accountant: discretized privacy-loss distributions composed by FFT.

Each hypothesis gets its own grid of cell masses, computed from exact CDF
differences of the single-step loss. The m-fold sum is obtained by raising
the real FFT of the grid to the m-th power on a circular domain centred on
the composed mean and wide enough that no mass wraps around.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy import fft, special

from .edgeworth import compute_moments
from .errors import BoundsTooTight, NoFiniteEpsilon, WraparoundDetected
from .mechanism import Hypothesis, MechanismSpec, _inverse_unchecked, pllr_log_ratio
from .results import AccountantResult, Method

MAX_TRUNCATED_MASS = 1e-10
WRAP_TOLERANCE = 1e-9


@dataclasses.dataclass(frozen=True)
class GridConfig:
    """Discretization settings.

    ``tail_mass`` sets the automatic upper bound: the grid extends until at
    most this much single-step mass lies above it. ``lower``/``upper`` override
    the automatic bounds.
    """

    h: float = 5e-5
    sd_multiplier: float = 12.0
    tail_mass: float = 1e-14
    lower: float | None = None
    upper: float | None = None


@dataclasses.dataclass(frozen=True, eq=False)
class PrvGrid:
    """Probability masses at points ``lower + i * h``.

    ``roundoff`` is the total magnitude of negative masses left by the FFT,
    a proxy for its numerical noise floor.
    """

    h: float
    lower: float
    pmf: np.ndarray
    truncated_mass: float
    hypothesis: Hypothesis
    steps: int = 1
    roundoff: float = 0.0

    def __post_init__(self):
        n = len(self.pmf)
        if n & (n - 1):
            raise ValueError("grid length must be a power of two")
        if self.h <= 0:
            raise ValueError("spacing must be positive")

    @property
    def upper(self) -> float:
        return self.lower + (len(self.pmf) - 1) * self.h

    @property
    def points(self) -> np.ndarray:
        return self.lower + self.h * np.arange(len(self.pmf))

    def mean(self) -> float:
        return float(np.dot(self.points, self.pmf) / self.pmf.sum())

    def std(self) -> float:
        x = self.points - self.mean()
        return math.sqrt(float(np.dot(x * x, self.pmf) / self.pmf.sum()))


def _next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def _mean_sd(spec: MechanismSpec, hypothesis: Hypothesis):
    m1, m2 = compute_moments(spec, hypothesis, 2)
    return m1, math.sqrt(max(m2 - m1 * m1, 0.0))


def _single_step_bounds(spec: MechanismSpec, config: GridConfig):
    z_tail = -special.ndtri(config.tail_mass)
    mean, sd = _mean_sd(spec, Hypothesis.UNDER_Q)
    upper = max(mean + config.sd_multiplier * sd,
                float(pllr_log_ratio(1.0 + spec.sigma * z_tail, spec)))
    if spec.q < 1.0:
        lower = spec.support_lower
    else:
        mean, sd = _mean_sd(spec, Hypothesis.UNDER_P)
        lower = min(mean - config.sd_multiplier * sd,
                    float(pllr_log_ratio(-spec.sigma * z_tail, spec)))
    if config.lower is not None:
        lower = config.lower
    if config.upper is not None:
        upper = config.upper
    return lower, upper


def _discretize_both(spec: MechanismSpec, config: GridConfig):
    h = config.h
    lower, upper = _single_step_bounds(spec, config)
    k_lo = math.floor(lower / h + 0.5)
    k_hi = math.ceil(upper / h - 0.5)
    n_cells = k_hi - k_lo + 1
    edges = (np.arange(k_lo, k_hi + 2) - 0.5) * h
    # One inversion serves both hypotheses.
    t = _inverse_unchecked(edges, spec)
    inside = ~np.isnan(t)
    t = np.where(inside, t, -np.inf)
    z_p = t / spec.sigma
    z_q = (t - 1.0) / spec.sigma
    grids = {}
    for hyp in (Hypothesis.UNDER_P, Hypothesis.UNDER_Q):
        if hyp is Hypothesis.UNDER_P:
            cdf, sf = special.ndtr(z_p), special.ndtr(-z_p)
        else:
            cdf = (1.0 - spec.q) * special.ndtr(z_p) + spec.q * special.ndtr(z_q)
            sf = (1.0 - spec.q) * special.ndtr(-z_p) + spec.q * special.ndtr(-z_q)
        # Left half from CDF differences, right half from survival differences.
        split = min(int(np.searchsorted(cdf, 0.5)), n_cells)
        masses = np.empty(n_cells)
        masses[:split] = np.diff(cdf[:split + 1])
        masses[split:] = -np.diff(sf[split:])
        masses = np.maximum(masses, 0.0)
        truncated = float(cdf[0] + sf[-1])
        if truncated > MAX_TRUNCATED_MASS:
            raise BoundsTooTight(
                f"bounds [{lower:.6g}, {upper:.6g}] drop {truncated:.3g} of the mass")
        pmf = np.zeros(_next_pow2(n_cells))
        pmf[:n_cells] = masses
        grids[hyp] = PrvGrid(h, k_lo * h, pmf, truncated, hyp)
    return grids


def prv_discretize(spec: MechanismSpec, hypothesis: Hypothesis,
                   config: GridConfig | None = None) -> PrvGrid:
    """Single-step grid; mass of cell [x - h/2, x + h/2] is placed at x."""
    config = config or GridConfig()
    if spec.q == 0.0:
        return PrvGrid(config.h, 0.0, np.array([1.0]), 0.0, hypothesis)
    return _discretize_both(spec, config)[hypothesis]


def _power(spectrum: np.ndarray, m: int) -> np.ndarray:
    # Repeated squaring; cheaper and no less accurate than complex pow.
    result = None
    base = spectrum
    while m:
        if m & 1:
            result = base.copy() if result is None else result * base
        m >>= 1
        if m:
            base = base * base
    return result


def prv_compose(grid: PrvGrid, m: int, sd_multiplier: float = 12.0) -> PrvGrid:
    """m-fold self-convolution via the m-th power of the FFT.

    The circular domain is centred on m times the single-step mean and spans
    ``sd_multiplier`` composed standard deviations or the single-step support,
    whichever is wider, on each side.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if grid.steps != 1:
        raise ValueError("compose a single-step grid")
    if m == 1:
        return grid
    h = grid.h
    nz = np.nonzero(grid.pmf)[0]
    first, last = int(nz[0]), int(nz[-1])
    mu, sd = grid.mean(), grid.std()
    c = round(mu / h) - round(grid.lower / h)  # index of the cell nearest the mean
    span = max(last - c, c - first)
    half = max(sd_multiplier * math.sqrt(m) * sd / h, span) + sd_multiplier * sd / h + 2
    half = min(half, m * span + 2)
    n = _next_pow2(int(2 * half) + 1)
    buf = np.zeros(n)
    buf[(np.arange(first, last + 1) - c) % n] = grid.pmf[first:last + 1]
    composed = fft.irfft(_power(fft.rfft(buf), m), n)
    composed = np.roll(composed, n // 2)  # index n/2 is the composed centre
    edge = max(1, n // 64)
    edge_mass = float(np.abs(composed[:edge]).sum() + np.abs(composed[-edge:]).sum())
    if edge_mass > WRAP_TOLERANCE:
        raise WraparoundDetected(f"{edge_mass:.3g} mass within the outer edge cells")
    roundoff = float(-composed[composed < 0].sum())
    lower = m * (grid.lower + c * h) - (n // 2) * h
    return PrvGrid(h, lower, composed, m * grid.truncated_mass, grid.hypothesis, m, roundoff)


def _tail_above(grid: PrvGrid, eps):
    # P(S > eps) for each eps, using strict inequality at grid points.
    suffix = np.concatenate([np.cumsum(grid.pmf[::-1])[::-1], [0.0]])
    k = np.floor((np.asarray(eps, dtype=float) - grid.lower) / grid.h + 1e-9).astype(np.int64) + 1
    k = np.clip(k, 0, len(grid.pmf))
    return suffix[k]


def prv_delta(grid_x: PrvGrid, grid_y: PrvGrid, epsilon: float) -> AccountantResult:
    """delta(eps) from the composed grids with a truncation/discretization envelope."""
    if grid_x.steps != grid_y.steps or grid_x.h != grid_y.h:
        raise ValueError("grids must share spacing and composition count")
    m = grid_x.steps
    slack = 0.5 * m * grid_x.h  # every summand moved by at most h/2
    e = np.array([epsilon - slack, epsilon, epsilon + slack])
    sy, sx = _tail_above(grid_y, e), _tail_above(grid_x, e)
    growth = math.exp(epsilon)
    delta = sy[1] - growth * sx[1]
    upper = sy[0] - growth * sx[2]
    lower = sy[2] - growth * sx[0]
    envelope = max(upper - delta, delta - lower, 0.0)
    envelope += grid_y.truncated_mass + (1.0 + growth) * (grid_x.roundoff + grid_y.roundoff)
    if grid_x.truncated_mass + grid_y.truncated_mass == 0 and m == 1 and slack == 0:
        envelope = 0.0
    return AccountantResult(epsilon, float(min(max(delta, 0.0), 1.0)), Method.PRV, m,
                            float(envelope))


def composed_grids(spec: MechanismSpec, m: int, config: GridConfig | None = None):
    config = config or GridConfig()
    single = _discretize_both(spec, config)
    return tuple(prv_compose(single[hyp], m, config.sd_multiplier)
                 for hyp in (Hypothesis.UNDER_P, Hypothesis.UNDER_Q))


def delta_of_epsilon_prv(spec: MechanismSpec, m: int, epsilon: float,
                         config: GridConfig | None = None) -> AccountantResult:
    if spec.q == 0.0:
        return AccountantResult(epsilon, 0.0, Method.PRV, m, 0.0)
    return prv_delta(*composed_grids(spec, m, config), epsilon)


def _suffix(grid: PrvGrid) -> np.ndarray:
    return np.concatenate([np.cumsum(grid.pmf[::-1])[::-1], [0.0]])


def _epsilon_from_grids(grid_x: PrvGrid, grid_y: PrvGrid, delta: float) -> float:
    # Between consecutive lattice points both tails are constant, so
    # delta(eps) = A - e^eps B on each interval and can be solved exactly.
    h = grid_x.h
    kx0, ky0 = round(grid_x.lower / h), round(grid_y.lower / h)
    k_top = max(kx0 + len(grid_x.pmf), ky0 + len(grid_y.pmf))
    k = np.arange(0, max(k_top, 0) + 1)
    sx, sy = _suffix(grid_x), _suffix(grid_y)
    # Tail strictly above lattice point k starts at index k + 1.
    b = sx[np.clip(k + 1 - kx0, 0, len(sx) - 1)]
    a = sy[np.clip(k + 1 - ky0, 0, len(sy) - 1)]
    starts = k * h
    ends = starts + h
    with np.errstate(over="ignore", invalid="ignore"):
        ok_start = a - np.exp(starts) * b <= delta
    if ok_start[0]:
        return 0.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        solved = np.log((a - delta) / b)
    inside = (b > 0) & (a > delta) & (solved >= starts) & (solved < ends)
    candidates = np.where(ok_start, starts, np.where(inside, solved, np.inf))
    eps = float(candidates.min())
    if not np.isfinite(eps):
        raise NoFiniteEpsilon("delta target not reached on the composed grid")
    return eps


def epsilon_of_delta_prv(spec: MechanismSpec, m: int, delta: float,
                         config: GridConfig | None = None) -> AccountantResult:
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if spec.q == 0.0:
        return AccountantResult(0.0, 0.0, Method.PRV, m, 0.0)
    gx, gy = composed_grids(spec, m, config)
    eps = _epsilon_from_grids(gx, gy, delta)
    res = prv_delta(gx, gy, eps)
    return dataclasses.replace(res, delta=delta)
