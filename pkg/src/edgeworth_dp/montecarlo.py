"""Monte Carlo estimates of delta(epsilon) for m-fold compositions.

Samples are processed in fixed-size blocks; block ``b`` draws from its own
PCG64 stream seeded by ``(seed, hypothesis, b)``, so results do not depend on
how blocks are scheduled and repeated runs are bit-identical.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .errors import IntervalUnresolvable
from .mechanism import Hypothesis, MechanismSpec

BLOCK = 1 << 16
MIN_SAMPLES = 10_000
_HYP_CODE = {Hypothesis.UNDER_P: 0, Hypothesis.UNDER_Q: 1}


@dataclasses.dataclass(frozen=True)
class McEstimate:
    delta_hat: float
    stderr: float
    n_samples: int
    seed: int


def _block_generator(seed: int, hypothesis: Hypothesis, block: int) -> np.random.BitGenerator:
    return np.random.PCG64(np.random.SeedSequence([seed, _HYP_CODE[hypothesis], block]))


def _block_sums(spec, hypothesis, checkpoints, seed, block, rows, kernel):
    out = np.empty((rows, len(checkpoints)))
    kernel(_block_generator(seed, hypothesis, block), spec.q, spec.sigma,
           int(checkpoints[-1]), checkpoints, hypothesis is Hypothesis.UNDER_Q,
           out, kernels.CHUNK)
    return out


def iter_partial_sums(spec: MechanismSpec, hypothesis: Hypothesis, checkpoints: Sequence[int],
                      n_samples: int, seed: int, *, kernel=None,
                      workers: int = 1) -> Iterator[np.ndarray]:
    """Yield blocks of shape (rows, len(checkpoints)) of summed losses.

    Column c holds the sum of the first ``checkpoints[c]`` losses, so several
    composition counts share one stream of draws.
    """
    checkpoints = np.asarray(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)
    if checkpoints[0] < 1:
        raise ValueError("composition counts must be positive")
    kernel = kernel or kernels.pllr_partial_sums
    n_blocks = -(-n_samples // BLOCK)
    sizes = [min(BLOCK, n_samples - b * BLOCK) for b in range(n_blocks)]
    if workers <= 1:
        for b, rows in enumerate(sizes):
            yield _block_sums(spec, hypothesis, checkpoints, seed, b, rows, kernel)
        return
    with ThreadPoolExecutor(workers) as pool:
        futures = [pool.submit(_block_sums, spec, hypothesis, checkpoints, seed, b, rows, kernel)
                   for b, rows in enumerate(sizes)]
        for f in futures:
            yield f.result()


def tail_counts(spec: MechanismSpec, hypothesis: Hypothesis, ms: Sequence[int],
                epsilons: Sequence[float], n_samples: int, seed: int, **kw) -> np.ndarray:
    """Integer counts of sums strictly above each epsilon; shape (len(ms), len(epsilons))."""
    ms_sorted = sorted(set(int(m) for m in ms))
    eps = np.asarray(epsilons, dtype=float)
    counts = np.zeros((len(ms_sorted), len(eps)), dtype=np.int64)
    for block in iter_partial_sums(spec, hypothesis, ms_sorted, n_samples, seed, **kw):
        counts += (block[:, :, None] > eps[None, None, :]).sum(axis=0)
    order = [ms_sorted.index(int(m)) for m in ms]
    return counts[order]


def _estimate(count_y, count_x, n, epsilon, seed) -> McEstimate:
    py, px = count_y / n, count_x / n
    growth = math.exp(epsilon)
    delta_hat = py - growth * px
    var = py * (1.0 - py) / n + growth * growth * px * (1.0 - px) / n
    return McEstimate(float(delta_hat), math.sqrt(var), n, seed)


def mc_delta_grid(spec: MechanismSpec, ms: Sequence[int], epsilons: Sequence[float],
                  n_samples: int, seed: int, **kw) -> dict[tuple[int, float], McEstimate]:
    """Estimates for every (m, epsilon) pair from one shared set of draws."""
    if n_samples < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples")
    if spec.q == 0.0:
        return {(int(m), float(e)): McEstimate(0.0, 0.0, n_samples, seed)
                for m in ms for e in epsilons}
    cy = tail_counts(spec, Hypothesis.UNDER_Q, ms, epsilons, n_samples, seed, **kw)
    cx = tail_counts(spec, Hypothesis.UNDER_P, ms, epsilons, n_samples, seed, **kw)
    return {(int(m), float(e)): _estimate(cy[i, j], cx[i, j], n_samples, e, seed)
            for i, m in enumerate(ms) for j, e in enumerate(epsilons)}


def mc_delta(spec: MechanismSpec, m: int, epsilon: float, n_samples: int,
             seed: int, **kw) -> McEstimate:
    if m < 1:
        raise ValueError("m must be at least 1")
    return mc_delta_grid(spec, [m], [epsilon], n_samples, seed, **kw)[(int(m), float(epsilon))]


def _sorted_sums(spec, hypothesis, m, n, seed, **kw):
    blocks = list(iter_partial_sums(spec, hypothesis, [m], n, seed, **kw))
    return np.sort(np.concatenate(blocks)[:, 0])


def mc_epsilon_bracket(spec: MechanismSpec, m: int, delta: float, n_samples: int,
                       seed: int, *, z: float = 3.0, iterations: int = 200,
                       **kw) -> tuple[float, float]:
    """Interval [eps_lo, eps_hi] with delta(eps_lo) >= delta >= delta(eps_hi) at z sigmas."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if delta < 10.0 / n_samples:
        raise IntervalUnresolvable(
            f"delta={delta:g} is below the resolution of {n_samples} samples")
    if spec.q == 0.0:
        return 0.0, 0.0
    ys = _sorted_sums(spec, Hypothesis.UNDER_Q, m, n_samples, seed, **kw)
    xs = _sorted_sums(spec, Hypothesis.UNDER_P, m, n_samples, seed, **kw)
    n = n_samples

    def band(eps):
        cy = n - np.searchsorted(ys, eps, side="right")
        cx = n - np.searchsorted(xs, eps, side="right")
        est = _estimate(cy, cx, n, eps, seed)
        return est.delta_hat - z * est.stderr, est.delta_hat + z * est.stderr

    top = max(float(ys[-1]), 0.0) + 1.0

    def search(pred):
        # Smallest eps in [0, top] where pred holds, assuming monotonicity.
        if pred(0.0):
            return 0.0
        lo, hi = 0.0, top
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if pred(mid):
                hi = mid
            else:
                lo = mid
        return hi

    eps_hi = search(lambda e: band(e)[1] <= delta)
    eps_lo = search(lambda e: band(e)[0] < delta)
    return min(eps_lo, eps_hi), eps_hi
