"""Numpy implementation of the Monte Carlo kernel (fallback backend)."""

import numpy as np

from .mechanism import MechanismSpec, pllr_log_ratio


def pllr_partial_sums(bit_generator, q, sigma, m, checkpoints, under_q, out, chunk):
    rng = np.random.Generator(bit_generator)
    spec = MechanismSpec(q, sigma)
    n = out.shape[0]
    start = 0
    while start < n:
        rows = min(chunk, n - start)
        t = sigma * rng.standard_normal(rows * m)
        if under_q:
            t = t + (rng.random(rows * m) < q)
        x = np.asarray(pllr_log_ratio(t, spec)).reshape(rows, m)
        s = np.zeros(rows)
        comp = np.zeros(rows)
        c = 0
        for j in range(m):
            y = x[:, j] - comp
            tmp = s + y
            comp = (tmp - s) - y
            s = tmp
            if c < len(checkpoints) and j + 1 == checkpoints[c]:
                out[start:start + rows, c] = s
                c += 1
        start += rows
