"""Per-sample clipping and Gaussian noising of carrier gradients."""

from __future__ import annotations

import dataclasses

import numpy as np


@dataclasses.dataclass
class ClipStats:
    norms: np.ndarray
    clipped_fraction: float


def clip_and_noise(per_sample_grads, clip_norm: float, sigma: float, rng,
                   *, add_noise: bool = True):
    """Clip each sample's joint carrier gradient to ``clip_norm`` and sum.

    Noise N(0, clip_norm^2 sigma^2) is added to every coordinate of the sum.
    Standard normals are drawn (layer by layer, dL before dR) whenever
    ``add_noise`` is set, even for sigma = 0, so the generator advances
    identically regardless of sigma.
    """
    if clip_norm <= 0:
        raise ValueError("clip norm must be positive")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng = np.random.default_rng(rng)
    n = per_sample_grads[0][0].shape[0] if per_sample_grads else 0
    sq = np.zeros(n)
    for dL, dR in per_sample_grads:
        sq += (dL.reshape(n, -1) ** 2).sum(axis=1) + (dR.reshape(n, -1) ** 2).sum(axis=1)
    norms = np.sqrt(sq)
    scale = 1.0 / np.maximum(1.0, norms / clip_norm)
    noisy = []
    for dL, dR in per_sample_grads:
        parts = []
        for g in (dL, dR):
            total = (g * scale.reshape((n,) + (1,) * (g.ndim - 1))).sum(axis=0)
            if add_noise:
                total = total + (clip_norm * sigma) * rng.standard_normal(total.shape)
            parts.append(total)
        noisy.append(tuple(parts))
    clipped = float((norms > clip_norm).mean()) if n else 0.0
    return noisy, ClipStats(norms, clipped)
