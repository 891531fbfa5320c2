"""Low-rank gradient carriers: orthonormal factors and gradient reconstruction."""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from ..errors import RankDeficientWarning

ORTHO_TOL = 1e-10


@dataclasses.dataclass(frozen=True, eq=False)
class CarrierPair:
    """Left carrier ``L`` (d_out x r) and right carrier ``R`` (r x d_in)."""

    L: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        if self.L.ndim != 2 or self.R.ndim != 2:
            raise ValueError("carriers must be matrices")
        if self.L.shape[1] != self.R.shape[0]:
            raise ValueError(f"rank mismatch: L {self.L.shape}, R {self.R.shape}")

    @property
    def rank(self) -> int:
        return self.L.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.L.shape[0], self.R.shape[1]


def gram_schmidt(M: np.ndarray, tol: float = ORTHO_TOL) -> np.ndarray:
    """Orthonormal basis for the column span of ``M`` (modified Gram-Schmidt).

    A second orthogonalization pass runs for any column whose overlap with the
    basis exceeds ``tol`` after the first. Columns that become numerically zero
    are dropped, so the result may have fewer columns than ``M``.
    """
    M = np.asarray(M, dtype=float)
    d, k = M.shape
    basis = np.empty((d, 0))
    for j in range(k):
        v = M[:, j].copy()
        ref = np.linalg.norm(v)
        if ref == 0.0:
            continue
        for _ in range(2):
            for i in range(basis.shape[1]):
                v -= (basis[:, i] @ v) * basis[:, i]
            norm = np.linalg.norm(v)
            if norm <= tol * ref:
                break
            if basis.shape[1] == 0 or np.max(np.abs(basis.T @ v)) <= tol * norm:
                break
        if norm <= tol * ref:
            continue
        basis = np.column_stack([basis, v / norm])
    return basis


def decompose_carriers(historical_update: np.ndarray, rank: int, *,
                       n_iter: int = 2, rng=None) -> CarrierPair:
    """Leading left/right subspaces of ``historical_update`` by power iteration.

    Returns a reduced-rank pair (with a RankDeficientWarning) when the update
    has numerical rank below ``rank``.
    """
    update = np.asarray(historical_update, dtype=float)
    d_out, d_in = update.shape
    if not 1 <= rank <= min(d_out, d_in):
        raise ValueError(f"rank must lie in [1, {min(d_out, d_in)}]")
    rng = np.random.default_rng(rng)
    right = rng.standard_normal((d_in, rank))
    left = np.empty((d_out, 0))
    for _ in range(n_iter):
        left = gram_schmidt(update @ right)
        right = update.T @ left
    right = gram_schmidt(right)
    k = min(left.shape[1], right.shape[1])
    if k < rank:
        warnings.warn(f"historical update has numerical rank {k} < {rank}",
                      RankDeficientWarning, stacklevel=2)
    return CarrierPair(left[:, :k], right[:, :k].T)


def random_carriers(shape: tuple[int, int], rank: int, rng) -> CarrierPair:
    d_out, d_in = shape
    left = gram_schmidt(rng.standard_normal((d_out, rank)))
    right = gram_schmidt(rng.standard_normal((d_in, rank)))
    return CarrierPair(left, right.T)


def reconstruct_weight_grad(carriers: CarrierPair, noisy_dL: np.ndarray,
                            noisy_dR: np.ndarray) -> np.ndarray:
    """Weight gradient (dL) R + L (dR) - L L^T (dL) R from carrier gradients."""
    L, R = carriers.L, carriers.R
    if noisy_dL.shape != L.shape or noisy_dR.shape != R.shape:
        raise ValueError(
            f"carrier gradient shapes {noisy_dL.shape}, {noisy_dR.shape} do not match "
            f"carriers {L.shape}, {R.shape}")
    dl_r = noisy_dL @ R
    return dl_r + L @ noisy_dR - L @ (L.T @ dl_r)
