"""Synthetic classification data and a plain-text matrix dataset format."""

from __future__ import annotations

import os
import tempfile

import numpy as np


def make_separable(n: int, d: int, n_classes: int = 2, *, separation: float = 4.0,
                   seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian class clusters with unit covariance and well separated means.

    Class means are ``separation / 2`` times random orthonormal directions, so
    any two means are ``separation / sqrt(2)`` apart.
    """
    if n < 1 or d < n_classes - 1 or n_classes < 2:
        raise ValueError("need n >= 1, n_classes >= 2 and d >= n_classes - 1")
    rng = np.random.default_rng(seed)
    directions, _ = np.linalg.qr(rng.standard_normal((d, n_classes)))
    means = 0.5 * separation * directions.T[:n_classes]
    y = rng.integers(0, n_classes, size=n)
    X = means[y] + rng.standard_normal((n, d))
    return X, y


def save_dataset(path, X: np.ndarray, y: np.ndarray) -> None:
    """Write the header ``n d labels`` then one sample per line, label last."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n, d = X.shape
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(f"{n} {d} labels\n")
            for row, label in zip(X, y):
                fh.write(" ".join(repr(float(v)) for v in row) + f" {label}\n")
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def load_dataset(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a file written by :func:`save_dataset`."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[2] != "labels":
            raise ValueError(f"bad dataset header: {' '.join(header)!r}")
        n, d = int(header[0]), int(header[1])
        body = np.loadtxt(fh, ndmin=2) if n else np.empty((0, d + 1))
    if body.shape != (n, d + 1):
        raise ValueError(f"expected {n} rows of {d + 1} values, got {body.shape}")
    labels = body[:, -1]
    if not np.all(labels == np.round(labels)):
        raise ValueError("labels must be integers")
    return body[:, :-1], labels.astype(int)
