"""Toy models with analytic per-sample gradients (linear or one hidden layer)."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .carriers import CarrierPair

LOSSES = ("softmax", "logistic", "squared")


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


class ToyModel:
    """Fully connected network, no biases, tanh hidden units.

    ``layer_sizes`` lists widths from input to output, so ``[d, k]`` is a
    linear model and ``[d, h, k]`` has one hidden layer. Weight ``l`` has shape
    (layer_sizes[l + 1], layer_sizes[l]).
    """

    def __init__(self, layer_sizes: Sequence[int], loss: str = "softmax",
                 weights: Sequence[np.ndarray] | None = None, rng=None,
                 init_scale: float = 0.1):
        if loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if len(layer_sizes) not in (2, 3):
            raise ValueError("only linear and one-hidden-layer models are supported")
        if loss == "logistic" and layer_sizes[-1] != 1:
            raise ValueError("logistic loss needs a single output")
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        self.loss_name = loss
        if weights is None:
            rng = np.random.default_rng(rng)
            weights = [init_scale * rng.standard_normal((o, i)) / np.sqrt(i)
                       for i, o in zip(self.layer_sizes[:-1], self.layer_sizes[1:])]
        self.weights = [np.array(w, dtype=float) for w in weights]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "ToyModel":
        return ToyModel(self.layer_sizes, self.loss_name, [w.copy() for w in self.weights])

    def forward(self, X, weights=None):
        """Layer inputs and output logits."""
        weights = self.weights if weights is None else weights
        inputs = [np.asarray(X, dtype=float)]
        z = inputs[0] @ weights[0].T
        for w in weights[1:]:
            inputs.append(np.tanh(z))
            z = inputs[-1] @ w.T
        return inputs, z

    def _targets(self, y, n):
        y = np.asarray(y)
        if self.loss_name == "squared" and y.ndim == 2:
            return y.astype(float)
        if self.loss_name == "logistic":
            return y.reshape(n, 1).astype(float)
        onehot = np.zeros((n, self.layer_sizes[-1]))
        onehot[np.arange(n), y.astype(int)] = 1.0
        return onehot

    def per_sample_loss(self, X, y, weights=None) -> np.ndarray:
        _, z = self.forward(X, weights)
        t = self._targets(y, z.shape[0])
        if self.loss_name == "softmax":
            return -(t * _log_softmax(z)).sum(axis=1)
        if self.loss_name == "logistic":
            return (np.logaddexp(0.0, z) - t * z)[:, 0]
        return 0.5 * ((z - t) ** 2).sum(axis=1)

    def loss(self, X, y, weights=None) -> float:
        return float(self.per_sample_loss(X, y, weights).mean())

    def backprop(self, X, y, weights=None):
        """Per-layer (inputs, output deltas); sample i's weight gradient is delta_i input_i^T."""
        weights = self.weights if weights is None else weights
        inputs, z = self.forward(X, weights)
        t = self._targets(y, z.shape[0])
        if self.loss_name == "softmax":
            delta = np.exp(_log_softmax(z)) - t
        elif self.loss_name == "logistic":
            delta = 1.0 / (1.0 + np.exp(-z)) - t
        else:
            delta = z - t
        deltas = [delta]
        for l in range(self.n_layers - 1, 0, -1):
            delta = (delta @ weights[l]) * (1.0 - inputs[l] ** 2)
            deltas.append(delta)
        return list(zip(inputs, deltas[::-1]))

    def gradients(self, X, y) -> list[np.ndarray]:
        """Mean (non-private) weight gradients over the batch."""
        n = len(X)
        return [d.T @ a / n for a, d in self.backprop(X, y)]

    def predict(self, X) -> np.ndarray:
        _, z = self.forward(X)
        if self.loss_name == "logistic":
            return (z[:, 0] > 0).astype(int)
        return z.argmax(axis=1)

    def accuracy(self, X, y) -> float:
        return float((self.predict(X) == np.asarray(y)).mean())


def per_sample_carrier_gradients(model: ToyModel, X, y,
                                 carriers: Sequence[CarrierPair]):
    """Per-sample (dL, dR) for every layer, shapes (n, d_out, r) and (n, r, d_in).

    Uses dL_i = delta_i (R a_i)^T and dR_i = (L^T delta_i) a_i^T, so the full
    per-sample weight gradient delta_i a_i^T is never formed.
    """
    if len(carriers) != model.n_layers:
        raise ValueError("need one carrier pair per layer")
    out = []
    for (a, delta), cp in zip(model.backprop(X, y), carriers):
        low_act = a @ cp.R.T          # (n, r): forward through R
        low_delta = delta @ cp.L      # (n, r): backward through L
        dL = delta[:, :, None] * low_act[:, None, :]
        dR = low_delta[:, :, None] * a[:, None, :]
        out.append((dL, dR))
    return out
