"""Differentially private training with low-rank gradient carriers."""

from __future__ import annotations

import collections
import dataclasses
import warnings
from typing import Sequence

import numpy as np

from ..calibration import calibrate_sigma, make_evaluator
from ..errors import DomainError, RankDeficientWarning
from ..results import AccountantResult, Method
from .carriers import CarrierPair, decompose_carriers, random_carriers, reconstruct_weight_grad
from .model import ToyModel, per_sample_carrier_gradients
from .privatize import clip_and_noise

LEARNING_RATE = 0.1
_METHODS = {"ew": Method.EDGEWORTH, "edgeworth": Method.EDGEWORTH,
            "rdp": Method.RDP, "prv": Method.PRV}


@dataclasses.dataclass(frozen=True)
class TrainRunConfig:
    """Inputs of a private training run.

    Attributes:
        n_samples: Dataset size N.
        batch_size: Expected Poisson batch size B.
        steps: Number of noisy updates m.
        clip_norm: Per-sample clipping bound C.
        epsilon_target: Privacy target epsilon.
        delta: Privacy target delta.
        rank: Carrier rank r.
        seed: Root seed for every random stream of the run.
        history_lag: Steps between the weights whose difference defines the
            historical update used to pick carriers.
        hidden: Width of the tanh hidden layer, or None for a linear model.
        loss: One of ``softmax``, ``logistic``, ``squared``.
        learning_rate: Fixed SGD step size.
        power_iterations: Power iterations per carrier decomposition.
    """

    n_samples: int
    batch_size: int
    steps: int
    clip_norm: float = 1.0
    epsilon_target: float = 8.0
    delta: float = 1e-5
    rank: int = 1
    seed: int = 0
    history_lag: int = 1
    hidden: int | None = None
    loss: str = "softmax"
    learning_rate: float = LEARNING_RATE
    power_iterations: int = 2

    def __post_init__(self):
        if self.n_samples < 2:
            raise DomainError("training needs at least 2 samples")
        if not 1 <= self.batch_size <= self.n_samples:
            raise DomainError("batch size must lie in [1, N]")
        if self.steps < 1:
            raise DomainError("steps must be at least 1")
        if self.clip_norm <= 0:
            raise DomainError("clip norm must be positive")
        if self.epsilon_target <= 0 or not 0 < self.delta < 1:
            raise DomainError("need epsilon > 0 and delta in (0, 1)")
        if self.rank < 1 or self.history_lag < 1:
            raise DomainError("rank and history lag must be positive")

    @property
    def q(self) -> float:
        return self.batch_size / self.n_samples


@dataclasses.dataclass
class PrivateModel:
    """Trained model, per-step update norms and the privacy actually spent."""

    model: ToyModel
    sigma: float
    spent: AccountantResult | None
    update_norms: list = dataclasses.field(default_factory=list)
    clipped_fraction: list = dataclasses.field(default_factory=list)
    batch_sizes: list = dataclasses.field(default_factory=list)

    @property
    def weights(self) -> list[np.ndarray]:
        return self.model.weights


def spent_budget(config: TrainRunConfig, sigma: float, accountant: str = "ew",
                 order: int = 2) -> AccountantResult:
    """Privacy spent by ``config.steps`` noisy steps at noise multiplier ``sigma``."""
    evaluator = make_evaluator(accountant, order=order)
    eps = evaluator(config.q, sigma, config.steps, config.delta)
    return AccountantResult(epsilon=eps, delta=config.delta, method=_METHODS[accountant],
                            m=config.steps, details={"sigma": sigma, "q": config.q})


def _carriers(history, rank, rng, n_iter) -> list[CarrierPair]:
    pairs = []
    for old, new in zip(history[0], history[-1]):
        update = new - old
        r = min(rank, *update.shape)
        if np.linalg.norm(update) <= 1e-12 * max(1.0, np.linalg.norm(new)):
            pairs.append(random_carriers(update.shape, r, rng))
        else:
            # Low-rank history (e.g. two-class softmax) just yields fewer carriers.
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RankDeficientWarning)
                pairs.append(decompose_carriers(update, r, n_iter=n_iter, rng=rng))
    return pairs


def train_private(config: TrainRunConfig, X, y, accountant: str = "ew", *,
                  sigma_override: float | None = None, add_noise: bool = True,
                  order: int = 2) -> PrivateModel:
    """Run Poisson-sampled noisy SGD through low-rank gradient carriers.

    The noise multiplier is calibrated before any data is touched, so the
    reported budget depends only on the config. ``sigma_override`` skips
    calibration; with ``sigma_override=0`` no budget is reported. Setting
    ``add_noise=False`` gives plain clipped SGD on the same random streams.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if len(X) != config.n_samples or len(y) != len(X):
        raise DomainError(f"config expects {config.n_samples} samples, data has {len(X)}")
    if sigma_override is None:
        evaluator = make_evaluator(accountant, order=order)
        sigma = calibrate_sigma(evaluator, config.epsilon_target, config.delta,
                                config.q, config.steps)
    else:
        if sigma_override < 0:
            raise DomainError("sigma override must be nonnegative")
        sigma = float(sigma_override)
    spent = None
    if sigma > 0 and add_noise:
        spent = spent_budget(config, sigma, accountant, order)

    init_seq, sample_seq, noise_seq, carrier_seq, public_seq = \
        np.random.SeedSequence(config.seed).spawn(5)
    n_out = int(y.max()) + 1 if config.loss == "softmax" else 1
    if config.loss == "squared":
        n_out = y.shape[1] if y.ndim == 2 else int(y.max()) + 1
    sizes: Sequence[int] = [X.shape[1], n_out] if config.hidden is None \
        else [X.shape[1], config.hidden, n_out]
    model = ToyModel(sizes, config.loss, rng=np.random.default_rng(init_seq))
    sample_rng = np.random.default_rng(sample_seq)
    noise_rng = np.random.default_rng(noise_seq)
    carrier_rng = np.random.default_rng(carrier_seq)

    history = collections.deque([[w.copy() for w in model.weights]],
                                maxlen=config.history_lag + 1)
    # One public step on random inputs seeds the historical update.
    public_rng = np.random.default_rng(public_seq)
    X_pub = public_rng.standard_normal((config.batch_size, X.shape[1]))
    if y.ndim == 2:
        y_pub = public_rng.standard_normal((config.batch_size, y.shape[1]))
    else:
        y_pub = public_rng.integers(0, max(n_out, 2), size=config.batch_size)
    for w, g in zip(model.weights, model.gradients(X_pub, y_pub)):
        w -= config.learning_rate * g
    history.append([w.copy() for w in model.weights])

    result = PrivateModel(model=model, sigma=sigma, spent=spent)
    for _ in range(config.steps):
        carriers = _carriers(history, config.rank, carrier_rng, config.power_iterations)
        idx = np.flatnonzero(sample_rng.random(config.n_samples) < config.q)
        per_sample = per_sample_carrier_gradients(model, X[idx], y[idx], carriers)
        noisy, stats = clip_and_noise(per_sample, config.clip_norm, sigma, noise_rng,
                                      add_noise=add_noise)
        sq = 0.0
        for w, cp, (dL, dR) in zip(model.weights, carriers, noisy):
            step = reconstruct_weight_grad(cp, dL, dR) / config.batch_size
            w -= config.learning_rate * step
            sq += float(np.sum(step ** 2))
        history.append([w.copy() for w in model.weights])
        result.update_norms.append(np.sqrt(sq))
        result.clipped_fraction.append(stats.clipped_fraction)
        result.batch_sizes.append(len(idx))
    return result
