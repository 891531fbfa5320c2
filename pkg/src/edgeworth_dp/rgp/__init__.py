"""Low-rank gradient carrier training engine."""

from .carriers import (CarrierPair, decompose_carriers, gram_schmidt, random_carriers,
                       reconstruct_weight_grad)
from .data import load_dataset, make_separable, save_dataset
from .model import ToyModel, per_sample_carrier_gradients
from .privatize import ClipStats, clip_and_noise
from .train import PrivateModel, TrainRunConfig, spent_budget, train_private

__all__ = [
    "CarrierPair", "ClipStats", "PrivateModel", "ToyModel", "TrainRunConfig",
    "clip_and_noise", "decompose_carriers", "gram_schmidt", "load_dataset",
    "make_separable", "per_sample_carrier_gradients", "random_carriers",
    "reconstruct_weight_grad", "save_dataset", "spent_budget", "train_private",
]
