"""Privacy accounting for the Poisson-subsampled Gaussian mechanism.

Provides an Edgeworth-expansion accountant, Renyi and discretized
privacy-loss (FFT) baselines, a Monte Carlo reference, noise calibration and
a small private-training engine built on low-rank gradient carriers.
"""

from .calibration import calibrate_sigma, make_evaluator
from .edgeworth import delta_of_epsilon_ew, epsilon_of_delta_ew
from .mechanism import Hypothesis, MechanismSpec, analytic_gaussian_delta
from .prv import GridConfig, delta_of_epsilon_prv, epsilon_of_delta_prv
from .rdp import rdp_epsilon
from .results import AccountantResult, Method

__version__ = "0.1.0"

__all__ = [
    "AccountantResult", "GridConfig", "Hypothesis", "MechanismSpec", "Method",
    "analytic_gaussian_delta", "calibrate_sigma", "delta_of_epsilon_ew",
    "delta_of_epsilon_prv", "epsilon_of_delta_ew", "epsilon_of_delta_prv",
    "make_evaluator", "rdp_epsilon",
]
