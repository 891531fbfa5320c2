"""Result containers shared by all accountants."""

from __future__ import annotations

import dataclasses
import enum
from typing import Any, Optional


class Method(enum.Enum):
    EDGEWORTH = "edgeworth"
    RDP = "rdp"
    PRV = "prv"
    MONTE_CARLO = "monte_carlo"


@dataclasses.dataclass(frozen=True)
class AccountantResult:
    """An (epsilon, delta) guarantee after ``m`` compositions.

    ``error_envelope`` is only populated when the accountant can report an
    error bound: the Berry-Esseen CDF bound for Edgeworth, or the
    truncation/discretization slack in delta for PRV.
    """

    epsilon: float
    delta: float
    method: Method
    m: int
    error_envelope: Optional[float] = None
    details: dict[str, Any] = dataclasses.field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if self.m < 1:
            raise ValueError("composition count must be positive")
        if self.error_envelope is not None and self.error_envelope < 0:
            raise ValueError("error envelope must be nonnegative")
