"""Exception types raised across the accounting and training code."""


class AccountingError(Exception):
    """Base class for accountant failures."""


class DomainError(AccountingError, ValueError):
    """Argument lies outside the support of a privacy-loss variable."""


class QuadratureFailure(AccountingError):
    """Gauss-Hermite node doubling did not reach the requested tolerance."""


class DegenerateDistribution(AccountingError):
    """The privacy loss has zero variance, so the expansion is undefined."""


class NoFiniteEpsilon(AccountingError):
    """No epsilon below the search cap achieves the requested delta."""


class TargetUnreachable(AccountingError):
    """Even the starting noise multiplier exceeds the epsilon target."""


class OrderTooLarge(AccountingError, OverflowError):
    """An RDP order overflows double precision for this mechanism."""


class BoundsTooTight(AccountingError):
    """Discretization bounds drop more probability mass than allowed."""


class WraparoundDetected(AccountingError):
    """FFT composition domain is too small; mass reached the circular edge."""


class IntervalUnresolvable(AccountingError):
    """Target delta is below the Monte Carlo resolution of the sample size."""


class RankDeficientWarning(UserWarning):
    """Historical update has numerical rank below the requested carrier rank."""
