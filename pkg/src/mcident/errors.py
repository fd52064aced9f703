"""Exception types raised by the library.

Every error derives from :class:`McidentError` so callers can catch the
whole family at once; validation errors additionally derive from
``ValueError`` where that matches the builtin convention.
"""

from __future__ import annotations


class McidentError(Exception):
    """Base class for all library-specific errors."""


class NonSquareError(McidentError, ValueError):
    """Transition matrix input is not square."""


class NegativeEntryError(McidentError, ValueError):
    """A probability entry is negative beyond tolerance."""


class RowSumOutOfToleranceError(McidentError, ValueError):
    """A matrix row does not sum to one within the allowed tolerance."""

    def __init__(self, row: int, deviation: float):
        self.row = int(row)
        self.deviation = float(deviation)
        super().__init__(
            f"row {row} sums to 1 {deviation:+.6e}; outside tolerance"
        )


class DimensionMismatchError(McidentError, ValueError):
    """Operands live on different state spaces."""


class PowerIterationNoConvergenceError(McidentError):
    """Spectral radius power iteration hit its iteration cap."""


class NotStationaryError(McidentError, ValueError):
    """Supplied distribution is not stationary for the chain."""


class ZeroStationaryMassError(McidentError, ValueError):
    """Stationary distribution has a zero (or negative) entry."""


class NotErgodicError(McidentError, ValueError):
    """Chain is reducible or periodic.

    ``reason`` is ``"reducible"`` or ``"periodic"``.
    """

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        msg = f"chain is not ergodic ({reason})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class CapExceededError(McidentError):
    """Iteration cap reached before the target condition was met."""

    def __init__(self, cap: int, what: str = "mixing"):
        self.cap = int(cap)
        super().__init__(f"{what} did not terminate within cap {cap}")


class NotReversibleError(McidentError, ValueError):
    """Chain is not reversible with respect to the given distribution."""


class MissingGapError(McidentError, ValueError):
    """Requested mixing-time bracket needs a spectral gap that is absent."""


class ParameterOutOfRangeError(McidentError, ValueError):
    """A numeric parameter violates its documented range."""


class CountMismatchError(McidentError, ValueError):
    """Histogram counts are inconsistent with the claimed sample size."""


class InsufficientSampleError(McidentError, ValueError):
    """Sample shorter than the configured test requires."""

    def __init__(self, needed: int, available: int):
        self.needed = int(needed)
        self.available = int(available)
        super().__init__(f"need {needed} observations, have {available}")


class TooShortError(McidentError, ValueError):
    """Trajectory too short for the requested operation."""


class TrajectoryTooShortError(McidentError, ValueError):
    """Trajectory below the computed required length (pass ``force`` to override)."""

    def __init__(self, required: int, got: int):
        self.required = int(required)
        self.got = int(got)
        super().__init__(
            f"trajectory length {got} below required {required}; "
            "pass force=True to run under-powered"
        )


class NotErgodicReferenceError(McidentError, ValueError):
    """Reference chain for the identity test must be ergodic."""


class InvalidSpecError(McidentError, ValueError):
    """Family specification violates its structural constraints."""


class InstanceTooLargeError(McidentError, ValueError):
    """Exact oracle instance exceeds its size precondition."""


class ZeroProbabilityEventError(McidentError, ValueError):
    """Conditioning event has probability zero under one of the chains."""


class CalibrationFailedError(McidentError):
    """Constant calibration exhausted its multiplier range."""
