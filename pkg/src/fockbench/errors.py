"""Exception types raised by fockbench."""


class FockbenchError(Exception):
    """Base class for all package errors."""


class QuadratureError(FockbenchError):
    """Adaptive quadrature did not reach its tolerance.

    The last two estimates are kept so callers can judge how far off it was.
    """

    def __init__(self, message, estimates=None):
        super().__init__(message)
        self.estimates = estimates


class WeightError(FockbenchError, ValueError):
    """A weight violates its positivity or shape contract."""


class TruncationError(FockbenchError):
    """A point lies outside the certified evaluation radius of a model."""

    def __init__(self, message, tail=None):
        super().__init__(message)
        self.tail = tail


class DegreeTooHighError(FockbenchError):
    """Gram factorisation broke down; ``stable_degree`` is the last good one."""

    def __init__(self, message, stable_degree):
        super().__init__(message)
        self.stable_degree = stable_degree


class UnsupportedPathError(FockbenchError, ValueError):
    """The requested fast path does not apply to this input."""


class MeasureError(FockbenchError, ValueError):
    """Invalid measure specification (negative mass or density)."""


class DegenerateMapError(FockbenchError, ValueError):
    """Affine composition symbol with zero slope."""


class GaugeError(FockbenchError, ValueError):
    """A Schatten gauge failed the convexity/monotonicity check."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class SpectrumError(FockbenchError):
    """Eigenvalues violate the PSD tolerance, or the eigensolver failed."""


class ConfigError(FockbenchError, ValueError):
    """Configuration file is malformed."""
