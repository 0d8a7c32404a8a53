"""Exception types shared across the package."""


class DeclipError(Exception):
    """Base class for package errors."""


class UnreachableTargetError(DeclipError, ValueError):
    """A requested SDR cannot be produced by hard clipping the given signal."""

    def __init__(self, target: float, low: float, high: float):
        self.target = target
        self.achievable = (low, high)
        super().__init__(
            f"target SDR {target!r} dB is unreachable; achievable range is ({low:g}, {high:g}] dB"
        )


class NoClippedRegionError(DeclipError, ValueError):
    """SDR_c was requested on a mask that has no clipped samples."""


class NumericalError(DeclipError, ArithmeticError):
    """NaN/Inf or a zero denominator showed up where it must not."""


class ConfigError(DeclipError, ValueError):
    """Inconsistent configuration (missing checkpoint, mismatched shapes, ...)."""
