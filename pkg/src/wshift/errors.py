"""Exception types raised across the package."""


class WShiftError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(WShiftError, ValueError):
    pass


class EmptyDataset(WShiftError, ValueError):
    pass


class NonFiniteValue(WShiftError, ValueError):
    pass


class NoCompleteCases(WShiftError, ValueError):
    pass


class IndexOutOfRange(WShiftError, IndexError):
    pass


class InstanceTooLarge(WShiftError, ValueError):
    pass


class InfeasibleMarginals(WShiftError, ValueError):
    pass


class NotUnivariate(WShiftError, ValueError):
    pass


class InsufficientData(WShiftError, ValueError):
    pass


class RegressionFailure(WShiftError, RuntimeError):
    """A nuisance fit failed; ``half`` names the data-splitting fold, if any."""

    def __init__(self, message, half=None):
        super().__init__(message if half is None else f"half {half}: {message}")
        self.half = half


class SingularDesign(RegressionFailure):
    pass


class EmptyTrainingSet(RegressionFailure):
    pass


class DegenerateKernel(WShiftError, ValueError):
    pass


class UnsupportedFunctional(WShiftError, ValueError):
    pass


class EmptySample(WShiftError, ValueError):
    pass


class ConfigError(WShiftError, ValueError):
    pass


class FixtureMissing(WShiftError, KeyError):
    pass


class DidNotConverge(UserWarning):
    """Issued (not raised) when IRLS stops at ``max_iter``."""
