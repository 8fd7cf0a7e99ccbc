"""Exception types raised across the package."""


class SelbiasError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(SelbiasError, ValueError):
    pass


class InvalidRho(SelbiasError, ValueError):
    pass


class BlockMismatch(SelbiasError, ValueError):
    pass


class InvalidDf(SelbiasError, ValueError):
    pass


class DegenerateVariance(SelbiasError, ValueError):
    """A feature has zero sample (or pooled) standard deviation."""

    def __init__(self, feature, message=None):
        self.feature = feature
        super().__init__(message or f"feature {feature} has zero variance")


class MissingGroup(SelbiasError, ValueError):
    pass


class NonPositiveSigma(SelbiasError, ValueError):
    pass


class LengthMismatch(SelbiasError, ValueError):
    pass


class TooFewFeatures(SelbiasError, ValueError):
    pass


class IrlsDiverged(SelbiasError, RuntimeError):
    pass


class EmptyRange(SelbiasError, ValueError):
    pass


class OutOfFitRange(SelbiasError, ValueError):
    pass


class KTooLarge(SelbiasError, ValueError):
    pass


class ZeroDenominator(SelbiasError, ZeroDivisionError):
    pass


class GroupTooSmall(SelbiasError, ValueError):
    pass


class ConfigError(SelbiasError, ValueError):
    """Invalid scenario configuration."""


class CsvFormatError(SelbiasError, ValueError):
    """Malformed data CSV; message names the offending line and column."""
