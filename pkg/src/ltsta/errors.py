"""Exception hierarchy.

Input/validation problems derive from :class:`ValidationError`; failures of a
numerical routine derive from :class:`NumericalError`.  The CLI maps the two
families to exit codes 1 and 2.
"""


class LtstaError(Exception):
    """Base class for all package errors."""


class ValidationError(LtstaError, ValueError):
    pass


class NumericalError(LtstaError, ArithmeticError):
    pass


# timeseries_core
class InvalidSeries(ValidationError):
    pass


class NonPositiveValue(ValidationError):
    pass


class InversionDomain(ValidationError):
    pass


# segmented_trend
class InvalidSegmentation(ValidationError):
    pass


class WindowTooShort(ValidationError):
    pass


class BudgetInfeasible(ValidationError):
    pass


class RankDeficient(NumericalError):
    pass


# break_selection
class ZeroSsr(NumericalError):
    pass


class CurveTooShort(ValidationError):
    pass


# seasonal_fourier
class HarmonicsOutOfRange(ValidationError):
    pass


# arma_engine
class NonStationaryParams(NumericalError):
    pass


class DegenerateVariance(NumericalError):
    pass


class SampleTooSmall(ValidationError):
    pass


# ltsta_model
class TooFewResiduals(ValidationError):
    pass


# eval_metrics
class ZeroDenominator(NumericalError):
    pass


class SeriesTooShort(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


# cli_harness
class MissingModel(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class ParseError(ValidationError):
    """Malformed input file; ``line`` is the 1-based offending line."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
