"""Exception hierarchy.

Input problems derive from :class:`InvalidInputError` (CLI exit code 2);
numerical failures derive from :class:`NumericalError` (CLI exit code 3).
"""


class MidcurveError(Exception):
    pass


class InvalidInputError(MidcurveError, ValueError):
    pass


class DomainError(InvalidInputError):
    """Time outside the range a curve can answer for."""


class ConfigError(InvalidInputError):
    pass


class DataError(InvalidInputError):
    """Market data that is internally inconsistent (e.g. butterfly arbitrage)."""


class ContractError(InvalidInputError):
    """An object was passed in a state the callee does not accept."""


class NumericalError(MidcurveError, ArithmeticError):
    pass


class CalibrationError(NumericalError):
    pass


class ConditioningError(CalibrationError):
    pass


class InversionError(NumericalError):
    pass


class InvalidMarginalError(NumericalError):
    pass
