"""Exception hierarchy.

Two families are distinguished because the command line maps them to
different exit codes: bad input (``ValidationError``) and numerical
breakdown (``NumericalError``).
"""


class QstError(Exception):
    """Base class for all errors raised by qstkit."""


class ValidationError(QstError, ValueError):
    """Input violates a precondition."""


class NumericalError(QstError, ArithmeticError):
    """A numerical routine failed on otherwise valid input."""


class ShapeError(ValidationError):
    pass


class NotHermitian(ValidationError):
    pass


class SpectrumError(ValidationError):
    pass


class DegenerateObservable(SpectrumError):
    pass


class DistributionError(ValidationError):
    pass


class NotAState(ValidationError):
    pass


class ArgumentError(ValidationError):
    pass


class Inapplicable(ValidationError):
    """Closed form requested outside its domain of validity."""


class Unsupported(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class KernelNotPD(ValidationError):
    pass


class DecompositionFailure(NumericalError):
    pass


class IllConditioned(NumericalError):
    pass
