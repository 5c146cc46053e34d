"""Exception hierarchy shared by all sdwave modules."""


class SDWaveError(Exception):
    """Base class for every error raised by this package."""


class InvalidMeshError(SDWaveError, ValueError):
    pass


class ShapeError(SDWaveError, ValueError):
    pass


class NotPositiveDefiniteError(SDWaveError, ArithmeticError):
    pass


class SingularMatrixError(SDWaveError, ArithmeticError):
    pass


class EvaluationError(SDWaveError, ValueError):
    """A user-supplied function returned non-finite values."""


class UnsupportedInputError(SDWaveError, TypeError):
    pass


class DomainError(SDWaveError, ValueError):
    pass


class InvalidSpecError(SDWaveError, ValueError):
    pass


class ConfigurationError(SDWaveError, ValueError):
    pass


class DegenerateDataError(SDWaveError, ValueError):
    """Rate or exponent fits over data containing zero/negative values."""


class ParseError(SDWaveError, ValueError):
    pass


class ValidationError(SDWaveError, ValueError):
    pass
