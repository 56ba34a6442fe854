"""Exception hierarchy shared across the package."""


class ExpressionError(ValueError):
    """Base class for problems with an expression string."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)


class ExpressionSyntaxError(ExpressionError):
    pass


class UnknownIdentifierError(ExpressionError):
    pass


class ArityError(ExpressionError):
    pass


class EvaluationDomainError(ArithmeticError):
    """Raised when an expression is evaluated outside its natural domain."""


class OutsideDomainError(ValueError):
    """A point was given outside the interval a map is defined on."""


class MollificationError(RuntimeError):
    """Adaptive refinement could not reach the requested accuracy."""


class ConfigError(ValueError):
    pass
