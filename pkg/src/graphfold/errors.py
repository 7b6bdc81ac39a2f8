"""Exception hierarchy shared by every graphfold module.

The CLI maps these onto exit codes, so each class carries the code it should
produce when it escapes a command.
"""


class GraphfoldError(Exception):
    exit_code = 4


class DimensionError(GraphfoldError, ValueError):
    """Shapes of the inputs are incompatible."""

    exit_code = 3


class InputError(GraphfoldError, ValueError):
    """Input data is malformed (non-finite entries, bad labels, ...)."""

    exit_code = 3


class ParameterError(GraphfoldError, ValueError):
    """Model parameters violate their constraints."""

    exit_code = 2


class ModelValidityError(ParameterError):
    """An edge probability left [0, 1]."""

    def __init__(self, message, layer=None, entry=None):
        super().__init__(message)
        self.layer = layer
        self.entry = entry


class SingularityError(GraphfoldError, ArithmeticError):
    """A matrix that must be invertible (or of full rank) is not."""

    exit_code = 4


class UnsupportedOperationError(GraphfoldError):
    exit_code = 4


class DomainError(GraphfoldError, ArithmeticError):
    exit_code = 4


class UndefinedAUCError(GraphfoldError, ValueError):
    exit_code = 3


class ConfigError(GraphfoldError, ValueError):
    exit_code = 2


class DataError(GraphfoldError, ValueError):
    """Edge-list or CSV file could not be parsed."""

    exit_code = 3

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
