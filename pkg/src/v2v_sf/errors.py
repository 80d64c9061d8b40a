"""Exception types shared across the package."""


class V2VError(Exception):
    """Base class for all package errors."""


class ParameterError(V2VError, ValueError):
    """An input violates a documented precondition."""


class ContractError(V2VError):
    """A data structure is missing something an operation requires."""


class NumericalError(V2VError, ArithmeticError):
    """A quadrature or root-finding step did not converge."""


class ConfigError(V2VError):
    """Malformed experiment configuration file."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
