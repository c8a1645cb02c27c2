"""Exception hierarchy. Every rejection raised by the package is a ``ServeSimError``."""


class ServeSimError(Exception):
    """Base class; the CLI maps subclasses to exit codes via ``exit_code``."""

    exit_code = 1


class ValidationError(ServeSimError, ValueError):
    """A domain object was constructed with a violated invariant."""

    exit_code = 3


class ConfigError(ValidationError):
    """Invalid configuration value (weights, thresholds, device performance)."""


class SizingError(ServeSimError, OverflowError):
    """A byte count exceeded the representable range."""

    exit_code = 4


class ConsistencyError(ServeSimError, ValueError):
    """Batch members and request ids disagree, or a request is duplicated/missing."""

    exit_code = 4


class ContractError(ServeSimError, ValueError):
    """An operation was called with inputs that violate its precondition."""

    exit_code = 4


class InfeasibleError(ServeSimError):
    """No device subset can host the model."""

    exit_code = 5

    def __init__(self, message, shortfall=None):
        super().__init__(message)
        self.shortfall = shortfall


class ParseError(ServeSimError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    exit_code = 2

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class InputError(ServeSimError, OSError):
    """A file could not be opened or read."""

    exit_code = 2
