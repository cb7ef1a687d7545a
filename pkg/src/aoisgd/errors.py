"""Exception types shared across the package."""


class InvalidInput(ValueError):
    """Raised when arguments violate an operation's preconditions."""


class BoundUnavailable(ArithmeticError):
    """The MGF product diverges on the whole search interval."""


class DivergenceDetected(ArithmeticError):
    """A tail sum does not decay fast enough to be truncated."""


class StabilityViolation(RuntimeError):
    """An iterate or gradient became non-finite during a run."""


class ConfigError(ValueError):
    """Scenario file could not be parsed or validated.

    ``line`` is the 1-based line in the scenario file when it is known.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip() if where else message)
