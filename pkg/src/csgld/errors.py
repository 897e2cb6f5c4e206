"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument is outside the domain of an operation (non-finite, bad index...)."""


class InvalidStateError(ValueError):
    """An object violates its invariants (e.g. a non-positive theta component)."""


class InvalidGridError(ValueError):
    """A quadrature grid leaves too much target mass outside its range."""


class ConfigError(ValueError):
    """A run configuration could not be parsed or validated."""

    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.line = line
        self.key = key


class DivergenceError(RuntimeError):
    """The chain produced a non-finite position.

    The ``step`` attribute holds the 1-based index of the failing iteration.
    """

    def __init__(self, step, message=None):
        super().__init__(message or f"chain diverged at step {step}")
        self.step = step
