"""Exception types raised by stiefeldr."""


class StiefelError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(StiefelError, ValueError):
    """Matrix shapes do not conform."""


class RankDeficiencyError(StiefelError, ValueError):
    """A matrix handed to Gram-Schmidt does not have full column rank."""

    def __init__(self, column, norm):
        self.column = column
        self.norm = norm
        super().__init__(
            f"column {column} is linearly dependent on the preceding columns "
            f"(residual norm {norm:.3e})"
        )


class NonFiniteObjectiveError(StiefelError, FloatingPointError):
    """The objective returned NaN or inf."""


class ObjectiveError(StiefelError, RuntimeError):
    """A user callback raised during optimization."""

    def __init__(self, iteration, original):
        self.iteration = iteration
        self.original = original
        super().__init__(
            f"objective callback failed at iteration {iteration}: "
            f"{type(original).__name__}: {original}"
        )


class DataValidationError(StiefelError, ValueError):
    """Input data violates a dataset invariant.

    ``rows`` holds the offending row indices when they are known.
    """

    def __init__(self, message, rows=None):
        self.rows = [] if rows is None else list(rows)
        if self.rows:
            shown = ", ".join(str(r) for r in self.rows[:10])
            more = "..." if len(self.rows) > 10 else ""
            message = f"{message} (rows: {shown}{more})"
        super().__init__(message)


class MissingArgumentError(StiefelError, ValueError):
    """A required optional argument was not supplied."""


class ParseError(StiefelError, ValueError):
    """A file could not be parsed; ``line`` and ``column`` locate the problem (1-based)."""

    def __init__(self, path, message, line=None, column=None):
        self.path = str(path)
        self.line = line
        self.column = column
        where = self.path
        if line is not None:
            where += f", line {line}"
        if column is not None:
            where += f", column {column!r}"
        super().__init__(f"{where}: {message}")
