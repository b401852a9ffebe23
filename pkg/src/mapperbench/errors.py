"""Exception types shared across the package.

Each class maps to one error contract so callers (and the CLI exit-code
table) can dispatch on type rather than message text.
"""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class GenerationError(RuntimeError):
    """Dataset generation could not place all spheres inside the bound."""


class StratificationError(RuntimeError):
    """A label has too few points to appear on both sides of a split."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap before converging."""


class OutOfSampleError(RuntimeError):
    """A transform was asked for points the fitted model cannot map."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss.

    Carries enough context to diagnose which batch blew up.
    """

    def __init__(self, epoch, batch_index, breakdown):
        self.epoch = epoch
        self.batch_index = batch_index
        self.breakdown = breakdown
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch_index}: {breakdown}"
        )


class MetricUndefinedError(RuntimeError):
    """The separation metric is undefined (graph has no vertices)."""


class SummaryUnavailableError(RuntimeError):
    """No defined grid cells exist for the requested filter."""


class ParseError(ValueError):
    """A results file is malformed.

    ``row`` is the 1-based line number of the offending row.
    """

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)
