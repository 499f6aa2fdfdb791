"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(ToolkitError):
    """Malformed decoder output, dataset record, or knowledge-base file.

    Carries a 1-based line number when the failure is tied to a line.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelError(ToolkitError):
    """Invalid rewrite model: bad file, wrong version, broken invariant."""


class ClusterMergeError(ToolkitError):
    """Cluster merging aborted; carries the partial result for inspection."""

    def __init__(self, message: str, partial=None, rounds_completed: int = 0):
        super().__init__(message)
        self.partial = partial
        self.rounds_completed = rounds_completed
