"""Exceptions raised by gerk."""

from typing import Optional


class GerkError(Exception):
    """Base class for every error raised by this package."""

    exit_code: int = 1


class GraphFormatError(GerkError, ValueError):
    """A node or edge file does not conform to its documented format.

    Attributes:
        path: The offending file.
        line: The 1-based line number, if the problem is tied to a line.

    """

    def __init__(self, message: str, path: str, line: Optional[int] = None) -> None:
        location = f"{path}:{line}" if line is not None else path
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line = line


class GraphError(GerkError, LookupError):
    """A node or edge referenced by an operation does not exist."""


class InfeasiblePartitionError(GerkError, ValueError):
    """The requested shard count and capacity cannot hold the training nodes."""

    exit_code = 2


class EmptyGraphError(GerkError, ValueError):
    """A model was asked to train on a graph without nodes."""


class UnlearnError(GerkError):
    """An unlearning request or prediction cannot be serviced."""


class ConfigError(GerkError, ValueError):
    """A configuration file or command line is invalid."""

    exit_code = 2


class AuditError(GerkError):
    """An invariant audit of the unlearning state failed."""

    exit_code = 3
