from typing import Any, Optional


class EthSeqError(Exception):
    """
    Base class of every error the pipeline raises on purpose.
    The CLI turns ``exit_code`` into the process exit status.
    """

    exit_code = 1


class UsageError(EthSeqError):
    """Invalid flags or configuration combinations."""

    exit_code = 1


class DataError(EthSeqError):
    """Missing or unreadable inputs."""

    exit_code = 2


class SchemaError(DataError):
    """A CSV input lacks a required column."""


class CorpusFormatError(DataError):
    """A binary intermediate file has a wrong magic or is truncated."""


class SynthConfigError(DataError):
    """The synthetic generator was asked for something it cannot build."""


class DegenerateLabelsError(DataError):
    """Labels with a single class, or a split missing a class."""


class NumericError(EthSeqError):
    """Numerical failure during training."""

    exit_code = 3


class DivergenceError(NumericError):
    """
    Raised when the training loss stops being finite.

    :param message: Human readable diagnostic.
    :type message: str
    :param checkpoint: The state at the time of divergence, for post-mortem.
    :type checkpoint: Optional[Any]
    """

    def __init__(self, message: str, checkpoint: Optional[Any] = None) -> None:
        super().__init__(message)
        self.checkpoint = checkpoint
