import logging
from enum import Enum
from typing import Dict, Union


class IngestCounters(Enum):
    ROWS_PARSED = "ROWS_PARSED"
    ROWS_REJECTED = "ROWS_REJECTED"
    CONTRACT_CREATIONS = "CONTRACT_CREATIONS"
    TOKEN_EVENTS_DROPPED = "TOKEN_EVENTS_DROPPED"


class SequenceCounters(Enum):
    SEQUENCES = "SEQUENCES"
    FAILED_REMOVED = "FAILED_REMOVED"
    RECORDS_MERGED = "RECORDS_MERGED"
    PIECES = "PIECES"


class TrainCounters(Enum):
    BATCHES = "BATCHES"
    MASKED_POSITIONS = "MASKED_POSITIONS"
    NEGATIVE_COLLISIONS = "NEGATIVE_COLLISIONS"
    SKIPPED_SEQUENCES = "SKIPPED_SEQUENCES"


CounterType = Union[IngestCounters, SequenceCounters, TrainCounters]


class Statistics:
    """
    A class for tracking counters of a pipeline stage (rows parsed, records merged,
    masked positions seen, ...).
    """

    def __init__(self) -> None:
        """
        Initialize the Statistics object.
        Upon initialization, sets every counter to zero.
        """
        self._counts: Dict[CounterType, int] = {
            key: 0 for key in [*IngestCounters, *SequenceCounters, *TrainCounters]
        }
        self._fields: Dict = {}

    def increment(self, counter: CounterType, count: int = 1) -> None:
        """
        Increment a counter.

        :param counter: The counter to increment.
        :type counter: CounterType
        :param count: Amount to add. Default is 1.
        :type count: int
        """
        self._counts[counter] += count

    def reset(self, default_val: int = 0) -> None:
        """
        Reset every counter to a default value.

        :param default_val: The value to reset to (default is 0).
        :type default_val: int
        """
        for key in self._counts.keys():
            self._counts[key] = default_val

    @property
    def counts(self) -> Dict[CounterType, int]:
        """
        :return: Every counter and its current value.
        :rtype: Dict[CounterType, int]
        """
        return self._counts

    @property
    def info_data(self) -> Dict:
        """
        :return: The fields of the most recent ``log_info`` call.
        :rtype: Dict
        """
        return self._fields

    def log_info(self, stage: str, elapsed: float, **extra: float) -> None:
        """
        Log one summary line for a stage or an epoch.

        :param stage: Name of the stage or epoch being summarized.
        :type stage: str
        :param elapsed: Wall time of the stage, in seconds.
        :type elapsed: float
        :param extra: Additional named values, e.g. the mean loss.
        :type extra: float
        """
        self._fields = {"Stage": stage, "Time ms": int(1000 * elapsed)}
        self._fields.update(extra)
        for key, value in self._counts.items():
            if value:
                self._fields[key.value] = value
        info_str = " ".join(f"{k}={v}" for k, v in self._fields.items())
        logging.info(f"stats {info_str}")
