import math
from dataclasses import replace
from typing import Tuple

from ethseq.seqgen.sequence import TxRecord, TxSequence

_WEI_PER_ETHER_DIGITS = 18
_SECONDS_PER_DAY = 86400.0

MAX_AMOUNT_BIN = 20
MAX_COUNT_BIN = 10
MAX_TIME_BIN = 15


def _clamp(value: int, lo: int, hi: int) -> int:
    return max(lo, min(hi, value))


def amount_bin(wei: int) -> int:
    """
    Order of magnitude of the amount in ether, shifted so 1 ether lands in bin 10.
    Zero amounts get bin 0.

    :param wei: Amount in wei.
    :type wei: int
    :return: Bin in [0, 20].
    :rtype: int
    """
    if wei <= 0:
        return 0
    # floor(log10(wei)) computed on the integer to stay exact for 256-bit values
    magnitude = len(str(wei)) - 1 - _WEI_PER_ETHER_DIGITS
    return _clamp(magnitude + 10, 1, MAX_AMOUNT_BIN)


def count_bin(agg_count: int) -> int:
    return _clamp(agg_count.bit_length() - 1, 0, MAX_COUNT_BIN)


def time_bin(timestamp: int, newest_timestamp: int) -> int:
    """
    Recency of a record: ``floor(log2(1 + days before the newest record))``.

    :param timestamp: Unix seconds of the record.
    :type timestamp: int
    :param newest_timestamp: Unix seconds of the sequence's most recent record.
    :type newest_timestamp: int
    :return: Bin in [0, 15].
    :rtype: int
    """
    delta_days = max(0, newest_timestamp - timestamp) / _SECONDS_PER_DAY
    return _clamp(int(math.floor(math.log2(1.0 + delta_days))), 0, MAX_TIME_BIN)


def bin_features(record: TxRecord, newest_timestamp: int) -> Tuple[int, int, int]:
    """
    :param record: A non-head record with raw fields populated.
    :type record: TxRecord
    :param newest_timestamp: The sequence's most recent timestamp.
    :type newest_timestamp: int
    :return: ``(amount_bin, count_bin, time_bin)``.
    :rtype: Tuple[int, int, int]
    """
    return (
        amount_bin(record.raw_amount_wei),
        count_bin(record.agg_count),
        time_bin(record.raw_timestamp, newest_timestamp),
    )


def bin_sequence(seq: TxSequence) -> TxSequence:
    """
    Fill the binned features of every non-head record. The head keeps its Null bins.
    """
    if len(seq) == 1:
        return seq
    newest = max(r.raw_timestamp for r in seq.body)
    body = []
    for record in seq.body:
        amount, count, recency = bin_features(record, newest)
        body.append(replace(record, amount_bin=amount, count_bin=count, time_bin=recency))
    return seq.with_body(body)
