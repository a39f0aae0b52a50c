from typing import Iterable, List

import numpy as np
from numba import njit

from ethseq.seqgen.sequence import TxRecord, TxSequence

_SECONDS_PER_HOUR = 3600


@njit(cache=True, nogil=True)
def _run_ids(keys: np.ndarray, timestamps: np.ndarray, window: np.int64) -> np.ndarray:
    """
    Greedy run detection over chronologically ordered records. A record joins
    the current run when it has the run's key and lies within ``window``
    seconds of the run's first record.
    """
    n = len(keys)
    assert n == len(timestamps), "keys and timestamps must have the same length"
    runs = np.empty(n, dtype=np.int64)
    run = -1
    start_key = np.int64(-1)
    start_ts = np.int64(0)
    for i in range(n):
        if run < 0 or keys[i] != start_key or timestamps[i] - start_ts > window:
            run += 1
            start_key = keys[i]
            start_ts = timestamps[i]
        runs[i] = run
    return runs


def remove_failed(seq: TxSequence) -> TxSequence:
    """
    Drop the records of failed transactions.
    """
    return seq.with_body([r for r in seq.body if not r.failed])


def _merge(run: List[TxRecord]) -> TxRecord:
    # ``run`` is chronological
    first = run[0]
    if len(run) == 1:
        return first
    return TxRecord(
        counterparty=first.counterparty,
        direction=first.direction,
        counterparty_kind=first.counterparty_kind,
        raw_timestamp=min(r.raw_timestamp for r in run),
        raw_amount_wei=sum(r.raw_amount_wei for r in run),
        agg_count=sum(r.agg_count for r in run),
        token_recipients=tuple(t for r in run for t in r.token_recipients),
        tx_hashes=tuple(h for r in run for h in r.tx_hashes),
    )


def deduplicate(seq: TxSequence, window_hours: float = 72.0) -> TxSequence:
    """
    Remove failed transactions, then fold each run of consecutive records with
    the same counterparty and direction into one record. A run spans at most
    ``window_hours`` from its first to its last transaction (inclusive). The
    folded record sums the amounts and counts and keeps the earliest timestamp.

    :param seq: A sequence from ``build_sequence``.
    :type seq: TxSequence
    :param window_hours: Maximum run span.
    :type window_hours: float
    :return: The de-duplicated sequence.
    :rtype: TxSequence
    """
    body = remove_failed(seq).body
    if len(body) < 2:
        return seq.with_body(body)

    chronological = body[::-1]
    keys = np.array([r.counterparty * 3 + int(r.direction) for r in chronological], dtype=np.int64)
    timestamps = np.array([r.raw_timestamp for r in chronological], dtype=np.int64)
    window = np.int64(int(window_hours * _SECONDS_PER_HOUR))
    run_ids = _run_ids(keys, timestamps, window)

    bounds = [0, *(np.flatnonzero(np.diff(run_ids)) + 1).tolist(), len(chronological)]
    merged = [_merge(chronological[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:])]
    return seq.with_body(merged[::-1])


def repetitiveness_ratio(sequences: Iterable[TxSequence]) -> float:
    """
    Fraction of records, in chronological order per owner, whose counterparty
    equals the previous record's counterparty. Heads are not counted.

    :param sequences: One sequence per owner.
    :type sequences: Iterable[TxSequence]
    :return: Ratio in [0, 1]; 0 when no owner has two records.
    :rtype: float
    """
    repeats = 0
    total = 0
    for seq in sequences:
        cps = seq.counterparties()[1:]
        if len(cps) < 2:
            continue
        repeats += int(np.count_nonzero(cps[1:] == cps[:-1]))
        total += len(cps) - 1
    return repeats / total if total else 0.0
