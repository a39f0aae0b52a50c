import csv
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from numba import njit
from pathos.threading import ThreadPool

from ethseq.errors import SchemaError
from ethseq.ingest.csv_parser import RowDiagnostic, normalize_address
from ethseq.tasks.metrics import MetricsReport, hit_ratios

PAIR_COLUMNS = ("query", "target", "cutoff_timestamp")

NO_CUTOFF = np.iinfo(np.int64).max


@dataclass(frozen=True)
class EvalPair:
    """
    A ground-truth pair of accounts controlled by the same entity.

    :param query: Address whose partner is searched for.
    :type query: str
    :param target: The partner.
    :type target: str
    :param cutoff_timestamp: When set, only accounts first seen at or before
                             this time are candidates.
    :type cutoff_timestamp: Optional[int]
    """

    query: str
    target: str
    cutoff_timestamp: Optional[int] = None

    def __post_init__(self) -> None:
        if self.query == self.target:
            raise ValueError(f"Pair query and target are the same account {self.query}")


def read_pairs(
    stream: TextIO, diagnostics: Optional[List[RowDiagnostic]] = None
) -> List[EvalPair]:
    """
    Parse a ``query,target[,cutoff_timestamp]`` file. An empty cutoff means
    no candidate filter.

    :param stream: CSV text stream.
    :type stream: TextIO
    :param diagnostics: Collects one entry per rejected row, if provided.
    :type diagnostics: Optional[List[RowDiagnostic]]
    :return: The pairs in file order.
    :rtype: List[EvalPair]
    :raises SchemaError: If ``query`` or ``target`` is missing from the header.
    """
    reader = csv.DictReader(stream)
    header = reader.fieldnames or []
    missing = [c for c in PAIR_COLUMNS[:2] if c not in header]
    if missing:
        raise SchemaError(f"pairs CSV is missing required column(s): {', '.join(missing)}")
    pairs = []
    for row in reader:
        try:
            raw_cutoff = (row.get("cutoff_timestamp") or "").strip()
            pairs.append(
                EvalPair(
                    normalize_address(row["query"] or ""),
                    normalize_address(row["target"] or ""),
                    int(raw_cutoff) if raw_cutoff else None,
                )
            )
        except ValueError as e:
            logging.warning(f"Skipping malformed pair at line {reader.line_num}: {e}")
            if diagnostics is not None:
                diagnostics.append(RowDiagnostic(reader.line_num, str(e)))
    return pairs


def write_pairs(pairs: Iterable[EvalPair], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(PAIR_COLUMNS)
    for pair in pairs:
        cutoff = "" if pair.cutoff_timestamp is None else pair.cutoff_timestamp
        writer.writerow((pair.query, pair.target, cutoff))


@njit(cache=True, nogil=True)
def _target_rank(
    vectors: np.ndarray,
    first_seen: np.ndarray,
    query: np.int64,
    target: np.int64,
    cutoff: np.int64,
) -> Tuple[np.int64, np.int64]:
    """
    1-based rank of ``target`` among the candidates of ``query`` by ascending
    squared Euclidean distance, ties by ascending row. Candidates are all rows
    but the query that were first seen at or before ``cutoff``.

    :return: The rank and the candidate count; rank 0 when the target is not a candidate.
    """
    n, dim = vectors.shape
    dist = np.empty(n, dtype=np.float64)
    for i in range(n):
        s = 0.0
        for j in range(dim):
            diff = np.float64(vectors[i, j]) - np.float64(vectors[query, j])
            s += diff * diff
        dist[i] = s
    if first_seen[target] > cutoff:
        return np.int64(0), np.int64(0)
    d_t = dist[target]
    rank = np.int64(1)
    candidates = np.int64(0)
    for i in range(n):
        if i == query or first_seen[i] > cutoff:
            continue
        candidates += 1
        if dist[i] < d_t or (dist[i] == d_t and i < target):
            rank += 1
    return rank, candidates


def _rank_chunk(
    args: Tuple[np.ndarray, np.ndarray, np.ndarray],
) -> List[Tuple[int, int]]:
    vectors, first_seen, jobs = args
    out = []
    for q, t, c in jobs:
        rank, candidates = _target_rank(vectors, first_seen, q, t, c)
        out.append((int(rank), int(candidates)))
    return out


def deanon_eval(
    pairs: Sequence[EvalPair],
    addresses: Sequence[str],
    vectors: np.ndarray,
    first_seen: np.ndarray,
    ks: Sequence[int],
    threads: int = 1,
) -> MetricsReport:
    """
    De-anonymization by nearest-neighbour retrieval. For every pair, the
    candidates are ranked by Euclidean distance to the query's representation
    and the target's 1-based rank is recorded. Pairs whose query or target has
    no representation, or whose target falls outside its candidate filter, are
    skipped with a warning.

    :param pairs: Ground-truth pairs.
    :type pairs: Sequence[EvalPair]
    :param addresses: Address of every representation row.
    :type addresses: Sequence[str]
    :param vectors: Representations, ``(n, D)``.
    :type vectors: np.ndarray
    :param first_seen: First activity of every row, unix seconds.
    :type first_seen: np.ndarray
    :param ks: Hit-ratio cut-offs.
    :type ks: Sequence[int]
    :param threads: Worker threads; the result does not depend on it.
    :type threads: int
    :return: The report.
    :rtype: MetricsReport
    """
    row_of: Dict[str, int] = {a: i for i, a in enumerate(addresses)}
    vectors = np.ascontiguousarray(vectors)
    first_seen = np.ascontiguousarray(first_seen, dtype=np.int64)

    jobs = []
    skipped = 0
    for pair in pairs:
        missing = [a for a in (pair.query, pair.target) if a not in row_of]
        if missing:
            logging.warning(
                f"Skipping pair {pair.query} -> {pair.target}: no representation for {missing}"
            )
            skipped += 1
            continue
        cutoff = NO_CUTOFF if pair.cutoff_timestamp is None else pair.cutoff_timestamp
        jobs.append((row_of[pair.query], row_of[pair.target], cutoff, pair))

    job_array = np.array([j[:3] for j in jobs], dtype=np.int64).reshape(-1, 3)
    n_chunks = max(1, min(threads, len(jobs)))
    chunks = [(vectors, first_seen, part) for part in np.array_split(job_array, n_chunks)]
    if threads > 1 and len(chunks) > 1:
        pool = ThreadPool(nodes=threads)
        try:
            results = pool.map(_rank_chunk, chunks)
        finally:
            pool.close()
            pool.join()
            pool.clear()
    else:
        results = [_rank_chunk(c) for c in chunks]

    ranks: List[int] = []
    sizes: List[int] = []
    for (_, _, _, pair), (rank, candidates) in zip(jobs, [r for part in results for r in part]):
        if rank == 0:
            logging.warning(
                f"Skipping pair {pair.query} -> {pair.target}: target first seen after "
                f"the cutoff {pair.cutoff_timestamp}"
            )
            skipped += 1
            continue
        ranks.append(rank)
        sizes.append(candidates)

    logging.info(f"Ranked {len(ranks)} pairs, skipped {skipped}")
    return MetricsReport(
        task="deanon",
        hit_ratio=hit_ratios(ranks, ks),
        mean_rank=float(np.mean(ranks)) if ranks else None,
        candidate_sizes=(int(min(sizes)), float(np.mean(sizes)), int(max(sizes)))
        if sizes
        else None,
        pairs_evaluated=len(ranks),
        pairs_skipped=skipped,
    )
