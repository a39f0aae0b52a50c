import csv
import logging
import time
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from pathos.multiprocessing import ProcessPool

from ethseq.errors import DataError
from ethseq.ingest.account_filter import count_involvements, filter_accounts
from ethseq.ingest.corpus_io import Corpus
from ethseq.ingest.csv_parser import (
    RowDiagnostic,
    iter_transactions,
    parse_account_kinds,
    parse_labels,
    parse_token_transfers,
)
from ethseq.ingest.ingest_config import IngestConfig
from ethseq.ingest.records import AccountKind, AccountLabel, AccountMeta, RawTransaction
from ethseq.statistics import IngestCounters, Statistics

PathLike = Union[str, Path]

# (path, first data row, number of data rows or None for the rest of the file)
ShardSpec = Tuple[str, int, Optional[int]]
ShardResult = Tuple[List[RawTransaction], List[RowDiagnostic], Dict[IngestCounters, int]]


def _open_text(path: PathLike):  # type: ignore
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Input file not found: {path}")
    return open(path, newline="", encoding="utf-8")


def count_rows(path: PathLike) -> int:
    """
    Number of data rows of a CSV file, header excluded, read one row at a time.
    """
    with _open_text(path) as stream:
        return max(0, sum(1 for _ in csv.reader(stream)) - 1)


def plan_shards(paths: Sequence[PathLike], shard_rows: int = 0) -> List[ShardSpec]:
    """
    Cut every file into row ranges of at most ``shard_rows`` data rows, in
    file and row order. ``shard_rows`` of 0 keeps each file whole.

    :param paths: Transaction CSV files.
    :type paths: Sequence[PathLike]
    :param shard_rows: Maximum data rows per shard.
    :type shard_rows: int
    :return: Shards covering every row of every file exactly once.
    :rtype: List[ShardSpec]
    :raises DataError: If a file does not exist.
    """
    shards: List[ShardSpec] = []
    for path in paths:
        name = str(path)
        if not Path(name).is_file():
            raise DataError(f"Input file not found: {name}")
        if shard_rows <= 0:
            shards.append((name, 0, None))
            continue
        n_rows = count_rows(name)
        if n_rows == 0:
            shards.append((name, 0, None))
            continue
        shards.extend((name, first, shard_rows) for first in range(0, n_rows, shard_rows))
    return shards


def _parse_shard(shard: ShardSpec) -> ShardResult:
    """
    Worker body: parse one row range of a transactions CSV in isolation.
    """
    path, first_row, max_rows = shard
    stats = Statistics()
    diagnostics: List[RowDiagnostic] = []
    with _open_text(path) as stream:
        records = list(iter_transactions(stream, diagnostics, stats, first_row, max_rows))
    counts = {c: stats.counts[c] for c in IngestCounters}
    return records, diagnostics, counts


def load_transaction_shards(
    paths: Sequence[PathLike],
    threads: int = 1,
    stats: Optional[Statistics] = None,
    diagnostics: Optional[List[RowDiagnostic]] = None,
    shard_rows: int = 0,
) -> List[RawTransaction]:
    """
    Parse transaction CSV files, concurrently when ``threads > 1``.
    Files are cut into shards of at most ``shard_rows`` rows so a worker never
    holds more than one shard; results are merged in file and row order, so
    the output does not depend on the number of workers or the shard size.

    :param paths: Transaction CSV files.
    :type paths: Sequence[PathLike]
    :param threads: Maximum number of worker processes.
    :type threads: int
    :param stats: Counters to accumulate shard counts into, if provided.
    :type stats: Optional[Statistics]
    :param diagnostics: Collects rejected rows of every shard, if provided.
    :type diagnostics: Optional[List[RowDiagnostic]]
    :param shard_rows: Maximum data rows per shard; 0 keeps each file whole.
    :type shard_rows: int
    :return: All transactions, shard after shard.
    :rtype: List[RawTransaction]
    """
    shards = plan_shards(paths, shard_rows)
    logging.info(f"Parsing {len(paths)} transaction file(s) as {len(shards)} shard(s)")

    results: Iterable[ShardResult]
    if threads > 1 and len(shards) > 1:
        pool = ProcessPool(nodes=min(threads, len(shards)))
        try:
            results = pool.imap(_parse_shard, shards)
            merged = _merge(results, stats, diagnostics)
        finally:
            pool.close()
            pool.join()
            pool.clear()
        return merged
    # one shard in memory at a time
    return _merge(map(_parse_shard, shards), stats, diagnostics)


def _merge(
    results: Iterable[ShardResult],
    stats: Optional[Statistics],
    diagnostics: Optional[List[RowDiagnostic]],
) -> List[RawTransaction]:
    merged: List[RawTransaction] = []
    for records, shard_diagnostics, counts in results:
        merged.extend(records)
        if diagnostics is not None:
            diagnostics.extend(shard_diagnostics)
        if stats is not None:
            for counter, value in counts.items():
                stats.increment(counter, value)
    return merged


def ingest_files(
    transaction_paths: Sequence[PathLike],
    token_path: Optional[PathLike] = None,
    labels_path: Optional[PathLike] = None,
    kinds_path: Optional[PathLike] = None,
    config: IngestConfig = IngestConfig(),
    diagnostics: Optional[List[RowDiagnostic]] = None,
) -> Corpus:
    """
    Build a corpus from Ethereum-ETL exports and the side files.

    Every EOA involved in a transaction is a candidate account. Unlabeled
    accounts are NORMAL. Candidates then go through the transaction-count and
    label filters; survivors are the accounts whose sequences get built.

    :param transaction_paths: One or more ``transactions.csv`` shards.
    :type transaction_paths: Sequence[PathLike]
    :param token_path: ``token_transfers.csv``, if any.
    :type token_path: Optional[PathLike]
    :param labels_path: ``address,label`` file, if any.
    :type labels_path: Optional[PathLike]
    :param kinds_path: Address-kind file, if any; unlisted addresses are EOAs.
    :type kinds_path: Optional[PathLike]
    :param config: Filter bounds and worker count.
    :type config: IngestConfig
    :param diagnostics: Collects rejected rows, if provided.
    :type diagnostics: Optional[List[RowDiagnostic]]
    :return: The ingested corpus.
    :rtype: Corpus
    """
    start = time.time()
    stats = Statistics()

    contracts: Set[str] = set()
    if kinds_path is not None:
        with _open_text(kinds_path) as stream:
            contracts = parse_account_kinds(stream, diagnostics)

    labels: Dict[str, AccountLabel] = {}
    if labels_path is not None:
        with _open_text(labels_path) as stream:
            labels = parse_labels(stream, diagnostics)

    transactions = load_transaction_shards(
        transaction_paths, config.threads, stats, diagnostics, config.shard_rows
    )

    token_events = []
    if token_path is not None:
        with _open_text(token_path) as stream:
            token_events = parse_token_transfers(stream, contracts, diagnostics, stats)

    tx_counts = count_involvements(transactions)
    candidates = sorted(
        address for address in set(tx_counts) | set(labels) if address not in contracts
    )
    metas = [
        AccountMeta(address, AccountKind.EOA, labels.get(address, AccountLabel.NORMAL))
        for address in candidates
    ]
    kept = filter_accounts(
        metas,
        tx_counts,
        config.min_tx,
        config.max_tx,
        frozenset(config.excluded_labels),
    )
    logging.info(
        f"Ingested {len(transactions)} transactions and {len(token_events)} token events; "
        f"kept {len(kept)} of {len(metas)} accounts"
    )
    stats.log_info("ingest", time.time() - start)
    return Corpus(transactions, token_events, kept, frozenset(contracts))
