from typing import Iterable, Optional

from ethseq.configurable import Configurable
from ethseq.ingest.records import AccountLabel


class IngestConfig(Configurable):
    """
    Configuration class for ingestion.

    :param min_tx: Accounts involved in fewer transactions are dropped (default: 3).
    :type min_tx: int
    :param max_tx: Accounts involved in more transactions are dropped (default: 10000).
                   Large exchanges and hot wallets otherwise dominate the corpus.
    :type max_tx: int
    :param excluded_labels: Labels that are never kept (default: EXCLUDED).
    :type excluded_labels: Optional[Iterable[AccountLabel]]
    :param threads: Number of worker processes used for shard parsing (default: 1).
    :type threads: int
    :param shard_rows: Maximum data rows per parsing shard; large files are cut into row
                       ranges so a worker holds one shard at a time. 0 keeps each file
                       whole (default: 250000).
    :type shard_rows: int
    """

    def __init__(
        self,
        min_tx: int = 3,
        max_tx: int = 10000,
        excluded_labels: Optional[Iterable[AccountLabel]] = None,
        threads: int = 1,
        shard_rows: int = 250000,
    ) -> None:
        self.min_tx = min_tx
        self.max_tx = max_tx
        self.excluded_labels = [
            label if isinstance(label, AccountLabel) else AccountLabel(label)
            for label in (
                excluded_labels if excluded_labels is not None else [AccountLabel.EXCLUDED]
            )
        ]
        self.threads = threads
        self.shard_rows = shard_rows

        if shard_rows < 0:
            raise ValueError(f"shard_rows must not be negative, got {shard_rows}")
