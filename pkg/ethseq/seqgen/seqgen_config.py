from ethseq.configurable import Configurable


class SeqGenConfig(Configurable):
    """
    Configuration class for sequence generation.

    :param max_seq_len: Maximum sequence length, head included (default: 100).
                        Longer sequences are split into pieces.
    :type max_seq_len: int
    :param dedup: Fold repeated transactions to the same counterparty (default: True).
                  Failed transactions are dropped either way.
    :type dedup: bool
    :param dedup_window_hours: Maximum first-to-last span of a folded run (default: 72).
    :type dedup_window_hours: float
    """

    def __init__(
        self,
        max_seq_len: int = 100,
        dedup: bool = True,
        dedup_window_hours: float = 72.0,
    ) -> None:
        if max_seq_len < 2:
            raise ValueError(f"max_seq_len must be at least 2, got {max_seq_len}")
        self.max_seq_len = max_seq_len
        self.dedup = dedup
        self.dedup_window_hours = dedup_window_hours
