from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ethseq.seqgen.sequence import TxSequence
from ethseq.seqgen.vocabulary import NUM_SPECIALS


@dataclass(frozen=True)
class FrequencyTable:
    """
    Counterparty frequencies ranked by descending frequency, ties by ascending id.
    Immutable once built.

    :param ids: Vocabulary ids in rank order.
    :type ids: np.ndarray
    :param frequencies: Frequencies in rank order.
    :type frequencies: np.ndarray
    :param ranks: Vocabulary id to rank, -1 for unranked ids.
    :type ranks: np.ndarray
    """

    ids: np.ndarray
    frequencies: np.ndarray
    ranks: np.ndarray

    @property
    def max_rank(self) -> int:
        return len(self.ids)

    def rank_of(self, idx: int) -> int:
        return int(self.ranks[idx]) if idx < len(self.ranks) else -1

    def frequency_of(self, idx: int) -> int:
        rank = self.rank_of(idx)
        return int(self.frequencies[rank]) if rank >= 0 else 0


def build_frequency_table(sequences: Iterable[TxSequence], vocab_size: int) -> FrequencyTable:
    """
    Count how often each address occurs as a counterparty (heads excluded)
    and rank the addresses. Special tokens are never ranked.

    :param sequences: The sequence corpus.
    :type sequences: Iterable[TxSequence]
    :param vocab_size: Vocabulary size.
    :type vocab_size: int
    :return: The frequency table.
    :rtype: FrequencyTable
    :raises ValueError: If no address occurs.
    """
    counts = np.zeros(vocab_size, dtype=np.int64)
    for seq in sequences:
        cps = seq.counterparties()[1:]
        np.add.at(counts, cps, 1)
    counts[:NUM_SPECIALS] = 0

    present = np.flatnonzero(counts)
    if len(present) == 0:
        raise ValueError("Cannot build a frequency table from an empty corpus")
    # lexsort sorts by the last key first
    order = np.lexsort((present, -counts[present]))
    ids = present[order]
    ranks = np.full(vocab_size, -1, dtype=np.int64)
    ranks[ids] = np.arange(len(ids))
    return FrequencyTable(ids=ids, frequencies=counts[ids], ranks=ranks)
