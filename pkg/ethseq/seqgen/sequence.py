from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import List, Tuple

import numpy as np

# Feature table sizes. The last id of each binned feature is its Null bin,
# used by the dummy self-transaction at the head of every sequence.
AMOUNT_BINS = 22
COUNT_BINS = 12
TIME_BINS = 17
AMOUNT_NULL = AMOUNT_BINS - 1
COUNT_NULL = COUNT_BINS - 1
TIME_NULL = TIME_BINS - 1


class Direction(IntEnum):
    IN = 0
    OUT = 1
    SELF = 2


class CounterpartyKind(IntEnum):
    EOA = 0
    CONTRACT = 1
    NULL = 2


@dataclass(frozen=True)
class TxRecord:
    """
    One (possibly aggregated) interaction between a sequence owner and a counterparty.

    :param counterparty: Vocabulary id of the other party (the owner for the head).
    :type counterparty: int
    :param direction: In when the owner received, Out when the owner sent.
    :type direction: Direction
    :param counterparty_kind: Account type of the counterparty.
    :type counterparty_kind: CounterpartyKind
    :param amount_bin: Binned amount.
    :type amount_bin: int
    :param count_bin: Binned aggregation count.
    :type count_bin: int
    :param time_bin: Binned recency.
    :type time_bin: int
    :param position: Index within the owning sequence.
    :type position: int
    :param raw_timestamp: Unix seconds; earliest timestamp for aggregated records.
    :type raw_timestamp: int
    :param raw_amount_wei: Total amount in wei.
    :type raw_amount_wei: int
    :param agg_count: Number of transactions folded into this record.
    :type agg_count: int
    :param token_recipients: Vocabulary ids of the EOAs that received ERC-20 tokens.
    :type token_recipients: Tuple[int, ...]
    :param tx_hashes: Hashes of the originating transactions.
    :type tx_hashes: Tuple[str, ...]
    :param failed: Whether the originating transaction failed.
    :type failed: bool
    """

    counterparty: int
    direction: Direction
    counterparty_kind: CounterpartyKind = CounterpartyKind.EOA
    amount_bin: int = AMOUNT_NULL
    count_bin: int = COUNT_NULL
    time_bin: int = TIME_NULL
    position: int = 0
    raw_timestamp: int = 0
    raw_amount_wei: int = 0
    agg_count: int = 1
    token_recipients: Tuple[int, ...] = ()
    tx_hashes: Tuple[str, ...] = ()
    failed: bool = False

    def __post_init__(self) -> None:
        if self.agg_count < 1:
            raise ValueError(f"agg_count must be positive, got {self.agg_count}")

    @property
    def is_head(self) -> bool:
        return self.direction is Direction.SELF


def head_record(owner: int) -> TxRecord:
    """
    The dummy self-transaction anchoring the owner's representation.
    Every feature but the address is Null.
    """
    return TxRecord(
        counterparty=owner,
        direction=Direction.SELF,
        counterparty_kind=CounterpartyKind.NULL,
    )


def reindex(records: List[TxRecord]) -> List[TxRecord]:
    return [r if r.position == i else replace(r, position=i) for i, r in enumerate(records)]


@dataclass
class TxSequence:
    """
    An account's transactions, newest first, behind a dummy self-transaction head.

    :param owner: Vocabulary id of the account.
    :type owner: int
    :param records: Head record followed by the account's records.
    :type records: List[TxRecord]
    :param piece: Index of this piece when a long sequence was split.
    :type piece: int
    """

    owner: int
    records: List[TxRecord] = field(default_factory=list)
    piece: int = 0

    def __post_init__(self) -> None:
        if not self.records:
            self.records = [head_record(self.owner)]
        assert self.records[0].is_head, "A sequence must start with its self-transaction"
        assert all(
            not r.is_head for r in self.records[1:]
        ), "Self-transactions are only allowed at the head"

    def __len__(self) -> int:
        return len(self.records)

    @property
    def body(self) -> List[TxRecord]:
        return self.records[1:]

    def with_body(self, body: List[TxRecord]) -> "TxSequence":
        return TxSequence(self.owner, reindex([self.records[0], *body]), self.piece)

    def counterparties(self) -> np.ndarray:
        return np.array([r.counterparty for r in self.records], dtype=np.int64)


@dataclass(frozen=True)
class MaskedSequence:
    """
    A sequence with some counterparties hidden behind the [MASK] token.

    :param base: The unmasked sequence.
    :type base: TxSequence
    :param masked_positions: Sorted masked indices, never 0.
    :type masked_positions: Tuple[int, ...]
    :param positives: Original counterparty ids, aligned with ``masked_positions``.
    :type positives: Tuple[int, ...]
    :param mask_id: Vocabulary id substituted at masked positions.
    :type mask_id: int
    """

    base: TxSequence
    masked_positions: Tuple[int, ...]
    positives: Tuple[int, ...]
    mask_id: int = 1

    def counterparties(self) -> np.ndarray:
        """
        :return: Counterparty ids as the encoder sees them.
        :rtype: np.ndarray
        """
        ids = self.base.counterparties()
        ids[list(self.masked_positions)] = self.mask_id
        return ids

    def is_masked(self) -> np.ndarray:
        flags = np.zeros(len(self.base), dtype=bool)
        flags[list(self.masked_positions)] = True
        return flags

    def unmask(self) -> np.ndarray:
        ids = self.counterparties()
        ids[list(self.masked_positions)] = self.positives
        return ids
