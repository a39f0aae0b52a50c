import logging
from collections import defaultdict
from dataclasses import replace
from typing import AbstractSet, Dict, Iterable, List, Mapping, Sequence, Tuple

from ethseq.ingest.records import RawTransaction, TokenTransferEvent
from ethseq.seqgen.sequence import (
    CounterpartyKind,
    Direction,
    TxRecord,
    TxSequence,
    head_record,
    reindex,
)
from ethseq.seqgen.vocabulary import Vocabulary


def build_sequence(
    owner: str,
    involved_txs: Iterable[RawTransaction],
    vocab: Vocabulary,
    contracts: AbstractSet[str] = frozenset(),
) -> TxSequence:
    """
    Build an account's raw transaction sequence: a dummy self-transaction head,
    then one record per transaction, newest first. Equal timestamps are ordered
    by ascending transaction hash. Failed transactions are kept and flagged.

    A transfer from the owner to itself is an Out record whose counterparty is the owner.

    :param owner: Canonical address of the account.
    :type owner: str
    :param involved_txs: Transactions the owner sent or received.
    :type involved_txs: Iterable[RawTransaction]
    :param vocab: Address vocabulary.
    :type vocab: Vocabulary
    :param contracts: Known contract addresses.
    :type contracts: AbstractSet[str]
    :return: The owner's sequence.
    :rtype: TxSequence
    """
    owner_id = vocab.id_of(owner)
    ordered = sorted(involved_txs, key=lambda tx: (-tx.block_timestamp, tx.tx_hash))
    records = [head_record(owner_id)]
    for tx in ordered:
        if tx.from_address == owner:
            direction, other = Direction.OUT, tx.to_address
        elif tx.to_address == owner:
            direction, other = Direction.IN, tx.from_address
        else:
            raise ValueError(f"Transaction {tx.tx_hash} does not involve {owner}")
        records.append(
            TxRecord(
                counterparty=vocab.id_of(other),
                direction=direction,
                counterparty_kind=(
                    CounterpartyKind.CONTRACT if other in contracts else CounterpartyKind.EOA
                ),
                raw_timestamp=tx.block_timestamp,
                raw_amount_wei=tx.value_wei,
                tx_hashes=(tx.tx_hash,),
                failed=tx.failed,
            )
        )
    return TxSequence(owner_id, reindex(records))


def group_by_owner(
    transactions: Iterable[RawTransaction], owners: AbstractSet[str]
) -> Dict[str, List[RawTransaction]]:
    """
    Collect, for each owner, every transaction it sent or received.
    """
    grouped: Dict[str, List[RawTransaction]] = defaultdict(list)
    for tx in transactions:
        if tx.from_address in owners:
            grouped[tx.from_address].append(tx)
        if tx.to_address in owners and tx.to_address != tx.from_address:
            grouped[tx.to_address].append(tx)
    return grouped


def group_token_events(
    events: Iterable[TokenTransferEvent],
    vocab: Vocabulary,
    known_hashes: AbstractSet[str],
) -> Dict[str, Tuple[int, ...]]:
    """
    Map each transaction hash to the vocabulary ids of the EOAs its ERC-20
    transfers paid. Events whose transaction is not in the corpus are ignored.

    :param events: EOA-recipient transfer events.
    :type events: Iterable[TokenTransferEvent]
    :param vocab: Address vocabulary.
    :type vocab: Vocabulary
    :param known_hashes: Hashes of the ingested transactions.
    :type known_hashes: AbstractSet[str]
    :return: Transaction hash to recipient ids, in event order.
    :rtype: Dict[str, Tuple[int, ...]]
    """
    grouped: Dict[str, List[int]] = defaultdict(list)
    unknown = 0
    for event in events:
        if event.tx_hash not in known_hashes:
            unknown += 1
            continue
        grouped[event.tx_hash].append(vocab.id_of(event.recipient_eoa))
    if unknown:
        logging.warning(f"Ignored {unknown} token events referencing unknown transactions")
    return {h: tuple(ids) for h, ids in grouped.items()}


def attach_token_recipients(
    seq: TxSequence, events_by_txhash: Mapping[str, Sequence[int]]
) -> TxSequence:
    """
    Give each Out record the recipients of the ERC-20 transfers its
    transactions emitted. In records never gain recipients.

    :param seq: The sequence.
    :type seq: TxSequence
    :param events_by_txhash: Transaction hash to recipient EOA ids.
    :type events_by_txhash: Mapping[str, Sequence[int]]
    :return: The sequence with recipients attached.
    :rtype: TxSequence
    """
    body = []
    for record in seq.body:
        if record.direction is Direction.OUT:
            recipients = tuple(
                rid for h in record.tx_hashes for rid in events_by_txhash.get(h, ())
            )
            if recipients != record.token_recipients:
                record = replace(record, token_recipients=recipients)
        body.append(record)
    return seq.with_body(body)
