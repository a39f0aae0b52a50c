"""
Binary corpus file.

Layout: the magic ``ETHSEQ1\\n`` followed by records, each a one-byte tag, a
big-endian u32 payload length and the payload. Unknown tags are skipped by
length so newer writers stay readable. The file ends with a ``Z`` record; a
file without it is truncated.
"""

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from types import TracebackType
from typing import BinaryIO, FrozenSet, Iterator, List, Optional, Type, Union

from ethseq.errors import CorpusFormatError
from ethseq.ingest.records import (
    AccountKind,
    AccountLabel,
    AccountMeta,
    RawTransaction,
    TokenTransferEvent,
    TxStatus,
)

MAGIC = b"ETHSEQ1\n"

_TAG_TX = b"T"
_TAG_TOKEN = b"E"
_TAG_ACCOUNT = b"A"
_TAG_CONTRACT = b"C"
_TAG_END = b"Z"

_FRAME = struct.Struct(">cI")
_TX = struct.Struct(">32s20s20s32sqB")
_TOKEN = struct.Struct(">32s20s20s32s")
_ACCOUNT = struct.Struct(">20sBB")
_CONTRACT = struct.Struct(">20s")

_FLAG_FAILED = 1
_FLAG_NO_RECEIVER = 2

_KINDS = list(AccountKind)
_LABELS = list(AccountLabel)

CorpusRecord = Union[RawTransaction, TokenTransferEvent, AccountMeta, str]


@dataclass
class Corpus:
    """
    Everything the downstream stages need from ingestion.

    :param transactions: All parsed external transactions.
    :type transactions: List[RawTransaction]
    :param token_events: ERC-20 transfers to EOAs.
    :type token_events: List[TokenTransferEvent]
    :param accounts: Accounts kept by the filter; their sequences get built.
    :type accounts: List[AccountMeta]
    :param contracts: Known contract addresses.
    :type contracts: FrozenSet[str]
    """

    transactions: List[RawTransaction] = field(default_factory=list)
    token_events: List[TokenTransferEvent] = field(default_factory=list)
    accounts: List[AccountMeta] = field(default_factory=list)
    contracts: FrozenSet[str] = frozenset()


def _addr_bytes(address: str) -> bytes:
    return bytes.fromhex(address[2:]) if address else bytes(20)


def _addr_str(raw: bytes) -> str:
    return "0x" + raw.hex()


def _u256(value: int) -> bytes:
    return value.to_bytes(32, "big")


class CorpusWriter:
    """
    Streaming writer; records are appended as they come so callers never need
    the whole corpus in memory.
    """

    def __init__(self, path: Union[str, Path]) -> None:
        self._path = Path(path)
        self._stream: Optional[BinaryIO] = None

    def __enter__(self) -> "CorpusWriter":
        self._stream = open(self._path, "wb")
        self._stream.write(MAGIC)
        return self

    def __exit__(
        self,
        exc_type: Optional[Type[BaseException]],
        exc: Optional[BaseException],
        tb: Optional[TracebackType],
    ) -> None:
        assert self._stream is not None, "CorpusWriter used outside a with block"
        if exc_type is None:
            self._frame(_TAG_END, b"")
        self._stream.close()
        self._stream = None

    def _frame(self, tag: bytes, payload: bytes) -> None:
        assert self._stream is not None, "CorpusWriter used outside a with block"
        self._stream.write(_FRAME.pack(tag, len(payload)))
        self._stream.write(payload)

    def write_transaction(self, tx: RawTransaction) -> None:
        flags = (_FLAG_FAILED if tx.failed else 0) | (
            0 if tx.to_address else _FLAG_NO_RECEIVER
        )
        self._frame(
            _TAG_TX,
            _TX.pack(
                bytes.fromhex(tx.tx_hash[2:]),
                _addr_bytes(tx.from_address),
                _addr_bytes(tx.to_address),
                _u256(tx.value_wei),
                tx.block_timestamp,
                flags,
            ),
        )

    def write_token_event(self, event: TokenTransferEvent) -> None:
        self._frame(
            _TAG_TOKEN,
            _TOKEN.pack(
                bytes.fromhex(event.tx_hash[2:]),
                _addr_bytes(event.contract_address),
                _addr_bytes(event.recipient_eoa),
                _u256(event.value_raw),
            ),
        )

    def write_account(self, account: AccountMeta) -> None:
        self._frame(
            _TAG_ACCOUNT,
            _ACCOUNT.pack(
                _addr_bytes(account.address),
                _KINDS.index(account.kind),
                _LABELS.index(account.label),
            ),
        )

    def write_contract(self, address: str) -> None:
        self._frame(_TAG_CONTRACT, _CONTRACT.pack(_addr_bytes(address)))


def write_corpus(path: Union[str, Path], corpus: Corpus) -> None:
    """
    Persist a corpus. Contracts are written in sorted order so the file is a
    pure function of the corpus.

    :param path: Destination file.
    :type path: Union[str, Path]
    :param corpus: The corpus to write.
    :type corpus: Corpus
    """
    with CorpusWriter(path) as writer:
        for address in sorted(corpus.contracts):
            writer.write_contract(address)
        for account in corpus.accounts:
            writer.write_account(account)
        for tx in corpus.transactions:
            writer.write_transaction(tx)
        for event in corpus.token_events:
            writer.write_token_event(event)
    logging.info(
        f"Wrote corpus {path}: {len(corpus.transactions)} transactions, "
        f"{len(corpus.token_events)} token events, {len(corpus.accounts)} accounts"
    )


def _read_exact(stream: BinaryIO, n: int, path: Path) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise CorpusFormatError(f"Corpus file {path} is truncated.")
    return data


def _decode(tag: bytes, payload: bytes, path: Path) -> Optional[CorpusRecord]:
    try:
        if tag == _TAG_TX:
            tx_hash, sender, receiver, value, ts, flags = _TX.unpack(payload)
            return RawTransaction(
                tx_hash="0x" + tx_hash.hex(),
                from_address=_addr_str(sender),
                to_address="" if flags & _FLAG_NO_RECEIVER else _addr_str(receiver),
                value_wei=int.from_bytes(value, "big"),
                block_timestamp=ts,
                status=TxStatus.FAILED if flags & _FLAG_FAILED else TxStatus.SUCCESS,
            )
        if tag == _TAG_TOKEN:
            tx_hash, contract, recipient, value = _TOKEN.unpack(payload)
            return TokenTransferEvent(
                tx_hash="0x" + tx_hash.hex(),
                contract_address=_addr_str(contract),
                recipient_eoa=_addr_str(recipient),
                value_raw=int.from_bytes(value, "big"),
            )
        if tag == _TAG_ACCOUNT:
            address, kind, label = _ACCOUNT.unpack(payload)
            return AccountMeta(_addr_str(address), _KINDS[kind], _LABELS[label])
        if tag == _TAG_CONTRACT:
            (address,) = _CONTRACT.unpack(payload)
            return _addr_str(address)
    except (struct.error, IndexError, ValueError) as e:
        raise CorpusFormatError(f"Corpus file {path} has a corrupt {tag!r} record: {e}")
    logging.debug(f"Skipping unknown record tag {tag!r} in {path}")
    return None


def iter_corpus(path: Union[str, Path]) -> Iterator[CorpusRecord]:
    """
    Stream the records of a corpus file in write order. Contract records are
    yielded as plain address strings.

    :param path: Corpus file.
    :type path: Union[str, Path]
    :return: Iterator over decoded records.
    :rtype: Iterator[CorpusRecord]
    :raises CorpusFormatError: On a wrong magic, a corrupt record or truncation.
    """
    path = Path(path)
    with open(path, "rb") as stream:
        if stream.read(len(MAGIC)) != MAGIC:
            raise CorpusFormatError(f"{path} is not a corpus file (bad magic).")
        while True:
            tag, length = _FRAME.unpack(_read_exact(stream, _FRAME.size, path))
            payload = _read_exact(stream, length, path)
            if tag == _TAG_END:
                return
            record = _decode(tag, payload, path)
            if record is not None:
                yield record


def read_corpus(path: Union[str, Path]) -> Corpus:
    """
    Load a whole corpus file.

    :param path: Corpus file.
    :type path: Union[str, Path]
    :return: The corpus.
    :rtype: Corpus
    """
    corpus = Corpus()
    contracts: List[str] = []
    for record in iter_corpus(path):
        if isinstance(record, RawTransaction):
            corpus.transactions.append(record)
        elif isinstance(record, TokenTransferEvent):
            corpus.token_events.append(record)
        elif isinstance(record, AccountMeta):
            corpus.accounts.append(record)
        else:
            contracts.append(record)
    corpus.contracts = frozenset(contracts)
    return corpus
