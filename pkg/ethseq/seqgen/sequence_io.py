"""
Sequence file.

Layout: the magic ``ETHSEQ-SQ1\\n``, a big-endian u64 header length, a UTF-8
JSON header, then the sequences back to back. Each sequence is a fixed
``owner, piece, length`` prefix followed by its records; a record is a fixed
struct followed by its token recipients (u32 each) and its transaction hashes
(32 bytes each).
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Dict, List, Union

from ethseq.errors import CorpusFormatError
from ethseq.seqgen.sequence import CounterpartyKind, Direction, TxRecord, TxSequence
from ethseq.seqgen.vocabulary import Vocabulary

MAGIC = b"ETHSEQ-SQ1\n"
FORMAT_VERSION = 1

_HEADER_LEN = struct.Struct(">Q")
_SEQUENCE = struct.Struct(">IHH")
_RECORD = struct.Struct(">IBBBBBHq32sIBHH")


@dataclass
class SequenceCorpus:
    """
    The output of sequence generation.

    :param vocab: Address vocabulary the ids refer to.
    :type vocab: Vocabulary
    :param sequences: Sequence pieces, grouped by owner, pieces in order.
    :type sequences: List[TxSequence]
    :param first_seen: Owner id to the timestamp of its earliest transaction.
    :type first_seen: Dict[int, int]
    :param raw_ratio: Repetitiveness ratio before de-duplication.
    :type raw_ratio: float
    :param dedup_ratio: Repetitiveness ratio after de-duplication.
    :type dedup_ratio: float
    :param config: Settings the sequences were generated with.
    :type config: Dict[str, Any]
    """

    vocab: Vocabulary
    sequences: List[TxSequence] = field(default_factory=list)
    first_seen: Dict[int, int] = field(default_factory=dict)
    raw_ratio: float = 0.0
    dedup_ratio: float = 0.0
    config: Dict[str, Any] = field(default_factory=dict)

    def by_owner(self) -> Dict[int, List[TxSequence]]:
        """
        :return: Owner id to its pieces, owners in first-appearance order.
        :rtype: Dict[int, List[TxSequence]]
        """
        grouped: Dict[int, List[TxSequence]] = {}
        for seq in self.sequences:
            grouped.setdefault(seq.owner, []).append(seq)
        return grouped


def _write_sequence(stream: BinaryIO, seq: TxSequence) -> None:
    stream.write(_SEQUENCE.pack(seq.owner, seq.piece, len(seq)))
    for r in seq.records:
        stream.write(
            _RECORD.pack(
                r.counterparty,
                int(r.direction),
                int(r.counterparty_kind),
                r.amount_bin,
                r.count_bin,
                r.time_bin,
                r.position,
                r.raw_timestamp,
                r.raw_amount_wei.to_bytes(32, "big"),
                r.agg_count,
                int(r.failed),
                len(r.token_recipients),
                len(r.tx_hashes),
            )
        )
        if r.token_recipients:
            stream.write(struct.pack(f">{len(r.token_recipients)}I", *r.token_recipients))
        for h in r.tx_hashes:
            stream.write(bytes.fromhex(h[2:]))


def write_sequences(path: Union[str, Path], corpus: SequenceCorpus) -> None:
    """
    Persist the sequence pieces. The vocabulary is written separately; the
    header carries its hash.

    :param path: Destination file.
    :type path: Union[str, Path]
    :param corpus: Sequences to write.
    :type corpus: SequenceCorpus
    """
    header = {
        "version": FORMAT_VERSION,
        "n_sequences": len(corpus.sequences),
        "vocab_hash": corpus.vocab.content_hash(),
        "vocab_size": len(corpus.vocab),
        "first_seen": {str(k): v for k, v in sorted(corpus.first_seen.items())},
        "raw_ratio": corpus.raw_ratio,
        "dedup_ratio": corpus.dedup_ratio,
        "config": corpus.config,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as stream:
        stream.write(MAGIC)
        stream.write(_HEADER_LEN.pack(len(blob)))
        stream.write(blob)
        for seq in corpus.sequences:
            _write_sequence(stream, seq)
    logging.info(f"Wrote {len(corpus.sequences)} sequence pieces to {path}")


def _read(stream: BinaryIO, n: int, path: Path) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise CorpusFormatError(f"Sequence file {path} is truncated.")
    return data


def _read_sequence(stream: BinaryIO, path: Path) -> TxSequence:
    owner, piece, length = _SEQUENCE.unpack(_read(stream, _SEQUENCE.size, path))
    records = []
    for _ in range(length):
        (
            counterparty,
            direction,
            kind,
            amount,
            count,
            recency,
            position,
            ts,
            wei,
            agg,
            failed,
            n_recipients,
            n_hashes,
        ) = _RECORD.unpack(_read(stream, _RECORD.size, path))
        recipients = (
            struct.unpack(f">{n_recipients}I", _read(stream, 4 * n_recipients, path))
            if n_recipients
            else ()
        )
        hashes = tuple("0x" + _read(stream, 32, path).hex() for _ in range(n_hashes))
        records.append(
            TxRecord(
                counterparty=counterparty,
                direction=Direction(direction),
                counterparty_kind=CounterpartyKind(kind),
                amount_bin=amount,
                count_bin=count,
                time_bin=recency,
                position=position,
                raw_timestamp=ts,
                raw_amount_wei=int.from_bytes(wei, "big"),
                agg_count=agg,
                token_recipients=tuple(recipients),
                tx_hashes=hashes,
                failed=bool(failed),
            )
        )
    return TxSequence(owner, records, piece)


def read_sequences(path: Union[str, Path], vocab: Vocabulary) -> SequenceCorpus:
    """
    Load a sequence file written against ``vocab``.

    :param path: Sequence file.
    :type path: Union[str, Path]
    :param vocab: The vocabulary written alongside it.
    :type vocab: Vocabulary
    :return: The sequence corpus.
    :rtype: SequenceCorpus
    :raises CorpusFormatError: On a wrong magic, truncation or a vocabulary mismatch.
    """
    path = Path(path)
    with open(path, "rb") as stream:
        if stream.read(len(MAGIC)) != MAGIC:
            raise CorpusFormatError(f"{path} is not a sequence file (bad magic).")
        (length,) = _HEADER_LEN.unpack(_read(stream, _HEADER_LEN.size, path))
        try:
            header = json.loads(_read(stream, length, path).decode("utf-8"))
        except ValueError as e:
            raise CorpusFormatError(f"Sequence file {path} has a corrupt header: {e}")
        if header.get("version") != FORMAT_VERSION:
            raise CorpusFormatError(
                f"Sequence file {path} has unsupported version {header.get('version')}."
            )
        if header["vocab_hash"] != vocab.content_hash():
            raise CorpusFormatError(f"Sequence file {path} was built with another vocabulary.")
        sequences = [_read_sequence(stream, path) for _ in range(header["n_sequences"])]
        if stream.read(1):
            raise CorpusFormatError(f"Sequence file {path} has trailing data.")
    return SequenceCorpus(
        vocab=vocab,
        sequences=sequences,
        first_seen={int(k): int(v) for k, v in header["first_seen"].items()},
        raw_ratio=header["raw_ratio"],
        dedup_ratio=header["dedup_ratio"],
        config=header["config"],
    )
