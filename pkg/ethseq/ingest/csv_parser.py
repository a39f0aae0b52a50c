import csv
import itertools
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from typing import (
    AbstractSet,
    Dict,
    Iterable,
    Iterator,
    List,
    Optional,
    Set,
    TextIO,
    Tuple,
)

from ethseq.errors import SchemaError
from ethseq.ingest.records import (
    AccountKind,
    AccountLabel,
    RawTransaction,
    TokenTransferEvent,
    TxStatus,
)
from ethseq.statistics import IngestCounters, Statistics

TRANSACTION_COLUMNS = (
    "hash",
    "from_address",
    "to_address",
    "value",
    "block_timestamp",
    "receipt_status",
)
TOKEN_TRANSFER_COLUMNS = ("transaction_hash", "token_address", "to_address", "value")

_HEX_DIGITS = frozenset("0123456789abcdef")


@dataclass(frozen=True)
class RowDiagnostic:
    """
    A rejected CSV row.

    :param line: 1-based line number in the source file (header is line 1).
    :type line: int
    :param message: Why the row was rejected.
    :type message: str
    """

    line: int
    message: str


def _hex(raw: str, n_bytes: int, what: str) -> str:
    value = raw.strip().lower()
    body = value[2:] if value.startswith("0x") else value
    if len(body) != 2 * n_bytes or not set(body) <= _HEX_DIGITS:
        raise ValueError(f"{what} '{raw}' is not a {n_bytes}-byte hex string")
    return "0x" + body


def normalize_address(raw: str) -> str:
    """
    Canonicalize a 20-byte hex address to ``0x`` + lower-case hex.
    Checksum casing is ignored.

    :param raw: Address as found in the input.
    :type raw: str
    :return: Canonical address.
    :rtype: str
    :raises ValueError: If the value is not a 20-byte hex string.
    """
    return _hex(raw, 20, "address")


def normalize_hash(raw: str) -> str:
    return _hex(raw, 32, "hash")


def _parse_amount(raw: str) -> int:
    text = raw.strip()
    if not text:
        return 0
    try:
        return int(text)
    except ValueError:
        pass
    # BigQuery exports occasionally carry NUMERIC values like "1.5E+18"
    try:
        dec = Decimal(text)
    except InvalidOperation:
        raise ValueError(f"value '{raw}' is not a number")
    if dec != dec.to_integral_value():
        raise ValueError(f"value '{raw}' is not an integer")
    return int(dec)


def _parse_timestamp(raw: str) -> int:
    text = raw.strip()
    if text.isdigit():
        return int(text)
    # "2017-01-01 00:00:00 UTC" as written by the BigQuery exporter
    text = text.replace(" UTC", "").replace("Z", "")
    moment = datetime.fromisoformat(text)
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return int(moment.timestamp())


def _parse_status(raw: str) -> TxStatus:
    text = raw.strip()
    # Pre-Byzantium receipts have no status; they only exist if they executed.
    if text in ("", "1", "1.0"):
        return TxStatus.SUCCESS
    if text in ("0", "0.0"):
        return TxStatus.FAILED
    raise ValueError(f"receipt_status '{raw}' is neither 0 nor 1")


def _check_header(reader: "csv.DictReader[str]", required: Tuple[str, ...], source: str) -> None:
    header = reader.fieldnames or []
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"{source} is missing required column(s): {', '.join(missing)}")


def _reject(
    diagnostics: Optional[List[RowDiagnostic]],
    stats: Optional[Statistics],
    line: int,
    message: str,
) -> None:
    logging.warning(f"Skipping malformed row at line {line}: {message}")
    if diagnostics is not None:
        diagnostics.append(RowDiagnostic(line, message))
    if stats is not None:
        stats.increment(IngestCounters.ROWS_REJECTED)


def iter_transactions(
    stream: TextIO,
    diagnostics: Optional[List[RowDiagnostic]] = None,
    stats: Optional[Statistics] = None,
    first_row: int = 0,
    max_rows: Optional[int] = None,
) -> Iterator[RawTransaction]:
    """
    Stream ``transactions.csv`` rows as RawTransaction records.
    Only one row is held in memory at a time. Rows before ``first_row`` are
    read but not parsed, so diagnostics keep their file line numbers.

    :param stream: Header-bearing CSV text stream.
    :type stream: TextIO
    :param diagnostics: Collects one entry per rejected row, if provided.
    :type diagnostics: Optional[List[RowDiagnostic]]
    :param stats: Counters to update, if provided.
    :type stats: Optional[Statistics]
    :param first_row: 0-based index of the first data row to parse.
    :type first_row: int
    :param max_rows: Data rows to parse from ``first_row`` on; all when None.
    :type max_rows: Optional[int]
    :return: Iterator over well-formed transactions, in file order.
    :rtype: Iterator[RawTransaction]
    :raises SchemaError: If a required column is missing.
    """
    reader = csv.DictReader(stream)
    _check_header(reader, TRANSACTION_COLUMNS, "transactions CSV")
    stop = None if max_rows is None else first_row + max_rows
    for row in itertools.islice(reader, first_row, stop):
        try:
            to_raw = (row["to_address"] or "").strip()
            if not to_raw:
                # Contract creation: no counterparty to embed.
                if stats is not None:
                    stats.increment(IngestCounters.CONTRACT_CREATIONS)
                continue
            tx = RawTransaction(
                tx_hash=normalize_hash(row["hash"] or ""),
                from_address=normalize_address(row["from_address"] or ""),
                to_address=normalize_address(to_raw),
                value_wei=_parse_amount(row["value"] or ""),
                block_timestamp=_parse_timestamp(row["block_timestamp"] or ""),
                status=_parse_status(row["receipt_status"] or ""),
            )
        except (ValueError, TypeError) as e:
            _reject(diagnostics, stats, reader.line_num, str(e))
            continue
        if stats is not None:
            stats.increment(IngestCounters.ROWS_PARSED)
        yield tx


def parse_transactions(
    stream: TextIO,
    diagnostics: Optional[List[RowDiagnostic]] = None,
    stats: Optional[Statistics] = None,
) -> List[RawTransaction]:
    """
    Parse an Ethereum-ETL ``transactions.csv`` export.

    :param stream: Header-bearing CSV text stream.
    :type stream: TextIO
    :param diagnostics: Collects one entry per rejected row, if provided.
    :type diagnostics: Optional[List[RowDiagnostic]]
    :param stats: Counters to update, if provided.
    :type stats: Optional[Statistics]
    :return: One record per well-formed row, row order preserved.
    :rtype: List[RawTransaction]
    """
    return list(iter_transactions(stream, diagnostics, stats))


def parse_token_transfers(
    stream: TextIO,
    contracts: AbstractSet[str] = frozenset(),
    diagnostics: Optional[List[RowDiagnostic]] = None,
    stats: Optional[Statistics] = None,
) -> List[TokenTransferEvent]:
    """
    Parse an Ethereum-ETL ``token_transfers.csv`` export, keeping only the
    transfers whose recipient is an EOA. Addresses absent from ``contracts``
    are treated as EOAs.

    :param stream: Header-bearing CSV text stream.
    :type stream: TextIO
    :param contracts: Known contract addresses (canonical form).
    :type contracts: AbstractSet[str]
    :param diagnostics: Collects one entry per rejected row, if provided.
    :type diagnostics: Optional[List[RowDiagnostic]]
    :param stats: Counters to update, if provided.
    :type stats: Optional[Statistics]
    :return: EOA-recipient transfer events, in file order.
    :rtype: List[TokenTransferEvent]
    """
    reader = csv.DictReader(stream)
    _check_header(reader, TOKEN_TRANSFER_COLUMNS, "token transfers CSV")
    events = []
    for row in reader:
        try:
            event = TokenTransferEvent(
                tx_hash=normalize_hash(row["transaction_hash"] or ""),
                contract_address=normalize_address(row["token_address"] or ""),
                recipient_eoa=normalize_address(row["to_address"] or ""),
                value_raw=_parse_amount(row["value"] or ""),
            )
        except (ValueError, TypeError) as e:
            _reject(diagnostics, stats, reader.line_num, str(e))
            continue
        if event.recipient_eoa in contracts:
            if stats is not None:
                stats.increment(IngestCounters.TOKEN_EVENTS_DROPPED)
            continue
        events.append(event)
    return events


def parse_labels(
    stream: TextIO, diagnostics: Optional[List[RowDiagnostic]] = None
) -> Dict[str, AccountLabel]:
    """
    Parse a ``address,label`` file. Labels are matched case-insensitively against
    AccountLabel values (``normal``, ``phishing``, ``paired_a``, ...).

    :param stream: CSV text stream with ``address`` and ``label`` columns.
    :type stream: TextIO
    :param diagnostics: Collects one entry per rejected row, if provided.
    :type diagnostics: Optional[List[RowDiagnostic]]
    :return: Address to label; the first occurrence of an address wins.
    :rtype: Dict[str, AccountLabel]
    """
    reader = csv.DictReader(stream)
    _check_header(reader, ("address", "label"), "labels CSV")
    labels: Dict[str, AccountLabel] = {}
    for row in reader:
        try:
            address = normalize_address(row["address"] or "")
            label = AccountLabel((row["label"] or "").strip().upper())
        except ValueError as e:
            _reject(diagnostics, None, reader.line_num, str(e))
            continue
        if address in labels:
            _reject(diagnostics, None, reader.line_num, f"duplicate address {address}")
            continue
        labels[address] = label
    return labels


def parse_account_kinds(
    stream: TextIO, diagnostics: Optional[List[RowDiagnostic]] = None
) -> Set[str]:
    """
    Parse the address-kind file and return the set of contract addresses.
    Accepts either a ``address,kind`` CSV or a bare list with one address per
    line (every listed address is then a contract).

    :param stream: Text stream.
    :type stream: TextIO
    :param diagnostics: Collects one entry per rejected row, if provided.
    :type diagnostics: Optional[List[RowDiagnostic]]
    :return: Contract addresses.
    :rtype: Set[str]
    """
    contracts: Set[str] = set()
    first = stream.readline()
    has_header = "address" in first.lower()
    lines: Iterable[str] = stream if has_header else [first, *stream]
    start_line = 2 if has_header else 1
    for line_no, line in enumerate(lines, start=start_line):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(",")]
        try:
            address = normalize_address(parts[0])
            kind = AccountKind(parts[1].upper()) if len(parts) > 1 else AccountKind.CONTRACT
        except ValueError as e:
            _reject(diagnostics, None, line_no, str(e))
            continue
        if kind is AccountKind.CONTRACT:
            contracts.add(address)
    return contracts


def serialize_transactions(transactions: Iterable[RawTransaction], stream: TextIO) -> None:
    """
    Write transactions in the ``transactions.csv`` schema read by parse_transactions.

    :param transactions: Records to write.
    :type transactions: Iterable[RawTransaction]
    :param stream: Destination text stream.
    :type stream: TextIO
    """
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TRANSACTION_COLUMNS)
    for tx in transactions:
        writer.writerow(
            [
                tx.tx_hash,
                tx.from_address,
                tx.to_address,
                tx.value_wei,
                tx.block_timestamp,
                0 if tx.failed else 1,
            ]
        )


def serialize_token_transfers(events: Iterable[TokenTransferEvent], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TOKEN_TRANSFER_COLUMNS)
    for event in events:
        writer.writerow(
            [event.tx_hash, event.contract_address, event.recipient_eoa, event.value_raw]
        )


def serialize_labels(labels: Dict[str, AccountLabel], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("address", "label"))
    for address, label in labels.items():
        writer.writerow((address, label.value.lower()))


def serialize_account_kinds(contracts: Iterable[str], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("address", "kind"))
    for address in contracts:
        writer.writerow((address, AccountKind.CONTRACT.value.lower()))
