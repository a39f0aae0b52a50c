from dataclasses import dataclass
from enum import Enum

MAX_UINT256 = 2**256


class TxStatus(Enum):
    SUCCESS = "SUCCESS"
    FAILED = "FAILED"


class AccountKind(Enum):
    EOA = "EOA"
    CONTRACT = "CONTRACT"


class AccountLabel(Enum):
    NORMAL = "NORMAL"
    PHISHING = "PHISHING"
    PAIRED_A = "PAIRED_A"
    PAIRED_B = "PAIRED_B"
    EXCLUDED = "EXCLUDED"


@dataclass(frozen=True)
class RawTransaction:
    """
    One external transaction as exported by Ethereum-ETL.

    :param tx_hash: 32-byte hex id, ``0x`` prefixed, lower-case.
    :type tx_hash: str
    :param from_address: Sender, 20-byte hex, lower-case.
    :type from_address: str
    :param to_address: Receiver, 20-byte hex, lower-case; empty for contract creation.
    :type to_address: str
    :param value_wei: Transferred value in wei.
    :type value_wei: int
    :param block_timestamp: Unix seconds.
    :type block_timestamp: int
    :param status: Receipt status.
    :type status: TxStatus
    """

    tx_hash: str
    from_address: str
    to_address: str
    value_wei: int
    block_timestamp: int
    status: TxStatus = TxStatus.SUCCESS

    def __post_init__(self) -> None:
        if not self.from_address:
            raise ValueError(f"Transaction {self.tx_hash} has no sender.")
        if not 0 <= self.value_wei < MAX_UINT256:
            raise ValueError(f"Transaction {self.tx_hash} value is outside the uint256 range.")
        if self.block_timestamp <= 0:
            raise ValueError(f"Transaction {self.tx_hash} has a non-positive timestamp.")

    @property
    def failed(self) -> bool:
        return self.status is TxStatus.FAILED


@dataclass(frozen=True)
class TokenTransferEvent:
    """
    An ERC-20 ``Transfer`` log emitted while executing an external transaction.

    :param tx_hash: Hash of the external transaction that emitted the log.
    :type tx_hash: str
    :param contract_address: The token contract.
    :type contract_address: str
    :param recipient_eoa: Receiver of the tokens.
    :type recipient_eoa: str
    :param value_raw: Raw token amount (ingested, not embedded).
    :type value_raw: int
    """

    tx_hash: str
    contract_address: str
    recipient_eoa: str
    value_raw: int

    def __post_init__(self) -> None:
        if self.recipient_eoa == self.contract_address:
            raise ValueError(
                f"Token event in {self.tx_hash} sends to its own contract {self.contract_address}."
            )
        if not 0 <= self.value_raw < MAX_UINT256:
            raise ValueError(f"Token event in {self.tx_hash} value is outside the uint256 range.")


@dataclass(frozen=True)
class AccountMeta:
    address: str
    kind: AccountKind = AccountKind.EOA
    label: AccountLabel = AccountLabel.NORMAL
