from collections import Counter
from typing import AbstractSet, Iterable, List, Mapping

from ethseq.ingest.records import AccountLabel, AccountMeta, RawTransaction


def count_involvements(transactions: Iterable[RawTransaction]) -> Counter:
    """
    Count, per address, the transactions it sent or received.
    A self-transfer counts once.

    :param transactions: Parsed transactions.
    :type transactions: Iterable[RawTransaction]
    :return: Address to involved-transaction count.
    :rtype: Counter
    """
    counts: Counter = Counter()
    for tx in transactions:
        counts[tx.from_address] += 1
        if tx.to_address and tx.to_address != tx.from_address:
            counts[tx.to_address] += 1
    return counts


def filter_accounts(
    accounts: Iterable[AccountMeta],
    tx_counts: Mapping[str, int],
    min_tx: int = 3,
    max_tx: int = 10000,
    excluded_labels: AbstractSet[AccountLabel] = frozenset({AccountLabel.EXCLUDED}),
) -> List[AccountMeta]:
    """
    Keep the accounts whose involved-transaction count lies in ``[min_tx, max_tx]``
    (both ends inclusive) and whose label is not excluded.

    :param accounts: Candidate accounts.
    :type accounts: Iterable[AccountMeta]
    :param tx_counts: Address to involved-transaction count; absent means 0.
    :type tx_counts: Mapping[str, int]
    :param min_tx: Lower bound on the count.
    :type min_tx: int
    :param max_tx: Upper bound on the count.
    :type max_tx: int
    :param excluded_labels: Labels that are dropped regardless of the count.
    :type excluded_labels: AbstractSet[AccountLabel]
    :return: Kept accounts, in input order.
    :rtype: List[AccountMeta]
    """
    return [
        account
        for account in accounts
        if min_tx <= tx_counts.get(account.address, 0) <= max_tx
        and account.label not in excluded_labels
    ]
