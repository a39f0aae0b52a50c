import hashlib
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Tuple, Union

import numpy as np

from ethseq.ingest.csv_parser import (
    serialize_account_kinds,
    serialize_labels,
    serialize_token_transfers,
    serialize_transactions,
)
from ethseq.ingest.records import (
    AccountLabel,
    RawTransaction,
    TokenTransferEvent,
    TxStatus,
)
from ethseq.synthgen.synth_config import SynthConfig
from ethseq.tasks.deanon import EvalPair, write_pairs

WINDOW_START = 1_577_836_800  # 2020-01-01
WINDOW_SECONDS = 365 * 86400
_BURST_GAP = (60, 6 * 3600)
_PAIR_GAP = 4 * 86400

TRANSACTIONS_FILE = "transactions.csv"
TOKEN_TRANSFERS_FILE = "token_transfers.csv"
LABELS_FILE = "labels.csv"
PAIRS_FILE = "pairs.csv"
KINDS_FILE = "kinds.csv"


@dataclass
class SyntheticCorpus:
    """
    A generated corpus, in ingest's record types.

    :param transactions: External transactions, ordered by time then hash.
    :type transactions: List[RawTransaction]
    :param token_events: ERC-20 transfers to EOAs.
    :type token_events: List[TokenTransferEvent]
    :param labels: Label of every planted account.
    :type labels: Dict[str, AccountLabel]
    :param contracts: Contract addresses.
    :type contracts: List[str]
    :param pairs: Planted de-anonymization pairs.
    :type pairs: List[EvalPair]
    """

    transactions: List[RawTransaction] = field(default_factory=list)
    token_events: List[TokenTransferEvent] = field(default_factory=list)
    labels: Dict[str, AccountLabel] = field(default_factory=dict)
    contracts: List[str] = field(default_factory=list)
    pairs: List[EvalPair] = field(default_factory=list)

    def accounts_with(self, label: AccountLabel) -> List[str]:
        return [a for a, lab in self.labels.items() if lab is label]


def powerlaw_weights(n: int, exponent: float) -> np.ndarray:
    """
    Normalized popularity of ranks ``0..n-1``: ``(r + 1) ** (-1 / (exponent - 1))``.
    """
    w = np.arange(1, n + 1, dtype=np.float64) ** (-1.0 / (exponent - 1.0))
    return w / w.sum()


def _digest(seed: int, *parts: object) -> str:
    text = ":".join(str(p) for p in (seed, *parts))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _address(seed: int, role: str, i: int) -> str:
    return "0x" + _digest(seed, role, i)[:40]


def _draw(cdf: np.ndarray, rng: np.random.Generator) -> int:
    return min(int(np.searchsorted(cdf, rng.random(), side="right")), len(cdf) - 1)


def _amount(rng: np.random.Generator) -> int:
    # log-normal around 0.1 ether
    return int(min(np.exp(rng.normal(np.log(1e17), 2.0)), 1e24))


class _Builder:
    """
    Accumulates transactions with deterministic hashes.
    """

    def __init__(self, config: SynthConfig, rng: np.random.Generator) -> None:
        self.config = config
        self.rng = rng
        self.transactions: List[RawTransaction] = []

    def add(self, sender: str, receiver: str, timestamp: int, amount: int) -> RawTransaction:
        failed = self.rng.random() < self.config.failed_rate
        tx = RawTransaction(
            tx_hash="0x" + _digest(self.config.seed, "tx", len(self.transactions)),
            from_address=sender,
            to_address=receiver,
            value_wei=amount,
            block_timestamp=timestamp,
            status=TxStatus.FAILED if failed else TxStatus.SUCCESS,
        )
        self.transactions.append(tx)
        return tx


def _owner_events(
    rng: np.random.Generator,
    n: int,
    in_prob: float,
    burst_rate: float,
    in_cdf: np.ndarray,
    out_cdf: np.ndarray,
) -> List[Tuple[int, bool, int]]:
    """
    Chronological ``(counterparty, incoming, timestamp)`` events of one account.
    A burst repeats the previous event's counterparty and direction a few
    minutes to hours later; a fresh event never repeats the previous counterparty.
    """
    bursts = rng.random(n) < burst_rate
    bursts[0] = False
    fresh_times = np.sort(rng.integers(0, WINDOW_SECONDS, int(n - bursts.sum())))
    events: List[Tuple[int, bool, int]] = []
    f = 0
    for i in range(n):
        if bursts[i]:
            cp, incoming, prev_ts = events[-1]
            events.append((cp, incoming, prev_ts + int(rng.integers(*_BURST_GAP))))
            continue
        incoming = bool(rng.random() < in_prob)
        cdf = in_cdf if incoming else out_cdf
        cp = _draw(cdf, rng)
        while events and cp == events[-1][0]:
            cp = _draw(cdf, rng)
        ts = WINDOW_START + int(fresh_times[f])
        f += 1
        if events:
            ts = max(ts, events[-1][2] + 1)
        events.append((cp, incoming, ts))
    return events


def generate(config: SynthConfig) -> SyntheticCorpus:
    """
    Generate a synthetic corpus.

    Planted accounts trade with a separate counterparty population whose
    popularity follows a discrete power law, hub contracts first. Normal and
    phishing accounts differ in their incoming share, and phishers receive from
    victims drawn uniformly. Each planted pair trades only with its own private
    counterparties, twice per side and counterparty. Transfers to token
    contracts sometimes emit ERC-20 transfers to counterparty EOAs.
    The output depends on ``config`` only.

    :param config: Generator settings.
    :type config: SynthConfig
    :return: The corpus.
    :rtype: SyntheticCorpus
    :raises SynthConfigError: If the configuration is infeasible.
    """
    config.validate()
    start = time.time()
    seed = config.seed
    rng = np.random.default_rng(seed)
    builder = _Builder(config, rng)

    contracts = [_address(seed, "contract", i) for i in range(config.n_contracts)]
    token_contracts = set(contracts[::2])
    eoas = [
        _address(seed, "counterparty", i)
        for i in range(config.n_counterparties - config.n_contracts)
    ]
    counterparties = contracts + eoas
    popular = powerlaw_weights(len(counterparties), config.powerlaw_exponent)
    # contracts never send external transactions
    popular_in = popular.copy()
    popular_in[: config.n_contracts] = 0.0
    popular_in /= popular_in.sum()
    victims = np.zeros(len(counterparties))
    victims[config.n_contracts :] = 1.0 / len(eoas)
    popular_cdf = np.cumsum(popular)
    popular_in_cdf = np.cumsum(popular_in)
    victims_cdf = np.cumsum(victims)

    n_unpaired = config.n_unpaired
    owners = [_address(seed, "account", i) for i in range(n_unpaired)]
    phishers = set(rng.choice(n_unpaired, size=config.n_phishers, replace=False).tolist())
    labels = {
        a: AccountLabel.PHISHING if i in phishers else AccountLabel.NORMAL
        for i, a in enumerate(owners)
    }

    budget = config.n_tx - config.pair_tx - 3 * n_unpaired
    activity = rng.pareto(1.5, n_unpaired) + 1.0
    counts = 3 + rng.multinomial(budget, activity / activity.sum())

    token_events: List[TokenTransferEvent] = []
    for i, owner in enumerate(owners):
        phisher = i in phishers
        ratio = config.phisher_in_out_ratio if phisher else config.normal_in_out_ratio
        events = _owner_events(
            rng,
            int(counts[i]),
            ratio / (1.0 + ratio),
            config.burst_rate,
            victims_cdf if phisher else popular_in_cdf,
            popular_cdf,
        )
        for cp, incoming, ts in events:
            other = counterparties[cp]
            sender, receiver = (other, owner) if incoming else (owner, other)
            tx = builder.add(sender, receiver, ts, _amount(rng))
            if receiver in token_contracts and rng.random() < config.token_event_rate:
                recipient = eoas[int(rng.integers(len(eoas)))]
                token_events.append(
                    TokenTransferEvent(
                        tx.tx_hash, receiver, recipient, int(rng.integers(1, 10**9))
                    )
                )

    pairs = []
    for p in range(config.n_pairs):
        side_a = _address(seed, "pair_a", p)
        side_b = _address(seed, "pair_b", p)
        labels[side_a] = AccountLabel.PAIRED_A
        labels[side_b] = AccountLabel.PAIRED_B
        private = [
            _address(seed, f"pair_{p}_counterparty", k)
            for k in range(config.pair_shared_counterparties)
        ]
        first: Dict[str, int] = {}
        last: Dict[str, int] = {}
        for side in (side_a, side_b):
            base = WINDOW_START + int(rng.integers(0, WINDOW_SECONDS // 2))
            for k, cp in enumerate(private * 2):
                ts = base + k * _PAIR_GAP
                incoming = bool(rng.random() < 0.5)
                sender, receiver = (cp, side) if incoming else (side, cp)
                builder.add(sender, receiver, ts, _amount(rng))
                first.setdefault(side, ts)
                last[side] = ts
        cutoff = max(last[side_a], first[side_b])
        pairs.append(EvalPair(side_a, side_b, cutoff))

    transactions = sorted(builder.transactions, key=lambda t: (t.block_timestamp, t.tx_hash))
    logging.info(
        f"Generated {len(transactions)} transactions, {len(token_events)} token events, "
        f"{len(phishers)} phishers and {len(pairs)} pairs in {time.time() - start:.1f}s"
    )
    return SyntheticCorpus(transactions, token_events, labels, contracts, pairs)


def in_out_ratio(transactions: Iterable[RawTransaction], accounts: Iterable[str]) -> float:
    """
    Incoming over outgoing transaction count, pooled over ``accounts``.
    """
    members = set(accounts)
    n_in = n_out = 0
    for tx in transactions:
        if tx.to_address in members:
            n_in += 1
        if tx.from_address in members:
            n_out += 1
    return n_in / n_out if n_out else float("inf")


def write_synthetic(corpus: SyntheticCorpus, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """
    Write the five input files the ingest stage reads.

    :param corpus: Generated corpus.
    :type corpus: SyntheticCorpus
    :param out_dir: Destination directory, created if missing.
    :type out_dir: Union[str, Path]
    :return: File role to path.
    :rtype: Dict[str, Path]
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "transactions": out / TRANSACTIONS_FILE,
        "token_transfers": out / TOKEN_TRANSFERS_FILE,
        "labels": out / LABELS_FILE,
        "pairs": out / PAIRS_FILE,
        "kinds": out / KINDS_FILE,
    }
    with open(paths["transactions"], "w", newline="") as stream:
        serialize_transactions(corpus.transactions, stream)
    with open(paths["token_transfers"], "w", newline="") as stream:
        serialize_token_transfers(corpus.token_events, stream)
    with open(paths["labels"], "w", newline="") as stream:
        serialize_labels(corpus.labels, stream)
    with open(paths["pairs"], "w", newline="") as stream:
        write_pairs(corpus.pairs, stream)
    with open(paths["kinds"], "w", newline="") as stream:
        serialize_account_kinds(corpus.contracts, stream)
    return paths
