from typing import List, Sequence, Tuple

from ethseq.ingest.corpus_io import Corpus
from ethseq.ingest.records import AccountLabel, AccountMeta, RawTransaction, TxStatus
from ethseq.model.model_config import ModelConfig
from ethseq.negsample.negsample_config import NegSampleConfig, NegStrategy
from ethseq.seqgen.pipeline import build_sequence_corpus
from ethseq.seqgen.seqgen_config import SeqGenConfig
from ethseq.seqgen.sequence import Direction, TxRecord, TxSequence, head_record, reindex
from ethseq.seqgen.sequence_io import SequenceCorpus
from ethseq.synthgen.generator import generate
from ethseq.synthgen.synth_config import SynthConfig
from ethseq.trainer.train_config import TrainConfig

HOUR = 3600
DAY = 86400
T0 = 1_600_000_000

TX_HEADER = "hash,from_address,to_address,value,block_timestamp,receipt_status\n"
TOKEN_HEADER = "transaction_hash,token_address,to_address,value\n"


def addr(i: int) -> str:
    return f"0x{i:040x}"


def tx_hash(i: int) -> str:
    return f"0x{i:064x}"


def tx(
    i: int,
    sender: int,
    receiver: int,
    ts: int,
    value: int = 10**18,
    failed: bool = False,
) -> RawTransaction:
    return RawTransaction(
        tx_hash=tx_hash(i),
        from_address=addr(sender),
        to_address=addr(receiver),
        value_wei=value,
        block_timestamp=ts,
        status=TxStatus.FAILED if failed else TxStatus.SUCCESS,
    )


def csv_row(t: RawTransaction) -> str:
    status = "0" if t.failed else "1"
    return (
        f"{t.tx_hash},{t.from_address},{t.to_address},{t.value_wei},"
        f"{t.block_timestamp},{status}\n"
    )


def sequence_of(
    owner: int, body: Sequence[Tuple[int, Direction, int, int]], failed: Sequence[int] = ()
) -> TxSequence:
    """
    Sequence with records ``(counterparty, direction, timestamp, amount)``
    given newest first. Indices listed in ``failed`` are flagged failed.
    """
    records = [head_record(owner)]
    for i, (cp, direction, ts, amount) in enumerate(body):
        records.append(
            TxRecord(
                counterparty=cp,
                direction=direction,
                raw_timestamp=ts,
                raw_amount_wei=amount,
                tx_hashes=(tx_hash(i + 1),),
                failed=i in failed,
            )
        )
    return TxSequence(owner, reindex(records))


def chronological(owner: int, cps: Sequence[int], gap: int = 100 * HOUR) -> TxSequence:
    """
    Out transfers to ``cps`` in chronological order, ``gap`` seconds apart.
    """
    n = len(cps)
    body = [(cp, Direction.OUT, T0 + (n - 1 - i) * gap, 1) for i, cp in enumerate(cps[::-1])]
    return sequence_of(owner, body)


def tiny_model_config(**overrides: object) -> ModelConfig:
    settings = {"hidden": 8, "layers": 2, "heads": 2, "max_seq_len": 8, "dropout": 0.0}
    settings.update(overrides)
    return ModelConfig(**settings)  # type: ignore


def tiny_train_config(**overrides: object) -> TrainConfig:
    settings = {
        "mask_ratio": 0.5,
        "batch_size": 8,
        "epochs": 1,
        "learning_rate": 1e-3,
        "shard_size": 4,
        "model_config": tiny_model_config(),
        "negsample_config": NegSampleConfig(strategy=NegStrategy.ZIPFAN, pool_size=16),
    }
    settings.update(overrides)
    return TrainConfig(**settings)  # type: ignore


def ring_corpus(n_accounts: int = 6, rounds: int = 3) -> Corpus:
    """
    Accounts ``1..n`` each paying the next one around a ring, ``rounds`` times,
    five days apart so nothing de-duplicates.
    """
    transactions: List[RawTransaction] = []
    i = 0
    for r in range(rounds):
        for a in range(1, n_accounts + 1):
            b = a % n_accounts + 1
            i += 1
            transactions.append(tx(i, a, b, T0 + (r * n_accounts + a) * 5 * DAY, 10**17 * a))
    accounts = [AccountMeta(addr(a)) for a in range(1, n_accounts + 1)]
    return Corpus(transactions=transactions, accounts=accounts)


def synthetic_corpus(config: SynthConfig) -> Corpus:
    """
    Ingest-free corpus of a generated dataset: every labeled account is kept.
    """
    synthetic = generate(config)
    accounts = [
        AccountMeta(a, label=label)
        for a, label in sorted(synthetic.labels.items())
        if label is not AccountLabel.EXCLUDED
    ]
    return Corpus(
        synthetic.transactions,
        synthetic.token_events,
        accounts,
        frozenset(synthetic.contracts),
    )


def small_synth_config(**overrides: object) -> SynthConfig:
    settings = {"n_accounts": 24, "n_tx": 480, "n_counterparties": 40, "n_pairs": 2}
    settings.update(overrides)
    return SynthConfig(**settings)  # type: ignore


def small_sequences(max_seq_len: int = 8) -> SequenceCorpus:
    return build_sequence_corpus(
        synthetic_corpus(small_synth_config()), SeqGenConfig(max_seq_len=max_seq_len)
    )
