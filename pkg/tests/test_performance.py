import time

import pytest
from corpus_helper import (
    TX_HEADER,
    addr,
    synthetic_corpus,
    tiny_model_config,
    tiny_train_config,
    tx_hash,
)
from perf_helper import run_perf_analytics

from ethseq.ingest.loader import load_transaction_shards
from ethseq.model.representation import extract_representations
from ethseq.negsample.negsample_config import NegSampleConfig, NegStrategy
from ethseq.seqgen.pipeline import build_sequence_corpus
from ethseq.seqgen.seqgen_config import SeqGenConfig
from ethseq.synthgen.synth_config import SynthConfig
from ethseq.trainer.pretrainer import pretrain


def _write_rows(path, n_rows: int) -> None:
    with open(path, "w") as stream:
        stream.write(TX_HEADER)
        for i in range(n_rows):
            sender, receiver = addr(1 + i % 5000), addr(7000 + i % 977)
            stream.write(f"{tx_hash(i + 1)},{sender},{receiver},{i},{1600000000 + i},1\n")


def _model():
    return tiny_model_config(hidden=16, max_seq_len=16)


@pytest.fixture(scope="module")
def tiny_sequences():
    config = SeqGenConfig(max_seq_len=16)
    return build_sequence_corpus(synthetic_corpus(SynthConfig.preset("tiny")), config)


class TestPerformance:
    """
    Tests only for performance analysis - skipped by marked as slow
    To run perf tests:
    python3 -m pytest tests/test_performance.py -sv --runslow
    """

    @pytest.mark.slow
    def test_perf_ingest_million_rows(self, request, tmp_path):
        path = tmp_path / "transactions.csv"
        _write_rows(path, 1_000_000)
        start = time.time()
        transactions = run_perf_analytics(
            request.node.name, load_transaction_shards, [path], shard_rows=250_000
        )
        assert len(transactions) == 1_000_000
        assert time.time() - start < 60.0

    @pytest.mark.slow
    def test_perf_build_sequences(self, request):
        corpus = synthetic_corpus(SynthConfig.preset("tiny"))
        run_perf_analytics(request.node.name, build_sequence_corpus, corpus)

    @pytest.mark.slow
    @pytest.mark.parametrize("threads", [1, 4])
    def test_perf_pretrain_epoch(self, request, tiny_sequences, threads):
        config = tiny_train_config(threads=threads, batch_size=32, model_config=_model())
        run_perf_analytics(request.node.name, pretrain, tiny_sequences, config)

    @pytest.mark.slow
    def test_perf_per_sequence_pools(self, request, tiny_sequences):
        config = tiny_train_config(
            model_config=_model(),
            negsample_config=NegSampleConfig(strategy=NegStrategy.UNIFORM, batch_sharing=False),
        )
        run_perf_analytics(request.node.name, pretrain, tiny_sequences, config)

    @pytest.mark.slow
    def test_perf_extract(self, request, tiny_sequences):
        checkpoint = pretrain(tiny_sequences, tiny_train_config(epochs=0, model_config=_model()))
        run_perf_analytics(
            request.node.name,
            extract_representations,
            tiny_sequences.by_owner(),
            checkpoint.params,
        )
