import logging

from corpus_helper import ring_corpus, sequence_of

from ethseq.seqgen.pipeline import build_sequence_corpus
from ethseq.seqgen.seqgen_config import SeqGenConfig
from ethseq.seqgen.sequence import Direction
from ethseq.statistics import IngestCounters, SequenceCounters, Statistics, TrainCounters
from ethseq.trainer.batching import trainable


class TestIncrementStatistics:
    def test_increment_every_counter(self):
        s = Statistics()
        for k, v in s.counts.items():
            assert v == 0
            s.increment(k)

        for k, v in s.counts.items():
            assert v == 1

    def test_increment_rows(self):
        s = Statistics()
        assert s.counts[IngestCounters.ROWS_PARSED] == 0
        s.increment(IngestCounters.ROWS_PARSED, 5)
        assert s.counts[IngestCounters.ROWS_PARSED] == 5

    def test_increment_merged(self):
        s = Statistics()
        s.increment(SequenceCounters.RECORDS_MERGED)
        s.increment(SequenceCounters.RECORDS_MERGED)
        assert s.counts[SequenceCounters.RECORDS_MERGED] == 2


class TestResetStatistics:
    def test_reset(self):
        s = Statistics()
        for k in s.counts:
            s.increment(k, 3)
        s.reset()
        assert set(s.counts.values()) == {0}

    def test_reset_to_value(self):
        s = Statistics()
        s.reset(7)
        assert s.counts[TrainCounters.BATCHES] == 7


class TestStageCounters:
    def test_pipeline_counts_sequences(self):
        s = Statistics()
        build_sequence_corpus(ring_corpus(rounds=3), SeqGenConfig(max_seq_len=4), s)
        assert s.counts[SequenceCounters.SEQUENCES] == 6
        assert s.counts[SequenceCounters.PIECES] == 12

    def test_trainable_counts_skipped(self):
        s = Statistics()
        seqs = [sequence_of(3, []), sequence_of(4, [(5, Direction.OUT, 9, 1)])]
        assert len(trainable(seqs, s)) == 1
        assert s.counts[TrainCounters.SKIPPED_SEQUENCES] == 1


class TestLogging:
    def test_logging(self, caplog):
        s = Statistics()
        assert s.info_data == {}
        s.increment(SequenceCounters.PIECES, 4)
        with caplog.at_level(logging.INFO):
            s.log_info("build-seqs", 0.5, loss=1.5)
        assert s.info_data == {"Stage": "build-seqs", "Time ms": 500, "loss": 1.5, "PIECES": 4}
        assert "PIECES=4" in caplog.text

    def test_zero_counters_left_out(self):
        s = Statistics()
        s.log_info("ingest", 1.0)
        assert set(s.info_data) == {"Stage", "Time ms"}
