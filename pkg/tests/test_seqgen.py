import io

import numpy as np
import pytest
from corpus_helper import DAY, T0, addr, ring_corpus, sequence_of, tx, tx_hash

from ethseq.errors import CorpusFormatError
from ethseq.ingest.records import TokenTransferEvent
from ethseq.seqgen.binning import amount_bin, bin_sequence, count_bin, time_bin
from ethseq.seqgen.builder import attach_token_recipients, build_sequence, group_token_events
from ethseq.seqgen.masking import mask_count, mask_sequence
from ethseq.seqgen.pipeline import build_sequence_corpus, build_vocabulary
from ethseq.seqgen.seqgen_config import SeqGenConfig
from ethseq.seqgen.sequence import (
    AMOUNT_NULL,
    COUNT_NULL,
    TIME_NULL,
    CounterpartyKind,
    Direction,
    TxSequence,
)
from ethseq.seqgen.sequence_io import SequenceCorpus, read_sequences, write_sequences
from ethseq.seqgen.transforms import separate_in_out, split_long
from ethseq.seqgen.vocabulary import MASK_ID, NUM_SPECIALS, UNK_ID, Vocabulary
from ethseq.statistics import SequenceCounters, Statistics

A, B, C = addr(1), addr(2), addr(3)


def _vocab() -> Vocabulary:
    return Vocabulary({A: 1, B: 2, C: 1})


class TestBuildSequence:
    def test_newest_first_behind_head(self):
        vocab = _vocab()
        seq = build_sequence(A, [tx(1, 1, 2, 5), tx(2, 3, 1, 9)], vocab)
        assert seq.records[0].is_head
        assert seq.records[0].counterparty == vocab.id_of(A)
        body = [(r.counterparty, r.direction, r.raw_timestamp) for r in seq.body]
        assert body == [
            (vocab.id_of(C), Direction.IN, 9),
            (vocab.id_of(B), Direction.OUT, 5),
        ]
        assert [r.position for r in seq.records] == [0, 1, 2]

    def test_equal_timestamps_order_by_hash(self):
        vocab = _vocab()
        seq = build_sequence(A, [tx(7, 1, 3, 5), tx(4, 1, 2, 5)], vocab)
        assert [r.tx_hashes for r in seq.body] == [(tx_hash(4),), (tx_hash(7),)]

    def test_failed_kept_and_flagged(self):
        seq = build_sequence(A, [tx(1, 1, 2, 5, failed=True)], _vocab())
        assert seq.body[0].failed

    def test_self_transfer_is_out_to_self(self):
        vocab = _vocab()
        (record,) = build_sequence(A, [tx(1, 1, 1, 5)], vocab).body
        assert record.direction is Direction.OUT
        assert record.counterparty == vocab.id_of(A)

    def test_contract_kind(self):
        (record,) = build_sequence(A, [tx(1, 1, 2, 5)], _vocab(), frozenset({B})).body
        assert record.counterparty_kind is CounterpartyKind.CONTRACT

    def test_uninvolved_transaction(self):
        with pytest.raises(ValueError):
            build_sequence(A, [tx(1, 2, 3, 5)], _vocab())

    def test_head_has_null_features(self):
        head = build_sequence(A, [], _vocab()).records[0]
        assert head.counterparty_kind is CounterpartyKind.NULL
        assert (head.amount_bin, head.count_bin, head.time_bin) == (
            AMOUNT_NULL,
            COUNT_NULL,
            TIME_NULL,
        )


class TestBinning:
    @pytest.mark.parametrize(
        ("wei", "expected"),
        [(0, 0), (1, 1), (10**17, 9), (5 * 10**17, 9), (10**18, 10), (10**19, 11), (10**40, 20)],
    )
    def test_amount(self, wei, expected):
        assert amount_bin(wei) == expected

    @pytest.mark.parametrize(("count", "expected"), [(1, 0), (2, 1), (5, 2), (8, 3), (10**6, 10)])
    def test_count(self, count, expected):
        assert count_bin(count) == expected

    @pytest.mark.parametrize(
        ("days", "expected"), [(0, 0), (0.5, 0), (1, 1), (3, 2), (7, 3), (10**6, 15)]
    )
    def test_time(self, days, expected):
        assert time_bin(T0 - int(days * DAY), T0) == expected

    def test_bin_sequence_keeps_head(self):
        seq = sequence_of(10, [(3, Direction.IN, T0, 10**18), (4, Direction.OUT, T0 - DAY, 0)])
        binned = bin_sequence(seq)
        assert binned.records[0] == seq.records[0]
        first, second = binned.body
        assert (first.amount_bin, first.count_bin, first.time_bin) == (10, 0, 0)
        assert (second.amount_bin, second.count_bin, second.time_bin) == (0, 0, 1)


class TestTransforms:
    def test_separate_in_out(self):
        seq = sequence_of(
            10,
            [(3, Direction.IN, 9, 1), (4, Direction.OUT, 8, 1), (5, Direction.IN, 7, 1)],
        )
        in_seq, out_seq = separate_in_out(seq)
        assert [r.counterparty for r in in_seq.records] == [10, 3, 5]
        assert [r.counterparty for r in out_seq.records] == [10, 4]
        assert [r.position for r in in_seq.records] == [0, 1, 2]
        assert in_seq.records[0].is_head and out_seq.records[0].is_head

    def test_split_long(self):
        body = [(100 + i, Direction.OUT, T0 - i, 1) for i in range(150)]
        seq = sequence_of(10, body)
        pieces = split_long(seq, 100)
        assert [len(p) for p in pieces] == [100, 52]
        assert [p.piece for p in pieces] == [0, 1]
        assert all(p.records[0].is_head for p in pieces)
        rejoined = [r.counterparty for p in pieces for r in p.body]
        assert rejoined == [r.counterparty for r in seq.body]

    def test_split_short_unchanged(self):
        seq = sequence_of(10, [(3, Direction.IN, 9, 1)])
        assert split_long(seq, 100) == [seq]

    def test_split_rejects_tiny_max(self):
        with pytest.raises(ValueError):
            split_long(sequence_of(10, []), 1)


class TestMasking:
    def _seq(self, n: int) -> TxSequence:
        return sequence_of(10, [(100 + i, Direction.OUT, T0 - i, 1) for i in range(n)])

    @pytest.mark.parametrize(
        ("length", "ratio", "expected"), [(11, 0.8, 8), (11, 1.0, 10), (2, 0.1, 1), (4, 0.5, 2)]
    )
    def test_mask_count(self, length, ratio, expected):
        assert mask_count(length, ratio) == expected

    def test_mask_sequence(self):
        seq = self._seq(10)
        masked = mask_sequence(seq, 0.8, np.random.default_rng(3))
        assert len(masked.masked_positions) == 8
        assert 0 not in masked.masked_positions
        ids = masked.counterparties()
        assert all(ids[p] == MASK_ID for p in masked.masked_positions)
        assert ids[0] == 10
        np.testing.assert_array_equal(masked.unmask(), seq.counterparties())

    def test_ratio_one_masks_everything(self):
        masked = mask_sequence(self._seq(5), 1.0, np.random.default_rng(0))
        assert masked.masked_positions == (1, 2, 3, 4, 5)

    def test_same_rng_same_mask(self):
        seq = self._seq(20)
        a = mask_sequence(seq, 0.3, np.random.default_rng(11))
        b = mask_sequence(seq, 0.3, np.random.default_rng(11))
        assert a.masked_positions == b.masked_positions

    def test_head_only_rejected(self):
        with pytest.raises(ValueError):
            mask_sequence(self._seq(0), 0.5, np.random.default_rng(0))

    @pytest.mark.parametrize("ratio", [0.0, -0.1, 1.5])
    def test_bad_ratio(self, ratio):
        with pytest.raises(ValueError):
            mask_sequence(self._seq(3), ratio, np.random.default_rng(0))


class TestTokenRecipients:
    def test_out_records_only(self):
        seq = sequence_of(10, [(3, Direction.OUT, 9, 1), (4, Direction.IN, 8, 1)])
        events = {tx_hash(1): (7, 8), tx_hash(2): (9,)}
        out_record, in_record = attach_token_recipients(seq, events).body
        assert out_record.token_recipients == (7, 8)
        assert in_record.token_recipients == ()

    def test_unknown_hash_ignored(self):
        vocab = _vocab()
        events = [
            TokenTransferEvent(tx_hash(1), addr(99), B, 1),
            TokenTransferEvent(tx_hash(5), addr(99), C, 1),
        ]
        grouped = group_token_events(events, vocab, {tx_hash(1)})
        assert grouped == {tx_hash(1): (vocab.id_of(B),)}


class TestVocabulary:
    def test_special_ids(self):
        vocab = _vocab()
        assert len(vocab) == NUM_SPECIALS + 3
        assert [vocab.id_of(a) for a in (A, B, C)] == [3, 4, 5]
        assert vocab.id_of(addr(77)) == UNK_ID
        assert vocab.frequency(vocab.id_of(B)) == 2

    def test_independent_of_insertion_order(self):
        assert Vocabulary({C: 1, A: 1, B: 2}).content_hash() == _vocab().content_hash()

    def test_csv(self):
        stream = io.StringIO()
        _vocab().to_csv(stream)
        stream.seek(0)
        assert Vocabulary.from_csv(stream).content_hash() == _vocab().content_hash()

    def test_build_vocabulary_counts(self):
        vocab = build_vocabulary(ring_corpus(n_accounts=4, rounds=2))
        # each account heads its sequence and appears in its neighbours' sequences per round
        assert [vocab.frequency(vocab.id_of(addr(i))) for i in range(1, 5)] == [5, 5, 5, 5]


class TestPipeline:
    def test_ring(self):
        stats = Statistics()
        corpus = build_sequence_corpus(ring_corpus(), SeqGenConfig(), stats)
        assert len(corpus.sequences) == 6
        assert all(len(s) == 7 for s in corpus.sequences)
        assert stats.counts[SequenceCounters.SEQUENCES] == 6
        assert stats.counts[SequenceCounters.RECORDS_MERGED] == 0
        assert corpus.raw_ratio == 0.0
        owner = corpus.vocab.id_of(addr(1))
        assert corpus.first_seen[owner] == T0 + 5 * DAY

    def test_split_pieces(self):
        corpus = build_sequence_corpus(ring_corpus(rounds=3), SeqGenConfig(max_seq_len=4))
        assert {len(s) for s in corpus.sequences} == {4}
        assert len(corpus.by_owner()[corpus.vocab.id_of(addr(2))]) == 2


class TestSequenceFile:
    def test_round_trip(self, tmp_path):
        corpus = build_sequence_corpus(ring_corpus())
        corpus.sequences[0] = attach_token_recipients(
            corpus.sequences[0], {h: (5, 6) for r in corpus.sequences[0].body for h in r.tx_hashes}
        )
        path = tmp_path / "sequences.bin"
        write_sequences(path, corpus)
        loaded = read_sequences(path, corpus.vocab)
        assert loaded.sequences == corpus.sequences
        assert loaded.first_seen == corpus.first_seen
        assert loaded.config == corpus.config

    def test_vocabulary_mismatch(self, tmp_path):
        path = tmp_path / "sequences.bin"
        write_sequences(path, SequenceCorpus(vocab=_vocab()))
        with pytest.raises(CorpusFormatError):
            read_sequences(path, Vocabulary({A: 1}))

    def test_truncated(self, tmp_path):
        corpus = build_sequence_corpus(ring_corpus())
        path = tmp_path / "sequences.bin"
        write_sequences(path, corpus)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(CorpusFormatError):
            read_sequences(path, corpus.vocab)
