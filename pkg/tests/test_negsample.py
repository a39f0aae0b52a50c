import math

import numpy as np
import pytest
from corpus_helper import sequence_of
from hypothesis import given
from hypothesis import strategies as st

from ethseq.negsample.distributions import frequent_prob, uniform_prob, zipfan_prob, zipfan_probs
from ethseq.negsample.frequency_table import build_frequency_table
from ethseq.negsample.negsample_config import NegSampleConfig, NegStrategy
from ethseq.negsample.sampler import (
    FrequentSampler,
    SamplerFactory,
    UniformSampler,
    ZipfanSampler,
    sample_pool,
)
from ethseq.seqgen.sequence import Direction

VOCAB_SIZE = 12
IN, OUT = Direction.IN, Direction.OUT


def _table():
    # counterparty 5 three times, 4 twice, 3 and 6 once each
    seqs = [
        sequence_of(7, [(5, OUT, 9, 1), (5, IN, 8, 1), (4, OUT, 7, 1)]),
        sequence_of(8, [(6, IN, 9, 1), (4, IN, 8, 1), (5, OUT, 7, 1)]),
        sequence_of(9, [(3, OUT, 9, 1)]),
    ]
    return build_frequency_table(seqs, VOCAB_SIZE)


class TestZipfan:
    def test_top_rank(self):
        assert zipfan_prob(0, 10) == pytest.approx(math.log(2) / math.log(11))
        assert zipfan_prob(0, 10) == pytest.approx(0.28906, abs=1e-5)

    def test_last_rank(self):
        assert zipfan_prob(9, 10) == pytest.approx(0.03975, abs=1e-5)

    def test_single_address(self):
        assert zipfan_prob(0, 1) == pytest.approx(1.0)

    @given(max_rank=st.integers(1, 5000))
    def test_sums_to_one(self, max_rank):
        probs = zipfan_probs(max_rank)
        assert probs.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(np.diff(probs) < 0)

    def test_vector_matches_scalar(self):
        probs = zipfan_probs(7)
        assert [zipfan_prob(r, 7) for r in range(7)] == pytest.approx(probs.tolist())

    @pytest.mark.parametrize(("rank", "max_rank"), [(0, 0), (5, 5), (-1, 3)])
    def test_out_of_range(self, rank, max_rank):
        with pytest.raises(ValueError):
            zipfan_prob(rank, max_rank)


class TestFrequent:
    def test_linear(self):
        assert frequent_prob(np.array([3, 1]), 1.0) == pytest.approx([0.75, 0.25])

    def test_square_root(self):
        assert frequent_prob(np.array([4, 1]), 0.5) == pytest.approx([2 / 3, 1 / 3])

    def test_zero_exponent_is_uniform(self):
        probs = frequent_prob(np.array([100, 5, 1, 1]), 0.0)
        np.testing.assert_allclose(probs, uniform_prob(4))

    def test_huge_frequencies(self):
        probs = frequent_prob(np.array([10**300, 10**300], dtype=np.float64), 1.0)
        assert probs == pytest.approx([0.5, 0.5])

    @pytest.mark.parametrize(
        ("freqs", "b"), [(np.array([]), 1.0), (np.array([1, 0]), 1.0), (np.array([1, 2]), -1.0)]
    )
    def test_invalid(self, freqs, b):
        with pytest.raises(ValueError):
            frequent_prob(freqs, b)


class TestFrequencyTable:
    def test_single_sequence(self):
        seq = sequence_of(7, [(4, OUT, 9, 1), (4, IN, 8, 1), (3, OUT, 7, 1)])
        table = build_frequency_table([seq], VOCAB_SIZE)
        assert table.ids.tolist() == [4, 3]
        assert table.frequencies.tolist() == [2, 1]
        # the head's owner is not a counterparty
        assert table.rank_of(7) == -1
        assert table.frequency_of(7) == 0

    def test_ties_by_id(self):
        table = _table()
        assert table.ids.tolist() == [5, 4, 3, 6]
        assert table.frequencies.tolist() == [3, 2, 1, 1]
        assert table.max_rank == 4
        assert [table.rank_of(i) for i in (5, 4, 3, 6)] == [0, 1, 2, 3]

    def test_specials_never_ranked(self):
        seq = sequence_of(7, [(1, OUT, 9, 1), (4, IN, 8, 1)])
        assert build_frequency_table([seq], VOCAB_SIZE).ids.tolist() == [4]

    def test_empty(self):
        with pytest.raises(ValueError):
            build_frequency_table([sequence_of(7, [])], VOCAB_SIZE)


class TestSamplers:
    @pytest.mark.parametrize(
        ("strategy", "cls"),
        [
            (NegStrategy.UNIFORM, UniformSampler),
            (NegStrategy.FREQ_0_5, FrequentSampler),
            (NegStrategy.FREQ_1_0, FrequentSampler),
            (NegStrategy.ZIPFAN, ZipfanSampler),
        ],
    )
    def test_factory(self, strategy, cls):
        sampler = SamplerFactory.create(strategy, _table())
        assert isinstance(sampler, cls)
        assert sampler.strategy is strategy
        assert sampler.probs.sum() == pytest.approx(1.0)

    def test_frequent_follows_frequencies(self):
        probs = SamplerFactory.create(NegStrategy.FREQ_1_0, _table()).probs
        assert probs == pytest.approx([3 / 7, 2 / 7, 1 / 7, 1 / 7])

    def test_pool_draws_ranked_ids(self):
        pool = sample_pool(_table(), NegStrategy.ZIPFAN, 50, np.random.default_rng(1))
        assert len(pool) == 50
        assert set(pool.ids.tolist()) <= {3, 4, 5, 6}
        assert pool.strategy is NegStrategy.ZIPFAN

    def test_reproducible(self):
        a = sample_pool(_table(), NegStrategy.UNIFORM, 30, np.random.default_rng(5))
        b = sample_pool(_table(), NegStrategy.UNIFORM, 30, np.random.default_rng(5))
        np.testing.assert_array_equal(a.ids, b.ids)

    def test_bad_pool_size(self):
        with pytest.raises(ValueError):
            sample_pool(_table(), NegStrategy.UNIFORM, 0, np.random.default_rng(0))

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "strategy", [NegStrategy.UNIFORM, NegStrategy.FREQ_0_5, NegStrategy.ZIPFAN]
    )
    def test_empirical_frequencies(self, strategy):
        seqs = [
            sequence_of(100, [(3 + i, OUT, 9, 1)] * (10 - i)) for i in range(10)
        ]
        table = build_frequency_table(seqs, 20)
        sampler = SamplerFactory.create(strategy, table)
        n = 100_000
        pool = sampler.sample(n, np.random.default_rng(2024))
        observed = np.array([np.count_nonzero(pool.ids == i) for i in table.ids])
        expected = sampler.probs * n
        chi_square = float(((observed - expected) ** 2 / expected).sum())
        # 9 degrees of freedom; 35 is far past the 0.1% critical value
        assert chi_square < 35.0


class TestNegSampleConfig:
    def test_coerces_strategy(self):
        assert NegSampleConfig(strategy="FREQ_0_5").strategy is NegStrategy.FREQ_0_5

    def test_rejects_empty_pool(self):
        with pytest.raises(ValueError):
            NegSampleConfig(pool_size=0)
