from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ethseq.negsample.distributions import frequent_prob, uniform_prob, zipfan_probs
from ethseq.negsample.frequency_table import FrequencyTable
from ethseq.negsample.negsample_config import FREQUENCY_EXPONENTS, NegStrategy


@dataclass(frozen=True)
class NegativePool:
    """
    Negative addresses shared by the masked positions of a batch
    (or of one sequence, when sharing is off).

    :param ids: Vocabulary ids; may repeat.
    :type ids: np.ndarray
    :param strategy: The distribution they were drawn from.
    :type strategy: NegStrategy
    """

    ids: np.ndarray
    strategy: NegStrategy

    def __len__(self) -> int:
        return len(self.ids)


class NegativeSampler(ABC):
    """
    Draws negatives from a fixed distribution over the ranked addresses of a
    frequency table.
    """

    def __init__(self, table: FrequencyTable) -> None:
        self._table = table
        self._probs = self.probabilities(table)
        assert abs(self._probs.sum() - 1.0) < 1e-9, "Sampling distribution must sum to 1"

    @property
    @abstractmethod
    def strategy(self) -> NegStrategy:
        pass

    @abstractmethod
    def probabilities(self, table: FrequencyTable) -> np.ndarray:
        """
        Abstract method returning the probability of every rank.

        :param table: The frequency table.
        :type table: FrequencyTable
        :return: Probabilities in rank order.
        :rtype: np.ndarray
        """
        pass

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    def sample(self, pool_size: int, rng: np.random.Generator) -> NegativePool:
        """
        Draw ``pool_size`` addresses i.i.d. with replacement.

        :param pool_size: Number of draws.
        :type pool_size: int
        :param rng: Random generator.
        :type rng: np.random.Generator
        :return: The pool.
        :rtype: NegativePool
        """
        if pool_size < 1:
            raise ValueError(f"pool_size must be at least 1, got {pool_size}")
        ranks = rng.choice(len(self._probs), size=pool_size, replace=True, p=self._probs)
        return NegativePool(ids=self._table.ids[ranks], strategy=self.strategy)


class UniformSampler(NegativeSampler):
    @property
    def strategy(self) -> NegStrategy:
        return NegStrategy.UNIFORM

    def probabilities(self, table: FrequencyTable) -> np.ndarray:
        return uniform_prob(table.max_rank)


class FrequentSampler(NegativeSampler):
    def __init__(self, table: FrequencyTable, strategy: NegStrategy) -> None:
        self._strategy = strategy
        self._b = FREQUENCY_EXPONENTS[strategy]
        super().__init__(table)

    @property
    def strategy(self) -> NegStrategy:
        return self._strategy

    def probabilities(self, table: FrequencyTable) -> np.ndarray:
        return frequent_prob(table.frequencies, self._b)


class ZipfanSampler(NegativeSampler):
    @property
    def strategy(self) -> NegStrategy:
        return NegStrategy.ZIPFAN

    def probabilities(self, table: FrequencyTable) -> np.ndarray:
        return zipfan_probs(table.max_rank)


class SamplerFactory:
    """
    Factory class for creating negative samplers.
    """

    @staticmethod
    def create(strategy: NegStrategy, table: FrequencyTable) -> NegativeSampler:
        """
        Create the sampler of a strategy over a frequency table.

        :param strategy: The sampling strategy.
        :type strategy: NegStrategy
        :param table: The frequency table.
        :type table: FrequencyTable
        :return: A sampler.
        :rtype: NegativeSampler
        :raises TypeError: If the strategy is not supported.
        """
        if strategy is NegStrategy.UNIFORM:
            return UniformSampler(table)
        elif strategy in FREQUENCY_EXPONENTS:
            return FrequentSampler(table, strategy)
        elif strategy is NegStrategy.ZIPFAN:
            return ZipfanSampler(table)
        else:
            raise TypeError(f"SamplerFactory does not support strategy {strategy}.")


def sample_pool(
    table: FrequencyTable,
    strategy: NegStrategy,
    pool_size: int,
    rng: np.random.Generator,
) -> NegativePool:
    """
    Draw one negative pool.

    :param table: The frequency table.
    :type table: FrequencyTable
    :param strategy: The sampling strategy.
    :type strategy: NegStrategy
    :param pool_size: Number of i.i.d. draws.
    :type pool_size: int
    :param rng: Random generator.
    :type rng: np.random.Generator
    :return: The pool.
    :rtype: NegativePool
    """
    return SamplerFactory.create(strategy, table).sample(pool_size, rng)
