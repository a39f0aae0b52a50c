from enum import Enum
from typing import Dict

from ethseq.configurable import Configurable


class NegStrategy(Enum):
    UNIFORM = "UNIFORM"
    FREQ_0_5 = "FREQ_0_5"
    FREQ_1_0 = "FREQ_1_0"
    ZIPFAN = "ZIPFAN"


# Command-line spellings
STRATEGY_FLAGS: Dict[str, NegStrategy] = {
    "uniform": NegStrategy.UNIFORM,
    "freq0.5": NegStrategy.FREQ_0_5,
    "freq1.0": NegStrategy.FREQ_1_0,
    "zipfan": NegStrategy.ZIPFAN,
}

FREQUENCY_EXPONENTS: Dict[NegStrategy, float] = {
    NegStrategy.FREQ_0_5: 0.5,
    NegStrategy.FREQ_1_0: 1.0,
}


class NegSampleConfig(Configurable):
    """
    Configuration class for negative sampling.

    :param strategy: Distribution negatives are drawn from (default: NegStrategy.ZIPFAN).
    :type strategy: NegStrategy
    :param pool_size: Size of the pool shared by every masked position of a batch (default: 5000).
    :type pool_size: int
    :param batch_sharing: Share one pool across the batch (default: True).
                          When off, each sequence draws its own, smaller pool.
    :type batch_sharing: bool
    :param per_sequence_pool_size: Pool size per sequence when sharing is off (default: 20).
    :type per_sequence_pool_size: int
    """

    def __init__(
        self,
        strategy: NegStrategy = NegStrategy.ZIPFAN,
        pool_size: int = 5000,
        batch_sharing: bool = True,
        per_sequence_pool_size: int = 20,
    ) -> None:
        self.strategy = strategy if isinstance(strategy, NegStrategy) else NegStrategy(strategy)
        if pool_size < 1 or per_sequence_pool_size < 1:
            raise ValueError("Negative pool sizes must be at least 1")
        self.pool_size = pool_size
        self.batch_sharing = batch_sharing
        self.per_sequence_pool_size = per_sequence_pool_size
