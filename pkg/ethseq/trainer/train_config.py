from typing import Dict, Union

from ethseq.configurable import Configurable
from ethseq.model.model_config import ModelConfig
from ethseq.negsample.negsample_config import NegSampleConfig


class TrainConfig(Configurable):
    """
    Configuration class for masked address pre-training.

    :param mask_ratio: Fraction of non-head records masked per sequence (default: 0.8).
    :type mask_ratio: float
    :param batch_size: Sequences per optimizer step (default: 256).
    :type batch_size: int
    :param epochs: Passes over the sequences (default: 10).
    :type epochs: int
    :param learning_rate: Adam step size after warm-up (default: 1e-4).
    :type learning_rate: float
    :param warmup_fraction: Share of the steps over which the learning rate rises
                            linearly from zero (default: 0.01).
    :type warmup_fraction: float
    :param clip_norm: Global gradient norm cap (default: 5.0).
    :type clip_norm: float
    :param shard_size: Sequences per gradient shard. Shards are evaluated
                       concurrently and summed in a fixed order (default: 32).
    :type shard_size: int
    :param seed: Seed of parameter initialization, masking, pools and dropout (default: 0).
    :type seed: int
    :param threads: Worker threads for gradient shards (default: 1).
    :type threads: int
    :param dedup: Whether the sequences were de-duplicated; recorded so that a
                  checkpoint describes its whole pipeline (default: True).
    :type dedup: bool
    :param model_config: Encoder configuration.
    :type model_config: Union[ModelConfig, Dict]
    :param negsample_config: Negative sampling configuration.
    :type negsample_config: Union[NegSampleConfig, Dict]
    """

    def __init__(
        self,
        mask_ratio: float = 0.8,
        batch_size: int = 256,
        epochs: int = 10,
        learning_rate: float = 1e-4,
        warmup_fraction: float = 0.01,
        clip_norm: float = 5.0,
        shard_size: int = 32,
        seed: int = 0,
        threads: int = 1,
        dedup: bool = True,
        model_config: Union[ModelConfig, Dict] = ModelConfig(),
        negsample_config: Union[NegSampleConfig, Dict] = NegSampleConfig(),
    ) -> None:
        if not 0.0 < mask_ratio <= 1.0:
            raise ValueError(f"mask_ratio must lie in (0, 1], got {mask_ratio}")
        if batch_size < 1 or shard_size < 1:
            raise ValueError("batch_size and shard_size must be positive")
        self.mask_ratio = mask_ratio
        self.batch_size = batch_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.warmup_fraction = warmup_fraction
        self.clip_norm = clip_norm
        self.shard_size = shard_size
        self.seed = seed
        self.threads = threads
        self.dedup = dedup
        self.model_config = (
            model_config
            if isinstance(model_config, ModelConfig)
            else ModelConfig(**model_config)
        )
        self.negsample_config = (
            negsample_config
            if isinstance(negsample_config, NegSampleConfig)
            else NegSampleConfig(**negsample_config)
        )

    def describe(self) -> Dict[str, str]:
        """
        One entry per component an ablation flag can switch, so that two
        configurations can be compared component by component.

        :return: Component name to its setting.
        :rtype: Dict[str, str]
        """
        model = self.model_config
        neg = self.negsample_config
        pool = (
            f"shared:{neg.pool_size}"
            if neg.batch_sharing
            else f"per-sequence:{neg.per_sequence_pool_size}"
        )
        return {
            "deduplication": "on" if self.dedup else "off",
            "masking": f"ratio={self.mask_ratio}",
            "dropout": f"ratio={model.dropout}",
            "negative_strategy": neg.strategy.value,
            "negative_pool": pool,
            "transaction_features": "on" if model.tranx_features else "off",
            "in_out_separation": "on" if model.in_out_separation else "off",
            "erc20_gate": "on" if model.erc20_gate else "off",
        }
