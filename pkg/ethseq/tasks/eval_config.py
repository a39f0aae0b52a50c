from typing import Dict, List, Optional, Union

from ethseq.configurable import Configurable
from ethseq.trainer.finetune_config import FinetuneConfig

DEFAULT_KS = [1, 3, 5, 10, 100, 1000]


class EvalConfig(Configurable):
    """
    Configuration class for the downstream evaluations.

    :param runs: Repetitions of the phishing evaluation, seeded 0..runs-1 on top
                 of the head seed; the best F1 and the mean and spread are reported (default: 5).
    :type runs: int
    :param thresholds: Extra decision thresholds to report besides the head's own (default: none).
    :type thresholds: Optional[List[float]]
    :param ks: Cut-offs of the hit ratios (default: 1, 3, 5, 10, 100, 1000).
    :type ks: Optional[List[int]]
    :param attention_buckets: Frequency-rank buckets of the attention diagnostic (default: 100).
    :type attention_buckets: int
    :param attention_layer: 1-based Transformer layer the diagnostic reads (default: 1).
    :type attention_layer: int
    :param threads: Worker threads (default: 1).
    :type threads: int
    :param finetune_config: Head settings, shared with fine-tuning.
    :type finetune_config: Union[FinetuneConfig, Dict]
    """

    def __init__(
        self,
        runs: int = 5,
        thresholds: Optional[List[float]] = None,
        ks: Optional[List[int]] = None,
        attention_buckets: int = 100,
        attention_layer: int = 1,
        threads: int = 1,
        finetune_config: Union[FinetuneConfig, Dict] = FinetuneConfig(),
    ) -> None:
        if runs < 1:
            raise ValueError(f"runs must be at least 1, got {runs}")
        self.runs = runs
        self.thresholds = list(thresholds) if thresholds else []
        self.ks = sorted(ks) if ks else list(DEFAULT_KS)
        self.attention_buckets = attention_buckets
        self.attention_layer = attention_layer
        self.threads = threads
        self.finetune_config = (
            finetune_config
            if isinstance(finetune_config, FinetuneConfig)
            else FinetuneConfig(**finetune_config)
        )
