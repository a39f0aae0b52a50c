from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from ethseq.model.model_config import ModelConfig, View
from ethseq.seqgen.sequence import AMOUNT_BINS, COUNT_BINS, TIME_BINS
from ethseq.seqgen.vocabulary import PAD_ID

# (table name, rows) of the feature tables other than address and position
FEATURE_TABLES: List[Tuple[str, int]] = [
    ("emb.account_type", 3),
    ("emb.direction", 3),
    ("emb.amount", AMOUNT_BINS),
    ("emb.count", COUNT_BINS),
    ("emb.time", TIME_BINS),
]

LAYER_TENSORS = ("wq", "wk", "wv", "ln1.g", "ln1.b", "w1", "b1", "w2", "b2", "ln2.g", "ln2.b")


def layer_key(view: View, layer: int, tensor: str) -> str:
    return f"{view.value.lower()}.{layer}.{tensor}"


def _truncated_normal(
    rng: np.random.Generator, shape: Tuple[int, ...], std: float
) -> np.ndarray:
    # Resample anything beyond two standard deviations
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2.0 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2.0 * std
    return out


class ModelParams:
    """
    Every trainable tensor of the model, by name, in a fixed order.

    The embedding tables are shared by all encoder stacks; each stack
    (``View``) has its own Transformer layers. The address table doubles as
    the output table scored by the loss. Its [PAD] row stays zero.
    """

    def __init__(self, tensors: Dict[str, np.ndarray], config: ModelConfig) -> None:
        self.tensors = tensors
        self.config = config

    @classmethod
    def initialize(
        cls,
        config: ModelConfig,
        vocab_size: int,
        rng: np.random.Generator,
        dtype: np.dtype = np.dtype(np.float32),
    ) -> "ModelParams":
        """
        Truncated-normal tables and projections, zero biases and shifts, unit
        normalization scales.

        :param config: Model configuration.
        :type config: ModelConfig
        :param vocab_size: Rows of the address table.
        :type vocab_size: int
        :param rng: Random generator.
        :type rng: np.random.Generator
        :param dtype: Floating point type of every tensor.
        :type dtype: np.dtype
        :return: Fresh parameters.
        :rtype: ModelParams
        """
        shapes = cls.shapes(config, vocab_size)
        tensors: Dict[str, np.ndarray] = {}
        for name, shape in shapes.items():
            leaf = name.rsplit(".", 1)[-1]
            if leaf in ("g",):
                value = np.ones(shape)
            elif leaf in ("b", "b1", "b2"):
                value = np.zeros(shape)
            else:
                value = _truncated_normal(rng, shape, config.init_std)
            tensors[name] = value.astype(dtype)
        tensors["emb.address"][PAD_ID] = 0.0
        return cls(tensors, config)

    @staticmethod
    def shapes(config: ModelConfig, vocab_size: int) -> Dict[str, Tuple[int, ...]]:
        d, ff = config.hidden, config.ffn_hidden
        shapes: Dict[str, Tuple[int, ...]] = {"emb.address": (vocab_size, d)}
        for name, rows in FEATURE_TABLES:
            shapes[name] = (rows, d)
        shapes["emb.position"] = (config.max_seq_len, d)
        shapes["gate.w"] = (d, 2 * d)
        shapes["gate.b"] = (d,)
        per_layer = {
            "wq": (d, d),
            "wk": (d, d),
            "wv": (d, d),
            "ln1.g": (d,),
            "ln1.b": (d,),
            "w1": (d, ff),
            "b1": (ff,),
            "w2": (ff, d),
            "b2": (d,),
            "ln2.g": (d,),
            "ln2.b": (d,),
        }
        for view in config.views:
            for layer in range(config.layers):
                for tensor in LAYER_TENSORS:
                    shapes[layer_key(view, layer, tensor)] = per_layer[tensor]
        return shapes

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __iter__(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self.tensors.items())

    def __len__(self) -> int:
        return len(self.tensors)

    @property
    def dtype(self) -> np.dtype:
        return self.tensors["emb.address"].dtype

    @property
    def vocab_size(self) -> int:
        return self.tensors["emb.address"].shape[0]

    def layer(self, view: View, layer: int, tensor: str) -> np.ndarray:
        return self.tensors[layer_key(view, layer, tensor)]

    def zeros_like(self) -> "ModelParams":
        return ModelParams({k: np.zeros_like(v) for k, v in self.tensors.items()}, self.config)

    def copy(self, dtype: Optional[np.dtype] = None) -> "ModelParams":
        return ModelParams(
            {k: v.astype(dtype or v.dtype, copy=True) for k, v in self.tensors.items()},
            self.config,
        )

    def all_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(v))) for v in self.tensors.values())

    def equals(self, other: "ModelParams") -> bool:
        """
        Bit-exact comparison of names, shapes, dtypes and values.
        """
        return list(self.tensors) == list(other.tensors) and all(
            a.dtype == b.dtype and a.shape == b.shape and np.array_equal(a, b)
            for a, b in zip(self.tensors.values(), other.tensors.values())
        )
