from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from ethseq.errors import DataError
from ethseq.model.functional import apply_mask, dropout_mask, gelu, gelu_backward, sigmoid

HEAD_TENSORS = ("head.w1", "head.b1", "head.w2", "head.b2")
# Scalar stored next to the weights in head.npz
DROPOUT_KEY = "head.dropout"
DEFAULT_DROPOUT = 0.2


@dataclass
class HeadCache:
    x: np.ndarray
    u: np.ndarray
    g: np.ndarray
    mask: Optional[np.ndarray]


def bce_with_logits(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean binary cross-entropy of sigmoid outputs, computed from the logits.

    :return: The loss and its gradient with respect to the logits.
    :rtype: Tuple[float, np.ndarray]
    """
    y = labels.astype(logits.dtype)
    # softplus(z) - y z, stable for both signs
    losses = np.maximum(logits, 0) - logits * y + np.log1p(np.exp(-np.abs(logits)))
    grad = (sigmoid(logits) - y) / logits.dtype.type(len(logits))
    return float(losses.mean()), grad


class ClassifierHead:
    """
    Two-layer perceptron scoring account representations:
    ``sigmoid(w2 . dropout(GELU(x w1 + b1)) + b2)``.

    :param tensors: The named weights.
    :type tensors: Dict[str, np.ndarray]
    :param dropout: Dropout ratio on the hidden layer while training.
    :type dropout: float
    """

    def __init__(
        self, tensors: Dict[str, np.ndarray], dropout: float = DEFAULT_DROPOUT
    ) -> None:
        self.tensors = tensors
        self.dropout = dropout

    @classmethod
    def initialize(
        cls,
        input_size: int,
        hidden: int,
        rng: np.random.Generator,
        dropout: float = DEFAULT_DROPOUT,
        dtype: np.dtype = np.dtype(np.float32),
    ) -> "ClassifierHead":
        tensors = {
            "head.w1": rng.normal(0.0, 1.0 / np.sqrt(input_size), (input_size, hidden)),
            "head.b1": np.zeros(hidden),
            "head.w2": rng.normal(0.0, 1.0 / np.sqrt(hidden), (hidden, 1)),
            "head.b2": np.zeros(1),
        }
        return cls({k: v.astype(dtype) for k, v in tensors.items()}, dropout)

    @property
    def input_size(self) -> int:
        return self.tensors["head.w1"].shape[0]

    def forward(
        self, x: np.ndarray, rng: Optional[np.random.Generator] = None
    ) -> Tuple[np.ndarray, HeadCache]:
        """
        :param x: Representations, ``(n, D)``.
        :type x: np.ndarray
        :param rng: Generator for the dropout mask; ``None`` disables dropout.
        :type rng: Optional[np.random.Generator]
        :return: Logits ``(n,)`` and the backward cache.
        :rtype: Tuple[np.ndarray, HeadCache]
        """
        x = x.astype(self.tensors["head.w1"].dtype)
        u = x @ self.tensors["head.w1"] + self.tensors["head.b1"]
        g = gelu(u)
        mask = dropout_mask(g.shape, self.dropout, rng, g.dtype)
        logits = apply_mask(g, mask) @ self.tensors["head.w2"] + self.tensors["head.b2"]
        return logits[:, 0], HeadCache(x, u, g, mask)

    def backward(
        self, d_logits: np.ndarray, cache: HeadCache
    ) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
        """
        :return: Gradients of the head's tensors and of its input.
        :rtype: Tuple[Dict[str, np.ndarray], np.ndarray]
        """
        w2 = self.tensors["head.w2"]
        dl = d_logits[:, None]
        g_drop = apply_mask(cache.g, cache.mask)
        grads = {"head.w2": g_drop.T @ dl, "head.b2": dl.sum(axis=0)}
        du = gelu_backward(apply_mask(dl @ w2.T, cache.mask), cache.u)
        grads["head.w1"] = cache.x.T @ du
        grads["head.b1"] = du.sum(axis=0)
        return grads, du @ self.tensors["head.w1"].T

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        logits, _ = self.forward(x)
        return sigmoid(logits)

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "wb") as stream:
            np.savez(stream, **self.tensors, **{DROPOUT_KEY: np.array(self.dropout)})

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ClassifierHead":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"Classifier head not found: {path}")
        with np.load(path) as data:
            missing = [name for name in HEAD_TENSORS if name not in data]
            if missing:
                raise DataError(f"Classifier head {path} lacks tensors {missing}")
            dropout = float(data[DROPOUT_KEY]) if DROPOUT_KEY in data else DEFAULT_DROPOUT
            return cls({name: data[name] for name in HEAD_TENSORS}, dropout)
