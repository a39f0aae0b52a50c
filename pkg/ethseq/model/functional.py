"""
Forward and backward primitives shared by the embedding, encoder and heads.
Every backward takes the upstream gradient first, then whatever the forward cached.
"""

from typing import Optional, Tuple

import numpy as np

_GELU_C = np.sqrt(2.0 / np.pi)
_GELU_K = 0.044715


def gelu(x: np.ndarray) -> np.ndarray:
    """
    Tanh approximation of GELU.
    """
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + _GELU_K * x**3)))


def gelu_backward(dy: np.ndarray, x: np.ndarray) -> np.ndarray:
    t = np.tanh(_GELU_C * (x + _GELU_K * x**3))
    dgelu = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (1.0 + 3.0 * _GELU_K * x * x)
    return dy * dgelu


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def layer_norm(
    x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float
) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """
    Normalize over the last axis.

    :return: Output and the ``(x_hat, inv_std)`` cache for the backward pass.
    :rtype: Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray]]
    """
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    x_hat = centered * inv_std
    return x_hat * gamma + beta, (x_hat, inv_std)


def layer_norm_backward(
    dy: np.ndarray, cache: Tuple[np.ndarray, np.ndarray], gamma: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    :return: ``(dx, dgamma, dbeta)``.
    :rtype: Tuple[np.ndarray, np.ndarray, np.ndarray]
    """
    x_hat, inv_std = cache
    axes = tuple(range(dy.ndim - 1))
    dgamma = (dy * x_hat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    dx_hat = dy * gamma
    dx = inv_std * (
        dx_hat
        - dx_hat.mean(axis=-1, keepdims=True)
        - x_hat * (dx_hat * x_hat).mean(axis=-1, keepdims=True)
    )
    return dx, dgamma, dbeta


def masked_softmax(scores: np.ndarray, key_valid: np.ndarray) -> np.ndarray:
    """
    Softmax over the last axis where invalid keys get exactly zero weight.
    Every row must have at least one valid key.

    :param scores: Attention scores, ``(..., N, N)``.
    :type scores: np.ndarray
    :param key_valid: Boolean mask broadcastable to ``scores``.
    :type key_valid: np.ndarray
    :return: Row-stochastic weights.
    :rtype: np.ndarray
    """
    masked = np.where(key_valid, scores, -np.inf)
    masked = masked - masked.max(axis=-1, keepdims=True)
    e = np.exp(masked)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(dp: np.ndarray, p: np.ndarray) -> np.ndarray:
    return p * (dp - (p * dp).sum(axis=-1, keepdims=True))


def logsumexp(x: np.ndarray, axis: int = -1) -> np.ndarray:
    m = x.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(x - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def dropout_mask(
    shape: Tuple[int, ...], ratio: float, rng: Optional[np.random.Generator], dtype: np.dtype
) -> Optional[np.ndarray]:
    """
    Inverted-dropout mask: kept entries are ``1 / (1 - ratio)``, dropped entries 0.

    :return: The mask, or ``None`` when dropout is inactive (ratio 0 or no generator).
    :rtype: Optional[np.ndarray]
    """
    if ratio <= 0.0 or rng is None:
        return None
    keep = rng.random(shape) >= ratio
    return keep.astype(dtype) / dtype.type(1.0 - ratio)


def apply_mask(x: np.ndarray, mask: Optional[np.ndarray]) -> np.ndarray:
    return x if mask is None else x * mask
