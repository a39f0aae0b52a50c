from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from ethseq.model.functional import (
    apply_mask,
    dropout_mask,
    gelu,
    gelu_backward,
    layer_norm,
    layer_norm_backward,
    masked_softmax,
    softmax_backward,
)
from ethseq.model.model_config import View
from ethseq.model.params import LAYER_TENSORS, ModelParams, layer_key


@dataclass
class LayerCache:
    """
    Everything one layer's backward pass needs, dropout masks included.
    """

    x: np.ndarray
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    p: np.ndarray
    attn_mask: Optional[np.ndarray]
    p_drop: np.ndarray
    ctx: np.ndarray
    ctx_mask: Optional[np.ndarray]
    ln1: Tuple[np.ndarray, np.ndarray]
    y1: np.ndarray
    u: np.ndarray
    g: np.ndarray
    ffn_mask: Optional[np.ndarray]
    ln2: Tuple[np.ndarray, np.ndarray]


@dataclass
class ForwardTrace:
    """
    Activations of one encoder stack over a batch.

    :param view: The encoder stack.
    :type view: View
    :param hidden: ``H0 .. HL``, each ``(B, N, d)``.
    :type hidden: List[np.ndarray]
    :param caches: One cache per layer.
    :type caches: List[LayerCache]
    :param valid: True on real records, ``(B, N)``.
    :type valid: np.ndarray
    """

    view: View
    hidden: List[np.ndarray]
    caches: List[LayerCache]
    valid: np.ndarray

    @property
    def output(self) -> np.ndarray:
        return self.hidden[-1]

    @property
    def attention_weights(self) -> List[np.ndarray]:
        """
        :return: Per layer, the pre-dropout attention weights ``(B, heads, N, N)``.
        :rtype: List[np.ndarray]
        """
        return [c.p for c in self.caches]


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    b, n, d = x.shape
    return x.reshape(b, n, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, n, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, n, h * dh)


def attention_weights(q: np.ndarray, k: np.ndarray, key_valid: np.ndarray) -> np.ndarray:
    scores = (q @ np.swapaxes(k, -1, -2)) / np.sqrt(q.shape[-1])
    return masked_softmax(scores, key_valid)


def scaled_dot_attention(
    q: np.ndarray, k: np.ndarray, v: np.ndarray, key_valid: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    ``softmax(q k^T / sqrt(d_head)) v`` over the valid keys.

    :param q: Queries, ``(..., N, d_head)``.
    :type q: np.ndarray
    :param k: Keys, ``(..., N, d_head)``.
    :type k: np.ndarray
    :param v: Values, ``(..., N, d_head)``.
    :type v: np.ndarray
    :param key_valid: Boolean mask broadcastable to ``(..., N, N)``.
    :type key_valid: np.ndarray
    :return: Attended values and the attention weights.
    :rtype: Tuple[np.ndarray, np.ndarray]
    """
    p = attention_weights(q, k, key_valid)
    return p @ v, p


def _layer_forward(
    x: np.ndarray,
    valid: np.ndarray,
    params: ModelParams,
    view: View,
    layer: int,
    dropout: float,
    rng: Optional[np.random.Generator],
) -> Tuple[np.ndarray, LayerCache]:
    def w(name: str) -> np.ndarray:
        return params[layer_key(view, layer, name)]

    config = params.config
    dtype = np.dtype(x.dtype)
    q = _split_heads(x @ w("wq"), config.heads)
    k = _split_heads(x @ w("wk"), config.heads)
    v = _split_heads(x @ w("wv"), config.heads)
    p = attention_weights(q, k, valid[:, None, None, :])
    attn_mask = dropout_mask(p.shape, dropout, rng, dtype)
    p_drop = apply_mask(p, attn_mask)
    ctx = _merge_heads(p_drop @ v)
    ctx_mask = dropout_mask(ctx.shape, dropout, rng, dtype)
    y1, ln1 = layer_norm(x + apply_mask(ctx, ctx_mask), w("ln1.g"), w("ln1.b"), config.ln_eps)

    u = y1 @ w("w1") + w("b1")
    g = gelu(u)
    f = g @ w("w2") + w("b2")
    ffn_mask = dropout_mask(f.shape, dropout, rng, dtype)
    out, ln2 = layer_norm(y1 + apply_mask(f, ffn_mask), w("ln2.g"), w("ln2.b"), config.ln_eps)
    cache = LayerCache(
        x, q, k, v, p, attn_mask, p_drop, ctx, ctx_mask, ln1, y1, u, g, ffn_mask, ln2
    )
    return out, cache


def encoder_forward(
    h0: np.ndarray,
    pad_mask: Optional[np.ndarray],
    params: ModelParams,
    view: View = View.FULL,
    dropout: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> ForwardTrace:
    """
    Run one encoder stack: per layer, multi-head scaled dot-product attention
    with residual and layer normalization, then a GELU feed-forward block with
    residual and layer normalization (post-norm). Dropout hits the attention
    weights and both sub-layer outputs when ``dropout > 0`` and a generator
    is given; the masks are kept in the trace.

    :param h0: Initial representations, ``(N, d)`` or ``(B, N, d)``.
    :type h0: np.ndarray
    :param pad_mask: True on real records, ``(N,)`` or ``(B, N)``; ``None`` means no padding.
    :type pad_mask: Optional[np.ndarray]
    :param params: Model parameters.
    :type params: ModelParams
    :param view: Which encoder stack to run.
    :type view: View
    :param dropout: Dropout ratio.
    :type dropout: float
    :param rng: Generator for the dropout masks.
    :type rng: Optional[np.random.Generator]
    :return: The forward trace.
    :rtype: ForwardTrace
    :raises ValueError: If the sequence is longer than ``max_seq_len``.
    """
    if h0.ndim == 2:
        h0 = h0[None]
        pad_mask = None if pad_mask is None else pad_mask[None]
    n = h0.shape[1]
    if n > params.config.max_seq_len:
        raise ValueError(f"Sequence length {n} exceeds max_seq_len {params.config.max_seq_len}")
    valid = np.ones(h0.shape[:2], dtype=bool) if pad_mask is None else pad_mask.astype(bool)

    hidden = [h0]
    caches = []
    x = h0
    for layer in range(params.config.layers):
        x, cache = _layer_forward(x, valid, params, view, layer, dropout, rng)
        hidden.append(x)
        caches.append(cache)
    return ForwardTrace(view, hidden, caches, valid)


def _flat_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


def encoder_backward(
    d_out: np.ndarray,
    trace: ForwardTrace,
    params: ModelParams,
    grads: Dict[str, np.ndarray],
) -> np.ndarray:
    """
    Back-propagate ``dL/dHL`` through the stack, accumulating layer gradients
    into ``grads`` and reusing the recorded dropout masks.

    :param d_out: Gradient with respect to the last hidden state, ``(B, N, d)``.
    :type d_out: np.ndarray
    :param trace: The forward trace.
    :type trace: ForwardTrace
    :param params: Model parameters.
    :type params: ModelParams
    :param grads: Gradient buffers, keyed like ``params``.
    :type grads: Dict[str, np.ndarray]
    :return: Gradient with respect to ``H0``.
    :rtype: np.ndarray
    """
    config = params.config
    view = trace.view
    dx = d_out
    for layer in reversed(range(config.layers)):
        c = trace.caches[layer]
        names = {t: layer_key(view, layer, t) for t in LAYER_TENSORS}

        dr2, dg, db = layer_norm_backward(dx, c.ln2, params[names["ln2.g"]])
        grads[names["ln2.g"]] += dg
        grads[names["ln2.b"]] += db
        dy1 = dr2
        df = apply_mask(dr2, c.ffn_mask)
        grads[names["w2"]] += _flat_outer(c.g, df)
        grads[names["b2"]] += df.sum(axis=(0, 1))
        du = gelu_backward(df @ params[names["w2"]].T, c.u)
        grads[names["w1"]] += _flat_outer(c.y1, du)
        grads[names["b1"]] += du.sum(axis=(0, 1))
        dy1 = dy1 + du @ params[names["w1"]].T

        dr1, dg, db = layer_norm_backward(dy1, c.ln1, params[names["ln1.g"]])
        grads[names["ln1.g"]] += dg
        grads[names["ln1.b"]] += db
        dx = dr1
        dctx = _split_heads(apply_mask(dr1, c.ctx_mask), config.heads)
        dp_drop = dctx @ np.swapaxes(c.v, -1, -2)
        dv = np.swapaxes(c.p_drop, -1, -2) @ dctx
        dp = apply_mask(dp_drop, c.attn_mask)
        dscores = softmax_backward(dp, c.p) / np.sqrt(config.head_dim)
        dq = dscores @ c.k
        dk = np.swapaxes(dscores, -1, -2) @ c.q

        for name, dproj in (("wq", dq), ("wk", dk), ("wv", dv)):
            merged = _merge_heads(dproj)
            grads[names[name]] += _flat_outer(c.x, merged)
            dx = dx + merged @ params[names[name]].T
    return dx
