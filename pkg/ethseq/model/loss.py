"""
Masked address prediction loss: a sampled softmax that scores each masked
position's hidden state against its true counterparty and a pool of negative
addresses, all read from the address embedding table.
"""

from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import numpy as np

from ethseq.model.functional import logsumexp

DEFAULT_CHUNK = 512


@dataclass
class LossResult:
    """
    Outcome of scoring a set of masked positions.

    :param total: Sum of the per-position negative log-likelihoods.
    :type total: float
    :param count: Number of masked positions scored.
    :type count: int
    :param collisions: Pool entries excluded because they equal the position's positive.
    :type collisions: int
    :param positive_logits: ``h_m . a_p`` per position, ``(M,)``; empty unless kept.
    :type positive_logits: np.ndarray
    :param negative_logits: ``h_m . a_n`` per position and pool entry, ``-inf`` on
                            collisions, ``(M, P)``; empty unless kept.
    :type negative_logits: np.ndarray
    """

    total: float
    count: int
    collisions: int
    positive_logits: np.ndarray
    negative_logits: np.ndarray

    @property
    def loss(self) -> float:
        return self.total / self.count


def _check(
    hidden: np.ndarray,
    positives: np.ndarray,
    pool: np.ndarray,
    masked_row: Optional[np.ndarray],
) -> None:
    if len(positives) == 0:
        raise ValueError("map_loss needs at least one masked position")
    if hidden.shape[0] != len(positives):
        raise ValueError(f"{hidden.shape[0]} hidden rows for {len(positives)} positives")
    if pool.size == 0:
        raise ValueError("Negative pool is empty")
    if pool.ndim == 2 and masked_row is None:
        raise ValueError("Per-sequence pools need the batch row of every masked position")


def _negative_ids(
    pool: np.ndarray, masked_row: Optional[np.ndarray], lo: int, hi: int
) -> np.ndarray:
    # Shared pool: (P,); per-sequence pools: (m, Ps)
    if pool.ndim == 1:
        return pool
    assert masked_row is not None
    return pool[masked_row[lo:hi]]


def _chunk_logits(
    h: np.ndarray, pos_ids: np.ndarray, neg_ids: np.ndarray, address: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    l_pos = np.einsum("md,md->m", h, address[pos_ids])
    if neg_ids.ndim == 1:
        l_neg = h @ address[neg_ids].T
        collide = neg_ids[None, :] == pos_ids[:, None]
    else:
        l_neg = np.einsum("md,mpd->mp", h, address[neg_ids])
        collide = neg_ids == pos_ids[:, None]
    l_neg = np.where(collide, -np.inf, l_neg)
    return l_pos, l_neg, collide


def _chunks(m: int, chunk: int) -> Iterator[Tuple[int, int]]:
    for lo in range(0, m, chunk):
        yield lo, min(m, lo + chunk)


def map_loss(
    hidden: np.ndarray,
    positives: np.ndarray,
    pool: np.ndarray,
    address_table: np.ndarray,
    masked_row: Optional[np.ndarray] = None,
    keep_logits: bool = True,
    chunk: int = DEFAULT_CHUNK,
) -> LossResult:
    """
    ``-mean_m log(exp(l_p) / (exp(l_p) + sum_n exp(l_n)))`` over the masked
    positions, with max subtraction. A pool entry equal to a position's
    positive is left out of that position's denominator.

    :param hidden: Final hidden states of the masked positions, ``(M, d)``.
    :type hidden: np.ndarray
    :param positives: True counterparty id of every position, ``(M,)``.
    :type positives: np.ndarray
    :param pool: Shared pool ``(P,)`` or one pool per batch row ``(B, Ps)``.
    :type pool: np.ndarray
    :param address_table: The address embedding table.
    :type address_table: np.ndarray
    :param masked_row: Batch row of every position; needed with per-row pools.
    :type masked_row: Optional[np.ndarray]
    :param keep_logits: Return the logits alongside the loss.
    :type keep_logits: bool
    :param chunk: Positions scored at once.
    :type chunk: int
    :return: The loss and, optionally, the logits.
    :rtype: LossResult
    :raises ValueError: With no masked position or an empty pool.
    """
    _check(hidden, positives, pool, masked_row)
    total = 0.0
    collisions = 0
    pos_parts: List[np.ndarray] = []
    neg_parts: List[np.ndarray] = []
    for lo, hi in _chunks(len(positives), chunk):
        neg_ids = _negative_ids(pool, masked_row, lo, hi)
        l_pos, l_neg, collide = _chunk_logits(
            hidden[lo:hi], positives[lo:hi], neg_ids, address_table
        )
        logits = np.concatenate([l_pos[:, None], l_neg], axis=1)
        total += float(np.sum(logsumexp(logits, axis=1) - l_pos, dtype=np.float64))
        collisions += int(collide.sum())
        if keep_logits:
            pos_parts.append(l_pos)
            neg_parts.append(l_neg)

    dtype = hidden.dtype
    return LossResult(
        total=total,
        count=len(positives),
        collisions=collisions,
        positive_logits=np.concatenate(pos_parts) if keep_logits else np.zeros(0, dtype),
        negative_logits=np.concatenate(neg_parts) if keep_logits else np.zeros((0, 0), dtype),
    )


def map_loss_backward(
    hidden: np.ndarray,
    positives: np.ndarray,
    pool: np.ndarray,
    address_table: np.ndarray,
    grad_address: np.ndarray,
    weight: float,
    masked_row: Optional[np.ndarray] = None,
    chunk: int = DEFAULT_CHUNK,
) -> Tuple[LossResult, np.ndarray]:
    """
    Loss and gradients of ``weight * total``. The address table gradient is
    accumulated into ``grad_address``; the gradient with respect to ``hidden``
    is returned.

    :param weight: Scale of this block's summed loss in the objective, usually
                   one over the number of masked positions across all views.
    :type weight: float
    :return: The (logit-free) loss result and ``dL/dhidden``.
    :rtype: Tuple[LossResult, np.ndarray]
    """
    _check(hidden, positives, pool, masked_row)
    d_hidden = np.zeros_like(hidden)
    total = 0.0
    collisions = 0
    for lo, hi in _chunks(len(positives), chunk):
        h = hidden[lo:hi]
        pos_ids = positives[lo:hi]
        neg_ids = _negative_ids(pool, masked_row, lo, hi)
        l_pos, l_neg, collide = _chunk_logits(h, pos_ids, neg_ids, address_table)
        logits = np.concatenate([l_pos[:, None], l_neg], axis=1)
        lse = logsumexp(logits, axis=1)
        total += float(np.sum(lse - l_pos, dtype=np.float64))
        collisions += int(collide.sum())

        probs = np.exp(logits - lse[:, None]) * hidden.dtype.type(weight)
        d_pos = probs[:, 0] - hidden.dtype.type(weight)
        d_neg = probs[:, 1:]
        if neg_ids.ndim == 1:
            d_hidden[lo:hi] = d_pos[:, None] * address_table[pos_ids] + d_neg @ (
                address_table[neg_ids]
            )
            np.add.at(grad_address, neg_ids, d_neg.T @ h)
        else:
            d_hidden[lo:hi] = d_pos[:, None] * address_table[pos_ids] + np.einsum(
                "mp,mpd->md", d_neg, address_table[neg_ids]
            )
            np.add.at(
                grad_address,
                neg_ids.reshape(-1),
                (d_neg[:, :, None] * h[:, None, :]).reshape(-1, h.shape[1]),
            )
        np.add.at(grad_address, pos_ids, d_pos[:, None] * h)

    empty = np.zeros(0, dtype=hidden.dtype)
    result = LossResult(total, len(positives), collisions, empty, empty.reshape(0, 0))
    return result, d_hidden
