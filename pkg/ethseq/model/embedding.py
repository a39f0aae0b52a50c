from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from ethseq.model.functional import sigmoid
from ethseq.model.inputs import ViewInput
from ethseq.model.params import FEATURE_TABLES, ModelParams
from ethseq.seqgen.sequence import TxRecord
from ethseq.seqgen.vocabulary import MASK_ID, PAD_ID


def gate_fuse(
    a_c: np.ndarray, recipient_embeddings: np.ndarray, params: ModelParams
) -> np.ndarray:
    """
    Fuse a contract's address embedding with the mean embedding of the EOAs its
    ERC-20 transfers paid: ``beta * a_c + (1 - beta) * a_u`` with
    ``beta = sigmoid(W [a_c ; a_u] + b)``.

    :param a_c: Contract address embedding, ``(d,)``.
    :type a_c: np.ndarray
    :param recipient_embeddings: One row per recipient, ``(r, d)`` with ``r >= 1``.
    :type recipient_embeddings: np.ndarray
    :param params: Model parameters (gate weights).
    :type params: ModelParams
    :return: Fused embedding, ``(d,)``.
    :rtype: np.ndarray
    """
    recipient_embeddings = np.atleast_2d(recipient_embeddings)
    if recipient_embeddings.shape[0] == 0:
        raise ValueError("gate_fuse needs at least one recipient embedding")
    fused, _ = _gate_forward(a_c[None, :], recipient_embeddings.mean(axis=0)[None, :], params)
    return fused[0]


def _gate_forward(
    a_c: np.ndarray, a_u: np.ndarray, params: ModelParams
) -> Tuple[np.ndarray, np.ndarray]:
    z = np.concatenate([a_c, a_u], axis=1)
    beta = sigmoid(z @ params["gate.w"].T + params["gate.b"])
    return beta * a_c + (1.0 - beta) * a_u, beta


def _check_range(ids: np.ndarray, rows: int, name: str) -> None:
    if ids.size and (ids.min() < 0 or ids.max() >= rows):
        raise ValueError(f"{name} id out of range [0, {rows}): {ids.min()}..{ids.max()}")


def embed_transaction(
    record: TxRecord,
    params: ModelParams,
    masked: bool = False,
) -> np.ndarray:
    """
    Initial representation of one record: the sum of its address (gate-fused
    when it carries ERC-20 recipients and the gate is on), account type,
    direction, amount, count, time and position embeddings. Without
    transaction features only the address and position terms remain.

    :param record: The record.
    :type record: TxRecord
    :param params: Model parameters.
    :type params: ModelParams
    :param masked: Use the [MASK] row instead of the counterparty.
    :type masked: bool
    :return: ``(d,)`` vector.
    :rtype: np.ndarray
    :raises ValueError: If a feature id is outside its table.
    """
    config = params.config
    address = params["emb.address"]
    idx = MASK_ID if masked else record.counterparty
    _check_range(np.array([idx]), address.shape[0], "address")
    vector = address[idx].copy()
    if config.erc20_gate and record.token_recipients and not masked:
        recipients = np.array(record.token_recipients)
        _check_range(recipients, address.shape[0], "recipient")
        vector = gate_fuse(vector, address[recipients], params)

    if config.tranx_features:
        feature_ids = (
            int(record.counterparty_kind),
            int(record.direction),
            record.amount_bin,
            record.count_bin,
            record.time_bin,
        )
        for (name, rows), fid in zip(FEATURE_TABLES, feature_ids):
            _check_range(np.array([fid]), rows, name)
            vector = vector + params[name][fid]
    position = params["emb.position"]
    _check_range(np.array([record.position]), position.shape[0], "position")
    return vector + position[record.position]


@dataclass
class EmbedCache:
    a_c: np.ndarray
    a_u: np.ndarray
    beta: np.ndarray


def embed_forward(inp: ViewInput, params: ModelParams) -> Tuple[np.ndarray, EmbedCache]:
    """
    Batched ``embed_transaction``.

    :return: ``H0`` of shape ``(B, N, d)`` (zero on padding) and the gate cache.
    """
    config = params.config
    address = params["emb.address"]
    _check_range(inp.ids, address.shape[0], "address")
    _check_range(inp.positions, params["emb.position"].shape[0], "position")
    h = address[inp.ids]

    d = address.shape[1]
    empty = np.zeros((0, d), dtype=address.dtype)
    cache = EmbedCache(empty, empty, empty)
    if len(inp.gate_flat):
        _check_range(inp.recipients, address.shape[0], "recipient")
        flat = h.reshape(-1, d)
        a_c = flat[inp.gate_flat]
        counts = np.bincount(inp.recipient_slot, minlength=len(inp.gate_flat)).astype(h.dtype)
        a_u = np.zeros_like(a_c)
        np.add.at(a_u, inp.recipient_slot, address[inp.recipients])
        a_u /= counts[:, None]
        fused, beta = _gate_forward(a_c, a_u, params)
        flat[inp.gate_flat] = fused
        cache = EmbedCache(a_c, a_u, beta)

    if config.tranx_features:
        for col, (name, rows) in enumerate(FEATURE_TABLES):
            ids = inp.features[:, :, col]
            _check_range(ids, rows, name)
            h = h + params[name][ids]
    h = h + params["emb.position"][inp.positions]
    return h * inp.valid[:, :, None], cache


def embed_backward(
    dh: np.ndarray,
    inp: ViewInput,
    cache: EmbedCache,
    params: ModelParams,
    grads: Dict[str, np.ndarray],
) -> None:
    """
    Accumulate embedding and gate gradients into ``grads`` from ``dH0``.
    The [PAD] address row never receives gradient.
    """
    config = params.config
    d = dh.shape[-1]
    dh = dh * inp.valid[:, :, None]
    flat_ids = inp.ids.reshape(-1)
    dflat = dh.reshape(-1, d)

    daddr = grads["emb.address"]
    if len(inp.gate_flat):
        dfused = dflat[inp.gate_flat]
        beta = cache.beta
        dbeta = dfused * (cache.a_c - cache.a_u)
        da_c = dfused * beta
        da_u = dfused * (1.0 - beta)
        dpre = dbeta * beta * (1.0 - beta)
        w = params["gate.w"]
        grads["gate.w"] += dpre.T @ np.concatenate([cache.a_c, cache.a_u], axis=1)
        grads["gate.b"] += dpre.sum(axis=0)
        dz = dpre @ w
        da_c += dz[:, :d]
        da_u += dz[:, d:]
        counts = np.bincount(inp.recipient_slot, minlength=len(inp.gate_flat)).astype(dh.dtype)
        np.add.at(daddr, inp.recipients, (da_u / counts[:, None])[inp.recipient_slot])
        dflat = dflat.copy()
        dflat[inp.gate_flat] = da_c
    np.add.at(daddr, flat_ids, dflat)
    daddr[PAD_ID] = 0.0

    if config.tranx_features:
        for col, (name, _) in enumerate(FEATURE_TABLES):
            np.add.at(grads[name], inp.features[:, :, col].reshape(-1), dh.reshape(-1, d))
    np.add.at(grads["emb.position"], inp.positions.reshape(-1), dh.reshape(-1, d))
