import csv
from typing import List, Sequence, TextIO, Tuple

import numpy as np

from ethseq.model.embedding import embed_forward
from ethseq.model.encoder import encoder_forward
from ethseq.model.inputs import build_view_input, unmasked_samples
from ethseq.model.model_config import View
from ethseq.model.params import ModelParams
from ethseq.negsample.frequency_table import FrequencyTable
from ethseq.seqgen.sequence import TxSequence

ATTENTION_COLUMNS = ("rank_bucket", "mean_attention")


def attention_received(
    params: ModelParams, sequences: Sequence[TxSequence], layer: int = 1
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Attention each record receives in one layer of the full-view stack,
    averaged over heads and over the valid records attending to it.

    :param params: Trained parameters.
    :type params: ModelParams
    :param sequences: Unmasked sequence pieces.
    :type sequences: Sequence[TxSequence]
    :param layer: 1-based layer index.
    :type layer: int
    :return: Counterparty ids ``(B, N)`` and received attention ``(B, N)``;
             padding receives 0.
    :rtype: Tuple[np.ndarray, np.ndarray]
    :raises ValueError: If ``layer`` is outside the stack.
    """
    config = params.config
    if not 1 <= layer <= config.layers:
        raise ValueError(f"layer must lie in 1..{config.layers}, got {layer}")
    inputs = build_view_input(
        [unmasked_samples(seq, [View.FULL])[View.FULL] for seq in sequences], config
    )
    h0, _ = embed_forward(inputs, params)
    trace = encoder_forward(h0, inputs.valid, params, View.FULL)
    p = trace.attention_weights[layer - 1].mean(axis=1)
    queries = inputs.valid.astype(p.dtype)
    received = (p * queries[:, :, None]).sum(axis=1) / queries.sum(axis=1, keepdims=True)
    return inputs.ids, np.where(inputs.valid, received, 0.0)


def attention_by_rank(
    params: ModelParams,
    sequences: Sequence[TxSequence],
    table: FrequencyTable,
    layer: int = 1,
    buckets: int = 100,
    batch_size: int = 64,
) -> List[Tuple[int, float]]:
    """
    Mean attention received by addresses, grouped by their frequency rank.
    Each address first gets its mean over all occurrences; buckets then average
    their addresses. Bucket ``b`` holds ranks ``[b * R / buckets, (b + 1) * R / buckets)``
    for ``R`` ranked addresses. Unranked ids and empty buckets are left out.

    :param params: Trained parameters.
    :type params: ModelParams
    :param sequences: Unmasked sequence pieces.
    :type sequences: Sequence[TxSequence]
    :param table: Frequency table of the training corpus.
    :type table: FrequencyTable
    :param layer: 1-based layer index.
    :type layer: int
    :param buckets: Number of rank buckets.
    :type buckets: int
    :param batch_size: Sequences encoded at once.
    :type batch_size: int
    :return: ``(rank_bucket, mean_attention)`` rows in bucket order.
    :rtype: List[Tuple[int, float]]
    """
    if buckets < 1:
        raise ValueError(f"buckets must be positive, got {buckets}")
    totals = np.zeros(len(table.ranks), dtype=np.float64)
    counts = np.zeros(len(table.ranks), dtype=np.int64)
    for start in range(0, len(sequences), batch_size):
        ids, received = attention_received(params, sequences[start : start + batch_size], layer)
        ranked = table.ranks[ids] >= 0
        np.add.at(totals, ids[ranked], received[ranked])
        np.add.at(counts, ids[ranked], 1)

    seen = np.flatnonzero(counts)
    per_address = totals[seen] / counts[seen]
    bucket_of = table.ranks[seen] * buckets // table.max_rank
    rows = []
    for b in np.unique(bucket_of):
        rows.append((int(b), float(per_address[bucket_of == b].mean())))
    return rows


def write_attention_csv(rows: Sequence[Tuple[int, float]], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(ATTENTION_COLUMNS)
    for bucket, value in rows:
        writer.writerow((bucket, f"{value:.8f}"))
