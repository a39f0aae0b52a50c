from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from ethseq.model.embedding import EmbedCache, embed_backward, embed_forward
from ethseq.model.encoder import ForwardTrace, encoder_backward, encoder_forward
from ethseq.model.inputs import MaskedBatch, ViewInput, build_view_input, view_samples
from ethseq.model.loss import LossResult, map_loss, map_loss_backward
from ethseq.model.model_config import ModelConfig, View
from ethseq.model.params import ModelParams


@dataclass
class ViewPass:
    """
    The forward pass of one encoder stack over a batch.
    """

    inputs: ViewInput
    embed_cache: EmbedCache
    trace: ForwardTrace

    def masked_hidden(self) -> np.ndarray:
        out = self.trace.output
        return out.reshape(-1, out.shape[-1])[self.inputs.masked_flat]


@dataclass
class LossComputation:
    """
    A completed forward pass of a masked batch through every encoder stack.
    Dropout masks live in the traces so the backward pass differentiates the
    same stochastic function.

    :param batch: The batch.
    :type batch: MaskedBatch
    :param passes: One pass per encoder stack, in concatenation order.
    :type passes: Dict[View, ViewPass]
    """

    batch: MaskedBatch
    passes: Dict[View, ViewPass]

    def masked_rows(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        passes = list(self.passes.values())
        hidden = np.concatenate([p.masked_hidden() for p in passes])
        positives = np.concatenate([p.inputs.positives for p in passes])
        rows = np.concatenate([p.inputs.masked_row for p in passes])
        return hidden, positives, rows

    @property
    def masked_count(self) -> int:
        return sum(len(p.inputs.positives) for p in self.passes.values())


def forward(
    batch: MaskedBatch,
    params: ModelParams,
    dropout: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> LossComputation:
    """
    Embed and encode a masked batch through every encoder stack the
    configuration enables. The incoming and outgoing views are cut from the
    masked full sequences.

    :param batch: The batch.
    :type batch: MaskedBatch
    :param params: Model parameters.
    :type params: ModelParams
    :param dropout: Dropout ratio; 0 for a deterministic pass.
    :type dropout: float
    :param rng: Generator for the dropout masks.
    :type rng: Optional[np.random.Generator]
    :return: The forward computation.
    :rtype: LossComputation
    """
    config = params.config
    per_sequence = [view_samples(m, config.views) for m in batch.sequences]
    passes = {}
    for view in config.views:
        inputs = build_view_input([s[view] for s in per_sequence], config)
        h0, cache = embed_forward(inputs, params)
        trace = encoder_forward(h0, inputs.valid, params, view, dropout, rng)
        passes[view] = ViewPass(inputs, cache, trace)
    return LossComputation(batch, passes)


def batch_loss(
    computation: LossComputation, params: ModelParams, keep_logits: bool = True
) -> LossResult:
    """
    Contrastive loss of a forward computation, averaged over the masked
    positions of every view.
    """
    hidden, positives, rows = computation.masked_rows()
    return map_loss(
        hidden,
        positives,
        computation.batch.pool,
        params["emb.address"],
        masked_row=rows,
        keep_logits=keep_logits,
    )


def gradients(
    computation: LossComputation,
    params: ModelParams,
    weight: Optional[float] = None,
) -> Tuple[LossResult, ModelParams]:
    """
    Exact gradients of the batch loss with respect to every parameter.

    :param computation: The forward computation to differentiate.
    :type computation: LossComputation
    :param params: The parameters it was computed with.
    :type params: ModelParams
    :param weight: Scale of the summed per-position losses; defaults to one over
                   this computation's masked positions. Shards of a larger batch
                   pass one over the whole batch's count.
    :type weight: Optional[float]
    :return: The loss (without logits) and a parameter-shaped gradient set.
    :rtype: Tuple[LossResult, ModelParams]
    """
    grads = params.zeros_like()
    hidden, positives, rows = computation.masked_rows()
    scale = 1.0 / computation.masked_count if weight is None else weight
    result, d_hidden = map_loss_backward(
        hidden,
        positives,
        computation.batch.pool,
        params["emb.address"],
        grads.tensors["emb.address"],
        scale,
        masked_row=rows,
    )

    offset = 0
    for view_pass in computation.passes.values():
        inputs = view_pass.inputs
        m = len(inputs.positives)
        out = view_pass.trace.output
        d_flat = np.zeros((out.shape[0] * out.shape[1], out.shape[2]), dtype=out.dtype)
        d_flat[inputs.masked_flat] = d_hidden[offset : offset + m]
        d_out = d_flat.reshape(out.shape)
        offset += m
        d_h0 = encoder_backward(d_out, view_pass.trace, params, grads.tensors)
        embed_backward(d_h0, inputs, view_pass.embed_cache, params, grads.tensors)
    return result, grads


def scored_positions(batch: MaskedBatch, config: ModelConfig) -> int:
    """
    Masked positions the loss averages over: each masked record counts once in
    the full view and, with in/out separation, once more in its partial view.
    """
    return batch.masked_count * (2 if config.in_out_separation else 1)


def loss_and_gradients(
    batch: MaskedBatch,
    params: ModelParams,
    dropout: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    weight: Optional[float] = None,
) -> Tuple[LossResult, ModelParams]:
    return gradients(forward(batch, params, dropout, rng), params, weight)


def sum_gradients(parts: List[ModelParams]) -> ModelParams:
    """
    Add gradient sets left to right, so the result depends only on the order of ``parts``.
    """
    total = parts[0].copy()
    for part in parts[1:]:
        for name, value in part:
            total.tensors[name] += value
    return total
