from enum import IntEnum
from typing import Iterator, List, Optional, Sequence

import numpy as np

from ethseq.model.inputs import MaskedBatch
from ethseq.negsample.negsample_config import NegSampleConfig
from ethseq.negsample.sampler import NegativeSampler
from ethseq.seqgen.masking import mask_sequence
from ethseq.seqgen.sequence import MaskedSequence, TxSequence
from ethseq.statistics import Statistics, TrainCounters


class RngStream(IntEnum):
    """
    Independent random streams derived from one training seed.
    """

    INIT = 0
    MASK = 1
    SHUFFLE = 2
    POOL = 3
    DROPOUT = 4
    HEAD = 5


def stream_rng(seed: int, stream: RngStream, *keys: int) -> np.random.Generator:
    """
    Generator for one stream, keyed by e.g. (owner, piece, epoch) or (step, shard).
    The same keys always give the same draws, whatever the schedule.
    """
    return np.random.default_rng([seed, int(stream), *[int(k) for k in keys]])


def trainable(
    sequences: Sequence[TxSequence], stats: Optional[Statistics] = None
) -> List[TxSequence]:
    """
    Sequences with at least one maskable record. Head-only sequences still get
    representations but take no part in pre-training.
    """
    kept = [seq for seq in sequences if len(seq) > 1]
    if stats is not None:
        stats.increment(TrainCounters.SKIPPED_SEQUENCES, len(sequences) - len(kept))
    return kept


def epoch_masks(
    sequences: Sequence[TxSequence], ratio: float, seed: int, epoch: int
) -> List[MaskedSequence]:
    """
    Mask every sequence afresh for one epoch, each with its own
    ``(owner, piece, epoch)`` generator.

    :param sequences: Sequences with at least one non-head record.
    :type sequences: Sequence[TxSequence]
    :param ratio: Masking ratio.
    :type ratio: float
    :param seed: Training seed.
    :type seed: int
    :param epoch: Epoch index.
    :type epoch: int
    :return: Masked sequences, in input order.
    :rtype: List[MaskedSequence]
    """
    return [
        mask_sequence(seq, ratio, stream_rng(seed, RngStream.MASK, seq.owner, seq.piece, epoch))
        for seq in sequences
    ]


def draw_pool(
    sampler: NegativeSampler,
    config: NegSampleConfig,
    n_rows: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Negatives of one batch: a single shared pool, or with sharing off one
    smaller pool per sequence, shape ``(n_rows, per_sequence_pool_size)``.
    """
    if config.batch_sharing:
        return sampler.sample(config.pool_size, rng).ids
    return np.stack(
        [sampler.sample(config.per_sequence_pool_size, rng).ids for _ in range(n_rows)]
    )


def iter_batches(
    masked: List[MaskedSequence],
    batch_size: int,
    sampler: NegativeSampler,
    config: NegSampleConfig,
    seed: int,
    epoch: int,
    first_step: int,
) -> Iterator[MaskedBatch]:
    """
    Shuffle the masked sequences of an epoch and cut them into batches, each
    with negatives drawn from the generator of its global step.

    :param masked: The epoch's masked sequences.
    :type masked: List[MaskedSequence]
    :param batch_size: Sequences per batch; the last batch may be smaller.
    :type batch_size: int
    :param sampler: Negative sampler.
    :type sampler: NegativeSampler
    :param config: Negative sampling configuration.
    :type config: NegSampleConfig
    :param seed: Training seed.
    :type seed: int
    :param epoch: Epoch index.
    :type epoch: int
    :param first_step: Global index of the epoch's first step.
    :type first_step: int
    :return: Batches in training order.
    :rtype: Iterator[MaskedBatch]
    """
    order = stream_rng(seed, RngStream.SHUFFLE, epoch).permutation(len(masked))
    for i, start in enumerate(range(0, len(masked), batch_size)):
        rows = order[start : start + batch_size]
        pool = draw_pool(
            sampler, config, len(rows), stream_rng(seed, RngStream.POOL, first_step + i)
        )
        yield MaskedBatch([masked[r] for r in rows], pool)


def shard_rows(n_rows: int, shard_size: int) -> List[List[int]]:
    return [list(range(s, min(n_rows, s + shard_size))) for s in range(0, n_rows, shard_size)]
