import csv
import logging
import time
from pathlib import Path
from typing import List, Optional, TextIO, Tuple, Union

import numpy as np
from pathos.threading import ThreadPool

from ethseq.errors import DivergenceError, UsageError
from ethseq.model.inputs import MaskedBatch
from ethseq.model.loss import LossResult
from ethseq.model.network import loss_and_gradients, scored_positions, sum_gradients
from ethseq.model.params import ModelParams
from ethseq.negsample.frequency_table import build_frequency_table
from ethseq.negsample.sampler import SamplerFactory
from ethseq.seqgen.sequence_io import SequenceCorpus
from ethseq.seqgen.vocabulary import PAD_ID
from ethseq.statistics import Statistics, TrainCounters
from ethseq.trainer.batching import (
    RngStream,
    epoch_masks,
    iter_batches,
    shard_rows,
    stream_rng,
    trainable,
)
from ethseq.trainer.checkpoint import Checkpoint
from ethseq.trainer.optimizer import Adam, clip_by_global_norm, warmup_lr
from ethseq.trainer.train_config import TrainConfig

METRICS_COLUMNS = ("step", "loss", "lr")


class Pretrainer:
    """
    Masked address prediction over a sequence corpus.

    Every epoch re-masks each sequence with its own (owner, piece, epoch)
    generator, shuffles, and takes one Adam step per batch. A batch is split
    into fixed shards of ``shard_size`` sequences whose gradients are
    evaluated on up to ``threads`` workers and summed in shard order, so the
    result does not depend on the number of workers.

    :param corpus: Sequences and vocabulary.
    :type corpus: SequenceCorpus
    :param config: Training configuration.
    :type config: TrainConfig
    :param params: Starting parameters; freshly initialized when ``None``.
    :type params: Optional[ModelParams]
    :param stats: Counters to update.
    :type stats: Optional[Statistics]
    """

    def __init__(
        self,
        corpus: SequenceCorpus,
        config: TrainConfig,
        params: Optional[ModelParams] = None,
        stats: Optional[Statistics] = None,
    ) -> None:
        self._corpus = corpus
        self._config = config
        self._stats = stats or Statistics()
        longest = max((len(s) for s in corpus.sequences), default=0)
        if longest > config.model_config.max_seq_len:
            raise UsageError(
                f"Sequences hold up to {longest} records but the model's max_seq_len is "
                f"{config.model_config.max_seq_len}; rebuild them with a matching length"
            )
        self._sequences = trainable(corpus.sequences, self._stats)
        if not self._sequences:
            raise ValueError("No sequence has a record to mask")
        skipped = len(corpus.sequences) - len(self._sequences)
        if skipped:
            logging.info(f"Skipping {skipped} head-only sequences in pre-training")

        table = build_frequency_table(corpus.sequences, len(corpus.vocab))
        self._sampler = SamplerFactory.create(config.negsample_config.strategy, table)
        if params is None:
            params = ModelParams.initialize(
                config.model_config, len(corpus.vocab), stream_rng(config.seed, RngStream.INIT)
            )
        self.params = params
        self._optimizer = Adam(self.params.tensors, frozen_rows=[("emb.address", PAD_ID)])
        self._steps_per_epoch = int(np.ceil(len(self._sequences) / config.batch_size))
        self.loss_history: List[float] = []

    @property
    def total_steps(self) -> int:
        return self._steps_per_epoch * self._config.epochs

    def checkpoint(self, epoch: int) -> Checkpoint:
        return Checkpoint(
            params=self.params,
            config=self._config,
            vocab_hash=self._corpus.vocab.content_hash(),
            epoch=epoch,
            loss_history=list(self.loss_history),
        )

    def _shard_gradients(
        self, batch: MaskedBatch, step: int, pool: Optional[ThreadPool]
    ) -> Tuple[LossResult, ModelParams]:
        config = self._config
        weight = 1.0 / scored_positions(batch, config.model_config)
        shards = shard_rows(len(batch), config.shard_size)

        def run(indexed: Tuple[int, List[int]]) -> Tuple[LossResult, ModelParams]:
            i, rows = indexed
            rng = stream_rng(config.seed, RngStream.DROPOUT, step, i)
            return loss_and_gradients(
                batch.shard(rows), self.params, config.model_config.dropout, rng, weight
            )

        jobs = list(enumerate(shards))
        results = pool.map(run, jobs) if pool is not None else [run(j) for j in jobs]
        total = sum(r.total for r, _ in results)
        count = sum(r.count for r, _ in results)
        collisions = sum(r.collisions for r, _ in results)
        empty = results[0][0].positive_logits
        merged = LossResult(total, count, collisions, empty, empty.reshape(0, 0))
        return merged, sum_gradients([g for _, g in results])

    def _step(
        self, batch: MaskedBatch, step: int, epoch: int, pool: Optional[ThreadPool]
    ) -> Tuple[LossResult, float]:
        config = self._config
        result, grads = self._shard_gradients(batch, step, pool)
        if not np.isfinite(result.loss):
            raise DivergenceError(
                f"Loss became {result.loss} at step {step} (epoch {epoch})",
                checkpoint=self.checkpoint(epoch),
            )
        clip_by_global_norm(grads.tensors, config.clip_norm)
        lr = warmup_lr(step, self.total_steps, config.learning_rate, config.warmup_fraction)
        self._optimizer.step(grads.tensors, lr)
        if not self.params.all_finite():
            raise DivergenceError(
                f"Parameters became non-finite at step {step} (epoch {epoch})",
                checkpoint=self.checkpoint(epoch),
            )

        self._stats.increment(TrainCounters.BATCHES)
        self._stats.increment(TrainCounters.MASKED_POSITIONS, result.count)
        self._stats.increment(TrainCounters.NEGATIVE_COLLISIONS, result.collisions)
        return result, lr

    def train(self, metrics: Optional[TextIO] = None) -> Checkpoint:
        """
        Run every configured epoch.

        :param metrics: Optional stream receiving one ``step,loss,lr`` row per step.
        :type metrics: Optional[TextIO]
        :return: The final checkpoint.
        :rtype: Checkpoint
        :raises DivergenceError: If the loss or the parameters stop being finite.
        """
        config = self._config
        writer = csv.writer(metrics) if metrics is not None else None
        if writer is not None:
            writer.writerow(METRICS_COLUMNS)

        logging.info(
            f"Pre-training on {len(self._sequences)} sequences, {self.total_steps} steps, "
            f"{len(self.params)} tensors"
        )
        pool = ThreadPool(nodes=config.threads) if config.threads > 1 else None
        step = 0
        try:
            for epoch in range(config.epochs):
                start = time.time()
                self._stats.reset()
                masked = epoch_masks(self._sequences, config.mask_ratio, config.seed, epoch)
                total, count = 0.0, 0
                batches = iter_batches(
                    masked,
                    config.batch_size,
                    self._sampler,
                    config.negsample_config,
                    config.seed,
                    epoch,
                    step,
                )
                for batch in batches:
                    step += 1
                    result, lr = self._step(batch, step, epoch, pool)
                    total += result.total
                    count += result.count
                    logging.debug(f"step {step} loss {result.loss:.6f} lr {lr:.3e}")
                    if writer is not None:
                        writer.writerow((step, repr(result.loss), repr(lr)))
                epoch_loss = total / count
                self.loss_history.append(epoch_loss)
                self._stats.log_info(f"epoch {epoch + 1}", time.time() - start, loss=epoch_loss)
        finally:
            if pool is not None:
                pool.close()
                pool.join()
                pool.clear()
        return self.checkpoint(config.epochs)


def pretrain(
    corpus: SequenceCorpus,
    config: TrainConfig,
    metrics_path: Optional[Union[str, Path]] = None,
    stats: Optional[Statistics] = None,
) -> Checkpoint:
    """
    Pre-train a fresh model on ``corpus``.

    :param corpus: Sequences and vocabulary.
    :type corpus: SequenceCorpus
    :param config: Training configuration.
    :type config: TrainConfig
    :param metrics_path: Optional CSV file for per-step metrics.
    :type metrics_path: Optional[Union[str, Path]]
    :param stats: Counters to update.
    :type stats: Optional[Statistics]
    :return: The final checkpoint.
    :rtype: Checkpoint
    """
    trainer = Pretrainer(corpus, config, stats=stats)
    if metrics_path is None:
        return trainer.train()
    with open(metrics_path, "w", newline="") as stream:
        return trainer.train(stream)
