import logging
import time
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.model_selection import train_test_split

from ethseq.errors import DegenerateLabelsError
from ethseq.model.params import ModelParams
from ethseq.model.representation import representation_backward, representation_forward
from ethseq.seqgen.sequence import TxSequence
from ethseq.seqgen.vocabulary import PAD_ID
from ethseq.trainer.batching import RngStream, stream_rng
from ethseq.trainer.checkpoint import Checkpoint
from ethseq.trainer.classifier_head import ClassifierHead, bce_with_logits
from ethseq.trainer.finetune_config import FinetuneConfig
from ethseq.trainer.optimizer import Adam, clip_by_global_norm


def check_labels(labels: np.ndarray) -> None:
    """
    :raises DegenerateLabelsError: Unless both classes are present.
    """
    classes = np.unique(labels)
    if len(classes) < 2:
        raise DegenerateLabelsError(
            f"Binary labels need both classes, got only {classes.tolist()} "
            f"over {len(labels)} accounts"
        )


def split_accounts(
    labels: np.ndarray, test_fraction: float, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Stratified train/test split of account indices.

    :param labels: Binary label of every account.
    :type labels: np.ndarray
    :param test_fraction: Share held out for testing.
    :type test_fraction: float
    :param seed: Split seed.
    :type seed: int
    :return: Train and test indices.
    :rtype: Tuple[np.ndarray, np.ndarray]
    :raises DegenerateLabelsError: If a class is missing or too small to appear on both sides.
    """
    check_labels(labels)
    indices = np.arange(len(labels))
    try:
        train, test = train_test_split(
            indices, test_size=test_fraction, random_state=seed, stratify=labels
        )
    except ValueError as e:
        raise DegenerateLabelsError(f"Cannot split {len(labels)} labeled accounts: {e}")
    for name, part in (("train", train), ("test", test)):
        if len(np.unique(labels[part])) < 2:
            raise DegenerateLabelsError(f"The {name} split lacks a class")
    return np.sort(train), np.sort(test)


def _batches(n: int, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def train_head(
    x: np.ndarray,
    y: np.ndarray,
    config: FinetuneConfig,
    seed: Optional[int] = None,
) -> ClassifierHead:
    """
    Train a classification head on frozen representations.

    :param x: Representations, ``(n, D)``.
    :type x: np.ndarray
    :param y: Binary labels, ``(n,)``.
    :type y: np.ndarray
    :param config: Head settings.
    :type config: FinetuneConfig
    :param seed: Overrides ``config.seed``.
    :type seed: Optional[int]
    :return: The trained head.
    :rtype: ClassifierHead
    :raises DegenerateLabelsError: If ``y`` has a single class.
    """
    check_labels(y)
    seed = config.seed if seed is None else seed
    head = ClassifierHead.initialize(
        x.shape[1],
        config.head_hidden,
        stream_rng(seed, RngStream.HEAD),
        config.head_dropout,
    )
    optimizer = Adam(head.tensors)
    for epoch in range(config.epochs):
        rng = stream_rng(seed, RngStream.SHUFFLE, epoch)
        for rows in _batches(len(y), config.batch_size, rng):
            logits, cache = head.forward(x[rows], rng)
            _, d_logits = bce_with_logits(logits, y[rows])
            grads, _ = head.backward(d_logits, cache)
            optimizer.step(grads, config.head_learning_rate)
    return head


def finetune(
    checkpoint: Checkpoint,
    accounts: Sequence[Sequence[TxSequence]],
    labels: np.ndarray,
    config: FinetuneConfig,
) -> Tuple[Checkpoint, ClassifierHead]:
    """
    Train a classification head jointly with every encoder parameter against
    binary cross-entropy. Without pre-training the encoder starts from a fresh
    initialization of the same shape.

    :param checkpoint: Pre-trained checkpoint.
    :type checkpoint: Checkpoint
    :param accounts: Sequence pieces of every labeled training account.
    :type accounts: Sequence[Sequence[TxSequence]]
    :param labels: Binary label of every account.
    :type labels: np.ndarray
    :param config: Fine-tuning settings.
    :type config: FinetuneConfig
    :return: The fine-tuned checkpoint and the head.
    :rtype: Tuple[Checkpoint, ClassifierHead]
    :raises DegenerateLabelsError: If the labels hold a single class.
    """
    check_labels(labels)
    model_config = checkpoint.config.model_config
    if config.pretrained:
        params = checkpoint.params.copy()
    else:
        params = ModelParams.initialize(
            model_config,
            checkpoint.params.vocab_size,
            stream_rng(config.seed, RngStream.INIT),
            checkpoint.params.dtype,
        )
    head = ClassifierHead.initialize(
        model_config.representation_size,
        config.head_hidden,
        stream_rng(config.seed, RngStream.HEAD),
        config.head_dropout,
        params.dtype,
    )
    head_optimizer = Adam(head.tensors)
    encoder_optimizer = Adam(params.tensors, frozen_rows=[("emb.address", PAD_ID)])
    clip_norm = checkpoint.config.clip_norm

    logging.info(
        f"Fine-tuning on {len(labels)} accounts ({int(labels.sum())} positive), "
        f"pretrained={config.pretrained}"
    )
    for epoch in range(config.epochs):
        start = time.time()
        rng = stream_rng(config.seed, RngStream.SHUFFLE, epoch)
        losses = []
        for rows in _batches(len(labels), config.batch_size, rng):
            dropout_rng = stream_rng(config.seed, RngStream.DROPOUT, epoch, int(rows[0]))
            rep = representation_forward(
                [accounts[r] for r in rows], params, model_config.dropout, dropout_rng
            )
            logits, cache = head.forward(rep.vectors, dropout_rng)
            loss, d_logits = bce_with_logits(logits, labels[rows])
            head_grads, d_vectors = head.backward(d_logits, cache)
            grads = representation_backward(d_vectors, rep, params)
            clip_by_global_norm(grads.tensors, clip_norm)
            head_optimizer.step(head_grads, config.head_learning_rate)
            encoder_optimizer.step(grads.tensors, config.encoder_learning_rate)
            losses.append(loss)
        logging.info(
            f"Fine-tuning epoch {epoch + 1}: loss {np.mean(losses):.6f} "
            f"({time.time() - start:.1f}s)"
        )

    tuned = Checkpoint(
        params=params,
        config=checkpoint.config,
        vocab_hash=checkpoint.vocab_hash,
        epoch=checkpoint.epoch,
        loss_history=list(checkpoint.loss_history),
    )
    return tuned, head


def labeled_accounts(
    pieces_by_owner: Dict[int, List[TxSequence]], labels_by_owner: Dict[int, int]
) -> Tuple[np.ndarray, List[List[TxSequence]], np.ndarray]:
    """
    Owners that have both sequences and a label, in ascending id order.

    :return: Owner ids, their pieces and their labels.
    :rtype: Tuple[np.ndarray, List[List[TxSequence]], np.ndarray]
    """
    owners = sorted(o for o in pieces_by_owner if o in labels_by_owner)
    return (
        np.array(owners, dtype=np.int64),
        [pieces_by_owner[o] for o in owners],
        np.array([labels_by_owner[o] for o in owners], dtype=np.int64),
    )
