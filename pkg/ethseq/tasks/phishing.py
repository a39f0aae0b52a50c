import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ethseq.errors import DegenerateLabelsError
from ethseq.tasks.eval_config import EvalConfig
from ethseq.tasks.metrics import ClassificationScores, MetricsReport, classification_scores
from ethseq.trainer.finetuner import check_labels, split_accounts, train_head

Split = Tuple[np.ndarray, np.ndarray]


def _check_split(labels: np.ndarray, split: Split) -> None:
    train, test = split
    if len(np.intersect1d(train, test)) > 0:
        raise DegenerateLabelsError("Train and test splits overlap")
    for name, part in (("train", train), ("test", test)):
        if len(np.unique(labels[part])) < 2:
            raise DegenerateLabelsError(f"The {name} split lacks a class")


def scores_report(
    task: str,
    labels: np.ndarray,
    scores: np.ndarray,
    threshold: float,
    thresholds: Sequence[float] = (),
) -> MetricsReport:
    """
    Report of a single scored test split.

    :param task: Name of the evaluation.
    :type task: str
    :param labels: Binary labels of the test accounts.
    :type labels: np.ndarray
    :param scores: Predicted probabilities.
    :type scores: np.ndarray
    :param threshold: Decision threshold.
    :type threshold: float
    :param thresholds: Extra thresholds to sweep.
    :type thresholds: Sequence[float]
    :return: The report.
    :rtype: MetricsReport
    """
    main = classification_scores(labels, scores, threshold)
    return MetricsReport(
        task=task,
        precision=main.precision,
        recall=main.recall,
        f1=main.f1,
        threshold=threshold,
        f1_mean=main.f1,
        f1_std=0.0,
        runs=[main.f1],
        sweep=[classification_scores(labels, scores, t) for t in thresholds],
    )


def fixed_train_eval(
    representations: np.ndarray,
    labels: np.ndarray,
    config: EvalConfig,
    split: Optional[Split] = None,
) -> MetricsReport:
    """
    Phishing detection with the encoder used as a frozen feature extractor:
    a classification head is trained on the train split and scored on the test
    split. The run is repeated ``config.runs`` times with consecutive head
    seeds; the run with the best F1 (earliest on ties) provides precision,
    recall and the threshold sweep, and the mean and spread of F1 over all
    runs are reported alongside.

    :param representations: One vector per labeled account, ``(n, D)``.
    :type representations: np.ndarray
    :param labels: Binary labels, ``(n,)``.
    :type labels: np.ndarray
    :param config: Evaluation settings.
    :type config: EvalConfig
    :param split: Train and test indices; by default a stratified split seeded
                  with the head seed.
    :type split: Optional[Tuple[np.ndarray, np.ndarray]]
    :return: The report.
    :rtype: MetricsReport
    :raises DegenerateLabelsError: If a split lacks a class.
    """
    head_config = config.finetune_config
    labels = np.asarray(labels, dtype=np.int64)
    if len(representations) != len(labels):
        raise ValueError(
            f"{len(representations)} representations but {len(labels)} labels"
        )
    check_labels(labels)
    if split is None:
        split = split_accounts(labels, head_config.test_fraction, head_config.seed)
    _check_split(labels, split)
    train, test = split
    logging.info(
        f"Fixed-training evaluation: {len(train)} train / {len(test)} test accounts, "
        f"{config.runs} runs at threshold {head_config.threshold}"
    )

    results: List[Tuple[ClassificationScores, np.ndarray]] = []
    for run in range(config.runs):
        head = train_head(
            representations[train], labels[train], head_config, seed=head_config.seed + run
        )
        scores = head.predict_proba(representations[test])
        results.append(
            (classification_scores(labels[test], scores, head_config.threshold), scores)
        )
        logging.debug(f"Run {run}: F1 {results[-1][0].f1:.4f}")

    f1s = np.array([r.f1 for r, _ in results])
    best, best_scores = results[int(np.argmax(f1s))]
    return MetricsReport(
        task="phishing",
        precision=best.precision,
        recall=best.recall,
        f1=best.f1,
        threshold=head_config.threshold,
        f1_mean=float(f1s.mean()),
        f1_std=float(f1s.std()),
        runs=f1s.tolist(),
        sweep=[classification_scores(labels[test], best_scores, t) for t in config.thresholds],
    )


def random_representations(shape: Tuple[int, int], seed: int) -> np.ndarray:
    """
    Standard normal vectors standing in for an untrained encoder.
    """
    return np.random.default_rng(seed).standard_normal(shape).astype(np.float32)


def all_positive_f1(labels: np.ndarray) -> float:
    """
    F1 of predicting every account positive: ``2p / (1 + p)`` for a positive
    share ``p``.
    """
    p = float(np.mean(labels))
    return 2.0 * p / (1.0 + p) if p > 0 else 0.0
