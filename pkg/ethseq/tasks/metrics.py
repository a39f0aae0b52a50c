import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import precision_recall_fscore_support


@dataclass(frozen=True)
class ClassificationScores:
    threshold: float
    precision: float
    recall: float
    f1: float


def classification_scores(
    y_true: np.ndarray, scores: np.ndarray, threshold: float
) -> ClassificationScores:
    """
    Precision, recall and F1 of the positive class when every score at or
    above ``threshold`` is predicted positive. With no predicted positive the
    precision is 0.

    :param y_true: Binary labels.
    :type y_true: np.ndarray
    :param scores: Predicted probabilities.
    :type scores: np.ndarray
    :param threshold: Decision threshold.
    :type threshold: float
    :return: The scores.
    :rtype: ClassificationScores
    """
    y_pred = (np.asarray(scores) >= threshold).astype(np.int64)
    precision, recall, f1, _ = precision_recall_fscore_support(
        np.asarray(y_true), y_pred, average="binary", pos_label=1, zero_division=0
    )
    return ClassificationScores(threshold, float(precision), float(recall), float(f1))


def hit_ratios(ranks: Sequence[int], ks: Sequence[int]) -> Dict[int, float]:
    """
    Fraction of ranks at or below each cut-off.
    """
    r = np.asarray(ranks, dtype=np.int64)
    if len(r) == 0:
        return {k: 0.0 for k in ks}
    return {k: float(np.mean(r <= k)) for k in ks}


@dataclass
class MetricsReport:
    """
    Outcome of one evaluation. Classification fields are set by the phishing
    evaluation, retrieval fields by de-anonymization.

    :param task: Name of the evaluation.
    :type task: str
    :param precision: Precision at the decision threshold (best run).
    :type precision: Optional[float]
    :param recall: Recall at the decision threshold (best run).
    :type recall: Optional[float]
    :param f1: F1 at the decision threshold (best run).
    :type f1: Optional[float]
    :param threshold: The decision threshold.
    :type threshold: Optional[float]
    :param f1_mean: Mean F1 over the runs.
    :type f1_mean: Optional[float]
    :param f1_std: Standard deviation of F1 over the runs.
    :type f1_std: Optional[float]
    :param runs: Per-run F1 values.
    :type runs: List[float]
    :param sweep: Scores of the best run at every extra threshold.
    :type sweep: List[ClassificationScores]
    :param hit_ratio: HR@k per cut-off.
    :type hit_ratio: Dict[int, float]
    :param mean_rank: Mean 1-based rank of the targets.
    :type mean_rank: Optional[float]
    :param candidate_sizes: Minimum, mean and maximum candidate set size.
    :type candidate_sizes: Optional[Tuple[int, float, int]]
    :param pairs_evaluated: Pairs that received a rank.
    :type pairs_evaluated: int
    :param pairs_skipped: Pairs skipped for an unknown account or a filtered-out target.
    :type pairs_skipped: int
    """

    task: str
    precision: Optional[float] = None
    recall: Optional[float] = None
    f1: Optional[float] = None
    threshold: Optional[float] = None
    f1_mean: Optional[float] = None
    f1_std: Optional[float] = None
    runs: List[float] = field(default_factory=list)
    sweep: List[ClassificationScores] = field(default_factory=list)
    hit_ratio: Dict[int, float] = field(default_factory=dict)
    mean_rank: Optional[float] = None
    candidate_sizes: Optional[Tuple[int, float, int]] = None
    pairs_evaluated: int = 0
    pairs_skipped: int = 0

    def rows(self) -> List[Tuple[str, str]]:
        """
        :return: ``(metric, value)`` pairs of every field that is set.
        :rtype: List[Tuple[str, str]]
        """
        out: List[Tuple[str, str]] = [("task", self.task)]
        for name in ("threshold", "precision", "recall", "f1", "f1_mean", "f1_std"):
            value = getattr(self, name)
            if value is not None:
                out.append((name, f"{value:.6f}"))
        for i, f1 in enumerate(self.runs):
            out.append((f"f1_run_{i}", f"{f1:.6f}"))
        for s in self.sweep:
            out.append((f"precision@{s.threshold}", f"{s.precision:.6f}"))
            out.append((f"recall@{s.threshold}", f"{s.recall:.6f}"))
            out.append((f"f1@{s.threshold}", f"{s.f1:.6f}"))
        for k, hr in sorted(self.hit_ratio.items()):
            out.append((f"HR@{k}", f"{hr:.6f}"))
        if self.mean_rank is not None:
            out.append(("mean_rank", f"{self.mean_rank:.6f}"))
        if self.candidate_sizes is not None:
            lo, mean, hi = self.candidate_sizes
            out.append(("candidates_min", str(lo)))
            out.append(("candidates_mean", f"{mean:.3f}"))
            out.append(("candidates_max", str(hi)))
        if self.hit_ratio:
            out.append(("pairs_evaluated", str(self.pairs_evaluated)))
            out.append(("pairs_skipped", str(self.pairs_skipped)))
        return out

    def to_csv(self) -> str:
        return "metric,value\n" + "".join(f"{k},{v}\n" for k, v in self.rows())

    def to_json(self) -> str:
        return json.dumps(dict(self.rows()), indent=2)

    def to_table(self) -> str:
        rows = self.rows()
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)
