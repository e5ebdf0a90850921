"""Clustering accuracy with optimal cluster-to-class matching.

A single Hungarian assignment is computed on the confusion matrix of the
unlabeled instances and then sliced into All / Known / Novel groups, so all
three accuracies share one consistent mapping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data import EmbeddingDataset
from .graph import Partition

NO_CLASS = -1  # clusters beyond the class count map to nothing


@dataclass(frozen=True)
class EvalReport:
    acc_all: float
    acc_known: float
    acc_novel: float
    discovered_k: int
    true_k: int
    confusion: np.ndarray
    n_all: int
    n_known: int
    n_novel: int
    matched_all: int
    matched_known: int
    matched_novel: int


def hungarian_match(confusion: np.ndarray) -> tuple[int, dict[int, int]]:
    """Optimal cluster-to-class assignment maximizing the matched count.

    The count matrix is zero-padded to square, so surplus clusters map to
    NO_CLASS. Returns (total matched count, {cluster: class}).
    """
    conf = np.asarray(confusion)
    if conf.size == 0:
        raise ValueError("empty confusion matrix")
    if conf.min() < 0:
        raise ValueError("confusion entries must be nonnegative")
    r, c = conf.shape
    side = max(r, c)
    padded = np.zeros((side, side), dtype=np.int64)
    padded[:r, :c] = conf
    rows, cols = linear_sum_assignment(-padded)
    matched = int(padded[rows, cols].sum())
    mapping = {int(i): (int(j) if j < c else NO_CLASS) for i, j in zip(rows, cols) if i < r}
    return matched, mapping


def evaluate(partition: Partition, dataset: EmbeddingDataset) -> EvalReport:
    """Score a partition against ground truth on the unlabeled instances."""
    if dataset.eval_truth is None or dataset.known_mask is None:
        raise ValueError("evaluate requires eval_truth and known_mask")
    if partition.labels.shape[0] != dataset.n:
        raise ValueError(
            f"partition covers {partition.labels.shape[0]} nodes, dataset has {dataset.n}"
        )
    unlabeled = dataset.labels < 0
    if not unlabeled.any():
        raise ValueError("no unlabeled instances to evaluate")
    clusters = partition.labels[unlabeled]
    truth = dataset.eval_truth[unlabeled]
    classes = np.unique(truth)
    class_col = {int(c): j for j, c in enumerate(classes)}
    conf = np.zeros((partition.num_communities, classes.size), dtype=np.int64)
    for cl, t in zip(clusters, truth):
        conf[int(cl), class_col[int(t)]] += 1
    _, mapping = hungarian_match(conf)
    predicted = np.array(
        [classes[mapping[int(cl)]] if mapping[int(cl)] != NO_CLASS else NO_CLASS for cl in clusters]
    )
    correct = predicted == truth
    known = dataset.known_mask[unlabeled]
    n_all = int(unlabeled.sum())
    n_known = int(known.sum())
    n_novel = n_all - n_known
    matched_all = int(correct.sum())
    matched_known = int(correct[known].sum())
    matched_novel = matched_all - matched_known

    def ratio(num: int, den: int) -> float:
        return num / den if den else 0.0

    return EvalReport(
        acc_all=ratio(matched_all, n_all),
        acc_known=ratio(matched_known, n_known),
        acc_novel=ratio(matched_novel, n_novel),
        discovered_k=partition.num_communities,
        true_k=int(np.unique(dataset.eval_truth).size),
        confusion=conf,
        n_all=n_all,
        n_known=n_known,
        n_novel=n_novel,
        matched_all=matched_all,
        matched_known=matched_known,
        matched_novel=matched_novel,
    )


def format_report(report: EvalReport) -> str:
    """Human-readable accuracy table."""
    lines = [
        "group    accuracy  instances",
        f"all      {report.acc_all:8.4f}  {report.n_all:9d}",
        f"known    {report.acc_known:8.4f}  {report.n_known:9d}",
        f"novel    {report.acc_novel:8.4f}  {report.n_novel:9d}",
        f"discovered k = {report.discovered_k} (true k = {report.true_k})",
    ]
    return "\n".join(lines) + "\n"


def format_report_kv(report: EvalReport) -> str:
    """Machine-readable key=value block, 4 decimals."""
    lines = [
        f"acc_all={report.acc_all:.4f}",
        f"acc_known={report.acc_known:.4f}",
        f"acc_novel={report.acc_novel:.4f}",
        f"k={report.discovered_k}",
        f"true_k={report.true_k}",
    ]
    return "\n".join(lines) + "\n"
