"""Dataset handling, threshold calibration, classification metrics, gating.

Chronological splitting and majority undersampling prepare training data;
threshold sweeping picks the validation-best F1 operating point; ROC-AUC,
Recall@Top-k% and gate simulation quantify ranking quality and what a
quarantine policy would have caught.
"""

from __future__ import annotations

import csv
import logging
import math
import random
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from drs.diffcore import Commit
from drs.errors import (
    EmptyDataset,
    LengthMismatch,
    MissingColumn,
    SingleClassInput,
)
from drs.metrics import METRIC_FIELDS, ChangeMetrics

logger = logging.getLogger(__name__)

DATASET_COLUMNS = ("commit_id", "project", "author_date", "buggy") + METRIC_FIELDS

_TRUE_LITERALS = {"1", "true", "t", "yes"}
_FALSE_LITERALS = {"0", "false", "f", "no"}


@dataclass
class LabeledCommit:
    """A dataset row: commit identity, its 12 metrics, and the bug label."""

    commit: Commit
    metrics: ChangeMetrics
    buggy: bool


@dataclass
class Dataset:
    rows: list[LabeledCommit] = field(default_factory=list)
    skipped_rows: int = 0

    def __len__(self) -> int:
        return len(self.rows)


def _parse_timestamp(value: str) -> float:
    try:
        return float(value)
    except ValueError:
        return datetime.fromisoformat(value).timestamp()


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in _TRUE_LITERALS:
        return True
    if lowered in _FALSE_LITERALS:
        return False
    raise ValueError(f"not a boolean: {value!r}")


def load_dataset(source: str | Path) -> Dataset:
    """Load a labeled commit dataset from a comma-separated file.

    Required columns: ``commit_id, project, author_date, buggy`` plus the
    12 metric columns.  Rows with unparseable fields are skipped and
    counted; a file that yields no usable rows raises
    :class:`EmptyDataset`.
    """
    with open(source, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        for column in DATASET_COLUMNS:
            if column not in header:
                raise MissingColumn(column)
        rows: list[LabeledCommit] = []
        skipped = 0
        for record in reader:
            try:
                commit = Commit(
                    repo=record["project"],
                    sha=record["commit_id"],
                    author_timestamp=_parse_timestamp(record["author_date"]),
                    message="",
                    raw_diff="",
                )
                metrics = ChangeMetrics(
                    **{name: float(record[name]) for name in METRIC_FIELDS}
                )
                rows.append(
                    LabeledCommit(commit=commit, metrics=metrics, buggy=_parse_bool(record["buggy"]))
                )
            except (ValueError, TypeError):
                skipped += 1
    if not rows:
        raise EmptyDataset(f"no usable rows in {source} ({skipped} skipped)")
    return Dataset(rows=rows, skipped_rows=skipped)


def metric_samples(dataset: Dataset) -> dict[str, list[float]]:
    """Collect per-metric value lists for threshold fitting."""
    samples: dict[str, list[float]] = {name: [] for name in METRIC_FIELDS}
    for row in dataset.rows:
        for name, value in row.metrics.as_dict().items():
            if value is not None:
                samples[name].append(value)
    return samples


def chronological_split(
    dataset: Dataset, fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
) -> tuple[Dataset, Dataset, Dataset]:
    """Sort by author timestamp (stable) and split by cumulative counts.

    The first two splits take ``floor(fraction * n)`` rows; the remainder
    goes to test, so timestamps never decrease across splits.
    """
    if not dataset.rows:
        raise EmptyDataset("cannot split an empty dataset")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1: {fractions}")
    ordered = sorted(dataset.rows, key=lambda row: row.commit.author_timestamp)
    n = len(ordered)
    n_train = math.floor(fractions[0] * n)
    n_valid = math.floor(fractions[1] * n)
    return (
        Dataset(rows=ordered[:n_train]),
        Dataset(rows=ordered[n_train : n_train + n_valid]),
        Dataset(rows=ordered[n_train + n_valid :]),
    )


def undersample_majority(train: Dataset, ratio: float, seed: int = 0) -> Dataset:
    """Keep the minority class whole; sample the majority down to
    ``round(ratio * majority)`` without replacement, preserving row order."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must be in (0, 1]: {ratio}")
    buggy = [i for i, row in enumerate(train.rows) if row.buggy]
    clean = [i for i, row in enumerate(train.rows) if not row.buggy]
    if not buggy or not clean or len(buggy) == len(clean):
        if not buggy or not clean:
            logger.warning("single-class training set; undersampling skipped")
        return Dataset(rows=list(train.rows))
    majority = clean if len(clean) > len(buggy) else buggy
    minority = buggy if majority is clean else clean
    keep_count = round(ratio * len(majority))
    kept_majority = random.Random(seed).sample(majority, keep_count)
    kept = sorted(set(minority) | set(kept_majority))
    return Dataset(rows=[train.rows[i] for i in kept])


@dataclass
class EvalReport:
    """Confusion-matrix metrics at a fixed threshold, plus ranking AUC."""

    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    f1: float
    accuracy: float
    roc_auc: float | None = None

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "counts": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "roc_auc": self.roc_auc,
        }


def classification_metrics(
    scores: list[float], labels: list[bool], tau: float
) -> EvalReport:
    """Confusion-matrix metrics with prediction = score >= tau.

    Precision (and recall) with an empty denominator are defined as 0 so
    reports never carry NaNs.
    """
    if len(scores) != len(labels):
        raise LengthMismatch(f"{len(scores)} scores vs {len(labels)} labels")
    if not scores:
        raise LengthMismatch("empty inputs")
    tp = fp = tn = fn = 0
    for score_value, label in zip(scores, labels):
        predicted = score_value >= tau
        if predicted and label:
            tp += 1
        elif predicted:
            fp += 1
        elif label:
            fn += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport(
        threshold=tau,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=(tp + tn) / len(scores),
    )


def roc_auc(scores: list[float], labels: list[bool]) -> float:
    """Threshold-free ranking quality via the rank-sum statistic.

    Equals the fraction of (positive, negative) pairs ranked correctly,
    ties counted half, computed in O(n log n) with average ranks.
    """
    n_pos = sum(1 for label in labels if label)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput("ROC-AUC needs both classes")
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    ranks = [0.0] * len(scores)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        average_rank = (i + j + 2) / 2.0  # 1-based average over the tie group
        for k in range(i, j + 1):
            ranks[order[k]] = average_rank
        i = j + 1
    rank_sum = sum(rank for rank, label in zip(ranks, labels) if label)
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def sweep_threshold(scores: list[float], labels: list[bool]) -> tuple[float, float]:
    """Pick the F1-maximizing threshold from score-derived candidates.

    Candidates are midpoints between consecutive distinct scores plus the
    endpoints 0 and 1; ties go to the larger (more conservative) value.
    """
    if not any(labels):
        raise SingleClassInput("threshold sweep needs at least one positive")
    distinct = sorted(set(scores))
    candidates = [0.0]
    candidates.extend(
        (low + high) / 2.0 for low, high in zip(distinct, distinct[1:])
    )
    candidates.append(1.0)
    best_tau, best_f1 = 0.0, -1.0
    for tau in candidates:
        f1 = classification_metrics(scores, labels, tau).f1
        if f1 >= best_f1:
            best_tau, best_f1 = tau, f1
    return best_tau, best_f1


def _top_indices(scores: list[float], k_percent: float) -> list[int]:
    """Indices of the ceil(k% * n) highest scores, ties stable by position."""
    n_top = math.ceil(k_percent / 100.0 * len(scores))
    order = sorted(range(len(scores)), key=lambda i: scores[i], reverse=True)
    return order[:n_top]


def recall_at_top_k(scores: list[float], labels: list[bool], k_percent: float) -> float:
    """Fraction of buggy commits captured when gating the top k% by score."""
    if not 0.0 < k_percent <= 100.0:
        raise ValueError(f"k must be in (0, 100]: {k_percent}")
    if len(scores) != len(labels):
        raise LengthMismatch(f"{len(scores)} scores vs {len(labels)} labels")
    buggy_total = sum(1 for label in labels if label)
    if buggy_total == 0:
        raise SingleClassInput("recall@top-k needs at least one positive")
    captured = sum(1 for i in _top_indices(scores, k_percent) if labels[i])
    return captured / buggy_total


@dataclass(frozen=True)
class TopPercent:
    """Gate the k% highest-scored commits."""

    k: float

    def __post_init__(self):
        if not 0.0 < self.k <= 100.0:
            raise ValueError(f"k must be in (0, 100]: {self.k}")


@dataclass(frozen=True)
class FixedThreshold:
    """Gate every commit scoring at or above tau."""

    tau: float

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0, 1]: {self.tau}")


GatePolicy = TopPercent | FixedThreshold


@dataclass
class GateReport:
    """Outcome of simulating a gate over a scored commit window."""

    gated_count: int
    total: int
    buggy_total: int
    buggy_gated: int
    captured_fraction: float

    def to_dict(self) -> dict:
        return {
            "gated_count": self.gated_count,
            "total": self.total,
            "buggy_total": self.buggy_total,
            "buggy_gated": self.buggy_gated,
            "captured_fraction": self.captured_fraction,
        }


def simulate_gate(
    scores: list[float], labels: list[bool], policy: GatePolicy
) -> GateReport:
    """Replay a gating policy over scored commits and count what it caught."""
    if not scores:
        raise ValueError("cannot simulate a gate over an empty window")
    if len(scores) != len(labels):
        raise LengthMismatch(f"{len(scores)} scores vs {len(labels)} labels")
    if isinstance(policy, TopPercent):
        gated = _top_indices(scores, policy.k)
    else:
        gated = [i for i, s in enumerate(scores) if s >= policy.tau]
    buggy_total = sum(1 for label in labels if label)
    buggy_gated = sum(1 for i in gated if labels[i])
    return GateReport(
        gated_count=len(gated),
        total=len(scores),
        buggy_total=buggy_total,
        buggy_gated=buggy_gated,
        captured_fraction=buggy_gated / buggy_total if buggy_total else 0.0,
    )
