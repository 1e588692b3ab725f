"""Change metrics: computation from diffs, quantile bucketing, token rendering.

Twelve metrics describe a change (size, diffusion, history, experience).
Diff-derived metrics are computed here; history-dependent ones arrive with
dataset rows or stay unknown for live diffs.  Raw values are mapped onto
five levels via persisted quantile cut points and rendered as one bracket
token line per metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import IntEnum
from pathlib import Path

from drs.diffcore import DiffDocument
from drs.errors import InsufficientSamples

#: Metric short names in canonical rendering order.
METRIC_FIELDS = (
    "la", "ld", "nf", "nd", "ns", "ent",
    "ndev", "age", "nuc", "exp", "rexp", "sexp",
)

#: Token spellings, index-aligned with METRIC_FIELDS.
METRIC_TOKEN_NAMES = (
    "num_lines_added",
    "num_lines_deleted",
    "num_files_touched",
    "num_directories_touched",
    "num_subsystems_touched",
    "change_entropy",
    "num_developers_touched_files",
    "time_from_last_change",
    "num_changes_in_files",
    "author_experience",
    "author_recent_experience",
    "author_subsystem_experience",
)

MIN_CALIBRATION_SAMPLES = 5
CALIBRATION_VERSION = "drs-calibration/1"


class BucketLevel(IntEnum):
    """Five ordered levels plus UNKNOWN for missing live-path metrics."""

    VERY_LOW = 0
    LOW = 1
    MEDIUM = 2
    HIGH = 3
    VERY_HIGH = 4
    UNKNOWN = 5


@dataclass
class ChangeMetrics:
    """The 12 change metrics; ``None`` marks a value not available."""

    la: float | None = None
    ld: float | None = None
    nf: float | None = None
    nd: float | None = None
    ns: float | None = None
    ent: float | None = None
    ndev: float | None = None
    age: float | None = None
    nuc: float | None = None
    exp: float | None = None
    rexp: float | None = None
    sexp: float | None = None

    def as_dict(self) -> dict[str, float | None]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


#: Buckets keyed by metric short name, one entry per METRIC_FIELDS.
BucketedMetrics = dict[str, BucketLevel]


@dataclass(frozen=True)
class MetricCuts:
    """Ascending 20/40/60/80th-percentile cut points for one metric."""

    q20: float
    q40: float
    q60: float
    q80: float

    def __post_init__(self):
        if not (self.q20 <= self.q40 <= self.q60 <= self.q80):
            raise ValueError(f"cut points must be ascending: {self}")


@dataclass(frozen=True)
class BucketThresholds:
    """Immutable per-metric cut points fitted on a training split."""

    cuts: dict[str, MetricCuts]

    def __getitem__(self, metric: str) -> MetricCuts:
        return self.cuts[metric]


def compute_diff_metrics(doc: DiffDocument) -> ChangeMetrics:
    """Fill the diff-derived metrics; history metrics stay unknown.

    Directories are the dirname of each path (repo root counts as one),
    subsystems the first path segment.
    """
    la = sum(len(f.added_lines) for f in doc.files)
    ld = sum(len(f.removed_lines) for f in doc.files)
    nf = len(doc.files)
    dirs = {p.rsplit("/", 1)[0] if "/" in p else "" for p in (f.path for f in doc.files)}
    subsystems = {f.path.split("/", 1)[0] for f in doc.files}
    return ChangeMetrics(
        la=la,
        ld=ld,
        nf=nf,
        nd=len(dirs),
        ns=len(subsystems),
        ent=change_entropy([len(f.added_lines) + len(f.removed_lines) for f in doc.files]),
    )


def change_entropy(lines_per_file: list[int]) -> float:
    """Normalized Shannon entropy of the changed-line distribution.

    ``-sum(p_i * log2(p_i)) / log2(n_files)``; zero for at most one file
    or no changed lines.  Always within [0, 1].
    """
    n = len(lines_per_file)
    total = sum(lines_per_file)
    if n <= 1 or total == 0:
        return 0.0
    entropy = 0.0
    for count in lines_per_file:
        if count > 0:
            p = count / total
            entropy -= p * math.log2(p)
    return min(entropy / math.log2(n), 1.0)


def _nearest_rank(sorted_values: list[float], percentile: float) -> float:
    rank = math.ceil(percentile / 100.0 * len(sorted_values))
    return sorted_values[max(rank, 1) - 1]


def fit_bucket_thresholds(samples: dict[str, list[float]]) -> BucketThresholds:
    """Fit 20/40/60/80th nearest-rank percentiles per metric.

    Each metric needs at least :data:`MIN_CALIBRATION_SAMPLES` finite
    values, otherwise :class:`InsufficientSamples` is raised.
    """
    cuts: dict[str, MetricCuts] = {}
    for metric in METRIC_FIELDS:
        values = [v for v in samples.get(metric, []) if v is not None and math.isfinite(v)]
        if len(values) < MIN_CALIBRATION_SAMPLES:
            raise InsufficientSamples(metric, len(values), MIN_CALIBRATION_SAMPLES)
        values.sort()
        cuts[metric] = MetricCuts(
            q20=_nearest_rank(values, 20),
            q40=_nearest_rank(values, 40),
            q60=_nearest_rank(values, 60),
            q80=_nearest_rank(values, 80),
        )
    return BucketThresholds(cuts=cuts)


def bucketize(value: float | None, cuts: MetricCuts) -> BucketLevel:
    """Map a raw value onto a level: strict-less cuts, ties fall upward."""
    if value is None:
        return BucketLevel.UNKNOWN
    if value < cuts.q20:
        return BucketLevel.VERY_LOW
    if value < cuts.q40:
        return BucketLevel.LOW
    if value < cuts.q60:
        return BucketLevel.MEDIUM
    if value < cuts.q80:
        return BucketLevel.HIGH
    return BucketLevel.VERY_HIGH


def bucket_metrics(
    metrics: ChangeMetrics, thresholds: BucketThresholds | None
) -> BucketedMetrics:
    """Bucket all 12 metrics; without thresholds everything is UNKNOWN."""
    if thresholds is None:
        return {name: BucketLevel.UNKNOWN for name in METRIC_FIELDS}
    values = metrics.as_dict()
    return {name: bucketize(values[name], thresholds[name]) for name in METRIC_FIELDS}


def render_metric_tokens(buckets: BucketedMetrics) -> str:
    """Render the 12-line special-token block, fixed order and spelling."""
    missing = [name for name in METRIC_FIELDS if name not in buckets]
    if missing:
        raise ValueError(f"buckets missing metrics: {missing}")
    lines = [
        f"[{token}:] [{buckets[field].name}]"
        for field, token in zip(METRIC_FIELDS, METRIC_TOKEN_NAMES)
    ]
    return "\n".join(lines)


def save_calibration(thresholds: BucketThresholds, path: str | Path) -> None:
    """Write the versioned calibration file, one record per metric."""
    lines = [CALIBRATION_VERSION]
    for metric in METRIC_FIELDS:
        c = thresholds[metric]
        lines.append(f"{metric} {c.q20!r} {c.q40!r} {c.q60!r} {c.q80!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_calibration(path: str | Path) -> BucketThresholds:
    """Read a calibration file written by :func:`save_calibration`."""
    lines = Path(path).read_text(encoding="utf-8").strip().split("\n")
    if not lines or lines[0] != CALIBRATION_VERSION:
        raise ValueError(f"unsupported calibration file version: {lines[:1]}")
    cuts: dict[str, MetricCuts] = {}
    for line in lines[1:]:
        name, *qs = line.split()
        if len(qs) != 4:
            raise ValueError(f"bad calibration record: {line!r}")
        cuts[name] = MetricCuts(*(float(q) for q in qs))
    missing = [m for m in METRIC_FIELDS if m not in cuts]
    if missing:
        raise ValueError(f"calibration file missing metrics: {missing}")
    return BucketThresholds(cuts=cuts)
