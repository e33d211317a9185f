"""Classifier-output scoring and dataset size accounting.

Consumes prediction CSVs (header image_id,label,score) produced by external
classifier runs, computes AUC and thresholded confusion-matrix metrics, and
attaches bootstrap confidence intervals. Also sums directory sizes and
builds a reproducible ZIP baseline for compression comparisons.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    IoError,
    NoPredictedPositives,
    SingleClass,
    TooFewValidDraws,
)

DEFAULT_THRESHOLD = 0.5

# fixed timestamp inside the ZIP so archive bytes depend only on content
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass(frozen=True)
class PredictionRecord:
    image_id: str
    label: int
    score: float

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class BootstrapConfig:
    sample_size: int = 10
    repeats: int = 100
    ci_level: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")
        if self.repeats < 2:
            raise ValueError("repeats must be >= 2")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must be in (0, 1)")


@dataclass(frozen=True)
class BootstrapResult:
    metric: str
    point: float
    lo: float
    hi: float
    draws: tuple
    skipped: int


@dataclass(frozen=True)
class SizeReport:
    source_dir: str
    source_bytes: int
    compressed: tuple  # ((directory, bytes), ...)
    zip_bytes: int | None

    def ratio_vs_source(self, nbytes: int) -> float:
        if self.source_bytes == 0:
            return 0.0
        return nbytes / self.source_bytes


def auc(preds) -> float:
    """Probability that a positive outranks a negative, ties at half.

    Computed from average ranks (the rank-sum formulation), equivalent to
    exhaustive pair counting.
    """
    labels = np.array([p.label for p in preds], dtype=np.int64)
    scores = np.array([p.score for p in preds], dtype=np.float64)
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass(f"need both classes, got {n_pos} positive / {n_neg} negative")

    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < sorted_scores.size:
        j = i
        while j + 1 < sorted_scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        # 1-based ranks; tied values share the average rank of their run
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1

    rank_sum = float(np.sum(ranks[labels == 1]))
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def _confusion(preds, threshold: float):
    preds = list(preds)
    if not preds:
        raise ValueError("no prediction records")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    tp = fp = tn = fn = 0
    for p in preds:
        predicted = p.score >= threshold
        if predicted and p.label == 1:
            tp += 1
        elif predicted:
            fp += 1
        elif p.label == 1:
            fn += 1
        else:
            tn += 1
    return tp, fp, tn, fn


def accuracy(preds, threshold: float = DEFAULT_THRESHOLD) -> float:
    tp, fp, tn, fn = _confusion(preds, threshold)
    return (tp + tn) / (tp + fp + tn + fn)


def precision(preds, threshold: float = DEFAULT_THRESHOLD) -> float:
    tp, fp, _tn, _fn = _confusion(preds, threshold)
    if tp + fp == 0:
        raise NoPredictedPositives(f"no score reaches threshold {threshold}")
    return tp / (tp + fp)


def recall(preds, threshold: float = DEFAULT_THRESHOLD) -> float:
    tp, _fp, _tn, fn = _confusion(preds, threshold)
    if tp + fn == 0:
        raise SingleClass("no positive labels; recall undefined")
    return tp / (tp + fn)


def threshold_metrics(preds, threshold: float = DEFAULT_THRESHOLD) -> dict:
    """Accuracy, precision, recall at a fixed threshold (positive iff
    score >= threshold). Errors if any of the three is undefined."""
    return {
        "accuracy": accuracy(preds, threshold),
        "precision": precision(preds, threshold),
        "recall": recall(preds, threshold),
    }


def _metric_fn(name: str, threshold: float):
    if name == "auc":
        return auc
    named = {"accuracy": accuracy, "precision": precision, "recall": recall}
    if name in named:
        return lambda preds: named[name](preds, threshold)
    raise ValueError(f"unknown metric {name!r}")


def bootstrap_ci(
    preds,
    metric: str,
    cfg: BootstrapConfig = BootstrapConfig(),
    threshold: float = DEFAULT_THRESHOLD,
) -> BootstrapResult:
    """Percentile bootstrap: cfg.repeats draws of cfg.sample_size records
    with replacement.

    Draws where the metric is undefined (single-class AUC draws, empty
    predicted positives) are skipped and counted; fewer than 2 valid draws
    is an error. The draw sequence comes from one seeded generator, so the
    result is independent of any parallelism in the caller.
    """
    preds = list(preds)
    if len(preds) < cfg.sample_size:
        raise ValueError(
            f"need at least sample_size={cfg.sample_size} records, got {len(preds)}"
        )
    fn = _metric_fn(metric, threshold)
    point = fn(preds)

    rng = np.random.default_rng(cfg.seed)
    draws = []
    skipped = 0
    for _ in range(cfg.repeats):
        idx = rng.integers(0, len(preds), size=cfg.sample_size)
        sample = [preds[i] for i in idx]
        try:
            draws.append(fn(sample))
        except (SingleClass, NoPredictedPositives):
            skipped += 1
    if len(draws) < 2:
        raise TooFewValidDraws(
            f"{len(draws)} valid draws out of {cfg.repeats} ({metric})"
        )

    alpha = (1.0 - cfg.ci_level) / 2.0
    lo, hi = np.percentile(draws, [alpha * 100.0, (1.0 - alpha) * 100.0])
    return BootstrapResult(
        metric=metric,
        point=float(point),
        lo=float(lo),
        hi=float(hi),
        draws=tuple(draws),
        skipped=skipped,
    )


def read_predictions(path) -> list:
    path = Path(path)
    records = []
    seen = set()
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["image_id", "label", "score"]:
            raise ValueError(
                f"{path}: expected header image_id,label,score, got {reader.fieldnames}"
            )
        for row in reader:
            if row["image_id"] in seen:
                raise ValueError(f"{path}: duplicate image_id {row['image_id']}")
            seen.add(row["image_id"])
            records.append(
                PredictionRecord(
                    image_id=row["image_id"],
                    label=int(row["label"]),
                    score=float(row["score"]),
                )
            )
    return records


def directory_bytes(directory) -> int:
    """Total size of regular files under a directory; symlinks skipped."""
    directory = Path(directory)
    if not directory.is_dir():
        raise IoError(f"not a directory: {directory}")
    total = 0
    for root, _dirs, files in os.walk(directory):
        for name in files:
            p = Path(root) / name
            if p.is_symlink():
                continue
            try:
                total += p.stat().st_size
            except OSError as exc:
                raise IoError(str(exc)) from exc
    return total


def _zip_directory_bytes(directory: Path) -> int:
    """Deflate the whole tree into one temporary archive and return its size.

    Entries are added in sorted relative-path order with a fixed timestamp,
    so the byte size is a pure function of the tree contents.
    """
    members = sorted(
        p.relative_to(directory).as_posix()
        for p in directory.rglob("*")
        if p.is_file() and not p.is_symlink()
    )
    fd, tmp = tempfile.mkstemp(suffix=".zip")
    os.close(fd)
    try:
        with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            for rel in members:
                info = zipfile.ZipInfo(rel, date_time=_ZIP_EPOCH)
                info.compress_type = zipfile.ZIP_DEFLATED
                with open(directory / rel, "rb") as fh:
                    zf.writestr(info, fh.read())
        return os.path.getsize(tmp)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    finally:
        os.unlink(tmp)


def size_report(source_dir, compressed_dirs=(), zip_baseline: bool = True) -> SizeReport:
    """Byte totals for a source tree and its compressed variants, plus an
    optional single-archive ZIP baseline of the source tree."""
    source_dir = Path(source_dir)
    source_bytes = directory_bytes(source_dir)
    compressed = tuple(
        (str(d), directory_bytes(d)) for d in compressed_dirs
    )
    zip_bytes = _zip_directory_bytes(source_dir) if zip_baseline else None
    return SizeReport(
        source_dir=str(source_dir),
        source_bytes=source_bytes,
        compressed=compressed,
        zip_bytes=zip_bytes,
    )


def size_report_dict(report: SizeReport) -> dict:
    """JSON-shaped view with ratios against the source total."""
    payload = {
        "source": {"directory": report.source_dir, "bytes": report.source_bytes},
        "compressed": [
            {
                "directory": d,
                "bytes": b,
                "ratio_vs_source": report.ratio_vs_source(b),
            }
            for d, b in report.compressed
        ],
    }
    if report.zip_bytes is not None:
        payload["zip_baseline"] = {
            "bytes": report.zip_bytes,
            "ratio_vs_source": report.ratio_vs_source(report.zip_bytes),
        }
    return payload
