"""Study manifests: labeling, class balancing, patient-disjoint splitting.

A manifest is a CSV with header patient_id,image_id,path,birads,days_to_biopsy,label
where an empty field means absent. Labels derive from screening scores:
birads 4..6 with a biopsy within 180 days is Positive, birads 1..2 is
Negative, everything else is Excluded from the labeled pool.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import EmptyInput, InsufficientClass, ManifestError

POSITIVE = "Positive"
NEGATIVE = "Negative"
EXCLUDED = "Excluded"

POSITIVE_BIRADS = frozenset((4, 5, 6))
NEGATIVE_BIRADS = frozenset((1, 2))
BIOPSY_WINDOW_DAYS = 180

SPLIT_NAMES = ("train", "validation", "test")
DEFAULT_RATIOS = (0.6, 0.2, 0.2)

_CSV_HEADER = ["patient_id", "image_id", "path", "birads", "days_to_biopsy", "label"]


@dataclass(frozen=True)
class StudyRecord:
    patient_id: str
    image_id: str
    path: str
    birads: int | None = None
    days_to_biopsy: int | None = None
    label: str | None = None

    def __post_init__(self):
        if self.birads is not None and not 0 <= self.birads <= 6:
            raise ValueError(f"birads {self.birads} outside 0..6")
        if self.days_to_biopsy is not None and self.days_to_biopsy < 0:
            raise ValueError("days_to_biopsy must be non-negative")
        if self.label is not None and self.label not in (POSITIVE, NEGATIVE, EXCLUDED):
            raise ValueError(f"unknown label {self.label!r}")


@dataclass(frozen=True)
class SplitAssignment:
    """image_id -> split name, plus the parameters that produced it."""

    assignments: dict
    patient_assignments: dict
    seed: int
    ratios: tuple

    def split_of(self, image_id: str) -> str:
        return self.assignments[image_id]

    def members(self, split: str) -> list:
        return sorted(i for i, s in self.assignments.items() if s == split)


def derive_label(rec: StudyRecord) -> str:
    """Positive, Negative, or Excluded per the screening-score rule."""
    if rec.birads is None:
        raise ValueError(f"record {rec.image_id}: birads not populated")
    if rec.birads in POSITIVE_BIRADS:
        if rec.days_to_biopsy is not None and rec.days_to_biopsy <= BIOPSY_WINDOW_DAYS:
            return POSITIVE
        return EXCLUDED
    if rec.birads in NEGATIVE_BIRADS:
        return NEGATIVE
    return EXCLUDED


def apply_labels(records) -> list:
    """Derived-label copy of every record; order preserved."""
    return [replace(r, label=derive_label(r)) for r in records]


def labeled_subset(records) -> list:
    """Records whose derived label is Positive or Negative, labels filled."""
    return [r for r in apply_labels(records) if r.label != EXCLUDED]


def split_patients(records, ratios=DEFAULT_RATIOS, seed: int = 0) -> SplitAssignment:
    """Assign whole patients to train/validation/test.

    Patients are shuffled by a seeded generator, then each is placed in the
    split with the largest image-count deficit against its ratio target
    (ties go in train, validation, test order). Placing whole patients makes
    disjointness structural; the greedy rule keeps every split within one
    largest-patient image count of its target.
    """
    records = list(records)
    if not records:
        raise EmptyInput("no records to split")
    if len(ratios) != len(SPLIT_NAMES):
        raise ValueError(f"need {len(SPLIT_NAMES)} ratios")
    if any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ValueError(f"ratios must be non-negative and sum to 1, got {ratios}")
    for r in records:
        if r.label not in (POSITIVE, NEGATIVE):
            raise ValueError(f"record {r.image_id} is not labeled Positive/Negative")

    images_by_patient: dict = {}
    for r in records:
        images_by_patient.setdefault(r.patient_id, []).append(r.image_id)

    patients = sorted(images_by_patient)
    rng = np.random.default_rng(seed)
    order = [patients[i] for i in rng.permutation(len(patients))]

    total = len(records)
    targets = [ratio * total for ratio in ratios]
    counts = [0, 0, 0]
    patient_assignments: dict = {}
    assignments: dict = {}
    for patient in order:
        deficits = [targets[k] - counts[k] for k in range(len(SPLIT_NAMES))]
        best = max(range(len(SPLIT_NAMES)), key=lambda k: (deficits[k], -k))
        split = SPLIT_NAMES[best]
        patient_assignments[patient] = split
        for image_id in images_by_patient[patient]:
            assignments[image_id] = split
        counts[best] += len(images_by_patient[patient])

    return SplitAssignment(
        assignments=assignments,
        patient_assignments=patient_assignments,
        seed=seed,
        ratios=tuple(ratios),
    )


def balance_classes(records, per_class: int, seed: int = 0) -> list:
    """Seeded subsample without replacement to per_class records per label.

    Records are ordered by image_id before sampling so the draw depends only
    on content and seed, never on input order. Output is sorted by image_id.
    """
    if per_class < 0:
        raise ValueError("per_class must be non-negative")
    by_label: dict = {}
    for r in records:
        if r.label not in (POSITIVE, NEGATIVE):
            raise ValueError(f"record {r.image_id} is not labeled Positive/Negative")
        by_label.setdefault(r.label, []).append(r)

    rng = np.random.default_rng(seed)
    chosen = []
    for label in sorted(by_label):
        pool = sorted(by_label[label], key=lambda r: r.image_id)
        if len(pool) < per_class:
            raise InsufficientClass(label, len(pool), per_class)
        idx = rng.choice(len(pool), size=per_class, replace=False)
        chosen.extend(pool[i] for i in sorted(idx))
    missing = [lbl for lbl in (NEGATIVE, POSITIVE) if lbl not in by_label]
    if missing and per_class > 0:
        raise InsufficientClass(missing[0], 0, per_class)
    return sorted(chosen, key=lambda r: r.image_id)


def read_manifest(path) -> list:
    path = Path(path)
    records = []
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _CSV_HEADER:
            raise ManifestError(
                f"{path}: expected header {','.join(_CSV_HEADER)}, got {reader.fieldnames}"
            )
        for row in reader:
            image_id = row["image_id"]
            if image_id in seen:
                raise ManifestError(f"{path}: duplicate image_id {image_id}")
            seen.add(image_id)
            try:
                rec = StudyRecord(
                    patient_id=row["patient_id"],
                    image_id=image_id,
                    path=row["path"],
                    birads=int(row["birads"]) if row["birads"] else None,
                    days_to_biopsy=int(row["days_to_biopsy"]) if row["days_to_biopsy"] else None,
                    label=row["label"] or None,
                )
            except ValueError as exc:
                raise ManifestError(f"{path}: {exc}") from exc
            records.append(rec)
    return records


def write_manifest(records, path) -> None:
    seen = set()
    for r in records:
        if r.image_id in seen:
            raise ManifestError(f"duplicate image_id {r.image_id}")
        seen.add(r.image_id)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for r in records:
            writer.writerow([
                r.patient_id,
                r.image_id,
                r.path,
                "" if r.birads is None else r.birads,
                "" if r.days_to_biopsy is None else r.days_to_biopsy,
                r.label or "",
            ])


def split_summary(records, assignment: SplitAssignment) -> dict:
    """Seed, ratios, and per-split per-class counts for the summary artifact."""
    by_id = {r.image_id: r for r in records}
    splits = {}
    for name in SPLIT_NAMES:
        ids = assignment.members(name)
        patients = sorted({by_id[i].patient_id for i in ids})
        splits[name] = {
            "images": len(ids),
            "patients": len(patients),
            "positive": sum(1 for i in ids if by_id[i].label == POSITIVE),
            "negative": sum(1 for i in ids if by_id[i].label == NEGATIVE),
        }
    return {
        "seed": assignment.seed,
        "ratios": list(assignment.ratios),
        "splits": splits,
    }


def write_split(records, assignment: SplitAssignment, out_dir, config: dict | None = None) -> None:
    """Write train/validation/test manifests plus split_summary.json.

    Output rows are sorted by image_id so the artifacts are byte-stable for
    a given (records, seed) regardless of input order.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_id = {r.image_id: r for r in records}
    for name in SPLIT_NAMES:
        members = [by_id[i] for i in assignment.members(name)]
        write_manifest(members, out_dir / f"{name}.csv")
    summary = split_summary(records, assignment)
    if config:
        summary["config"] = config
    with open(out_dir / "split_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
