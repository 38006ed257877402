"""Shared dataset records: feature matrix, clean/noisy labels, group ids.

All records are immutable after construction (arrays are frozen), so they can
be shared read-only across concurrent workers. Construction only coerces
shapes and dtypes; value-level invariants are checked by
:func:`validate_corpus`, which reports violations as data rather than raising.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "GroupAssignment",
    "LabeledCorpus",
    "CorpusSummary",
    "validate_corpus",
    "corpus_stats",
    "save_corpus",
    "load_corpus",
]


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GroupAssignment:
    """Per-sample group index in [0, group_count); groups may be empty."""

    group_ids: np.ndarray
    group_count: int

    def __post_init__(self):
        object.__setattr__(self, "group_ids", _frozen_array(self.group_ids, np.int64))
        if self.group_ids.ndim != 1:
            raise ValueError("group_ids must be one-dimensional")
        if self.group_count < 1:
            raise ValueError("group_count must be >= 1")

    def __len__(self) -> int:
        return self.group_ids.shape[0]

    def member_counts(self) -> np.ndarray:
        """Number of samples in each group; sums to len(self) when ids are in range."""
        return np.bincount(self.group_ids, minlength=self.group_count)[: self.group_count]


@dataclass(frozen=True)
class LabeledCorpus:
    """n feature rows with noisy labels, optional clean labels and groups.

    Labels are dense integer class indices; class names, when any, live only
    in CLI metadata. The feature matrix is row-major and frozen.
    """

    features: np.ndarray
    noisy_labels: np.ndarray
    class_count: int
    clean_labels: np.ndarray | None = None
    groups: GroupAssignment | None = None

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64)
        if feats.ndim == 1:
            feats = feats.reshape(-1, 1)
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "noisy_labels", _frozen_array(self.noisy_labels, np.int64))
        if self.clean_labels is not None:
            object.__setattr__(self, "clean_labels", _frozen_array(self.clean_labels, np.int64))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def with_noisy_labels(self, noisy_labels) -> "LabeledCorpus":
        return LabeledCorpus(self.features, noisy_labels, self.class_count,
                             self.clean_labels, self.groups)

    def with_groups(self, groups: GroupAssignment | None) -> "LabeledCorpus":
        return LabeledCorpus(self.features, self.noisy_labels, self.class_count,
                             self.clean_labels, groups)


@dataclass(frozen=True)
class CorpusSummary:
    per_class_counts: tuple
    per_group_counts: tuple | None
    empirical_imbalance_ratio: float | None
    empirical_noise_rate: float | None


def validate_corpus(corpus: LabeledCorpus) -> list[str]:
    """Check every type invariant; returns [] when the corpus is valid.

    Violations are data, not failures: each one names the offending row.
    """
    violations: list[str] = []
    n = corpus.n
    if corpus.class_count < 2:
        violations.append("class_count must be >= 2")
    if corpus.noisy_labels.shape[0] != n:
        violations.append(f"noisy label count {corpus.noisy_labels.shape[0]} != row count {n}")
    else:
        for i in np.flatnonzero((corpus.noisy_labels < 0) | (corpus.noisy_labels >= corpus.class_count)):
            violations.append(f"noisy label out of range at row {i}")
    if corpus.clean_labels is not None:
        if corpus.clean_labels.shape[0] != n:
            violations.append(f"clean label count {corpus.clean_labels.shape[0]} != row count {n}")
        else:
            for i in np.flatnonzero((corpus.clean_labels < 0) | (corpus.clean_labels >= corpus.class_count)):
                violations.append(f"clean label out of range at row {i}")
    if corpus.groups is not None:
        ids = corpus.groups.group_ids
        if ids.shape[0] != n:
            violations.append(f"assignment length mismatch: {ids.shape[0]} group ids for {n} rows")
        else:
            for i in np.flatnonzero((ids < 0) | (ids >= corpus.groups.group_count)):
                violations.append(f"group id out of range at row {i}")
    if not np.isfinite(corpus.features).all():
        bad = np.flatnonzero(~np.isfinite(corpus.features).all(axis=1))
        for i in bad:
            violations.append(f"non-finite feature at row {i}")
    return violations


def corpus_stats(corpus: LabeledCorpus) -> CorpusSummary:
    """Exact tallies: per-class/per-group counts, imbalance ratio, noise rate.

    Class counts use clean labels when present (the sampler's ground truth)
    and noisy labels otherwise. The imbalance ratio is max count over min
    nonzero count, absent when every class is empty; the noise rate is
    defined only when clean labels exist.
    """
    class_counts = np.bincount(corpus.noisy_labels if corpus.clean_labels is None else corpus.clean_labels,
                               minlength=corpus.class_count)[: corpus.class_count]
    nonzero = class_counts[class_counts > 0]
    ratio = float(nonzero.max() / nonzero.min()) if nonzero.size else None
    group_counts = tuple(int(c) for c in corpus.groups.member_counts()) if corpus.groups is not None else None
    noise_rate = None
    if corpus.clean_labels is not None and corpus.n > 0:
        noise_rate = float(np.mean(corpus.noisy_labels != corpus.clean_labels))
    elif corpus.clean_labels is not None:
        noise_rate = 0.0
    return CorpusSummary(
        per_class_counts=tuple(int(c) for c in class_counts),
        per_group_counts=group_counts,
        empirical_imbalance_ratio=ratio,
        empirical_noise_rate=noise_rate,
    )


# Serialization: CSV with header feat_0..feat_{d-1}[,clean_label],noisy_label[,group_id]
# plus a JSON sidecar carrying the counts that the CSV cannot encode on its own.


def save_corpus(corpus: LabeledCorpus, csv_path, meta_path=None) -> None:
    csv_path = Path(csv_path)
    meta_path = Path(meta_path) if meta_path is not None else csv_path.with_suffix(".meta.json")
    header = [f"feat_{j}" for j in range(corpus.d)]
    if corpus.clean_labels is not None:
        header.append("clean_label")
    header.append("noisy_label")
    if corpus.groups is not None:
        header.append("group_id")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(corpus.n):
            row = [repr(float(v)) for v in corpus.features[i]]
            if corpus.clean_labels is not None:
                row.append(str(int(corpus.clean_labels[i])))
            row.append(str(int(corpus.noisy_labels[i])))
            if corpus.groups is not None:
                row.append(str(int(corpus.groups.group_ids[i])))
            writer.writerow(row)
    meta = {
        "n": corpus.n,
        "d": corpus.d,
        "class_count": corpus.class_count,
        "group_count": corpus.groups.group_count if corpus.groups is not None else None,
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_corpus(csv_path, meta_path=None) -> LabeledCorpus:
    csv_path = Path(csv_path)
    meta_path = Path(meta_path) if meta_path is not None else csv_path.with_suffix(".meta.json")
    with open(meta_path) as fh:
        meta = json.load(fh)
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    d = sum(1 for name in header if name.startswith("feat_"))
    col = {name: idx for idx, name in enumerate(header)}
    feats = np.array([[float(r[j]) for j in range(d)] for r in rows], dtype=np.float64)
    feats = feats.reshape(len(rows), d)
    noisy = np.array([int(r[col["noisy_label"]]) for r in rows], dtype=np.int64)
    clean = None
    if "clean_label" in col:
        clean = np.array([int(r[col["clean_label"]]) for r in rows], dtype=np.int64)
    groups = None
    if "group_id" in col:
        ids = np.array([int(r[col["group_id"]]) for r in rows], dtype=np.int64)
        groups = GroupAssignment(ids, int(meta["group_count"]))
    return LabeledCorpus(feats, noisy, int(meta["class_count"]), clean, groups)
