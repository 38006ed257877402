"""Corpus synthesis: long-tail subsampling, label-noise injection, and the
two-Gaussian generator with head/tail groups.

Noise models
------------
* symmetric: every wrong class equally likely, off-diagonal rho/(K-1);
* imbalance-directed: wrong labels drawn in proportion to class priors,
  T[i][j] = priors[j] * rho / (1 - priors[i]) for j != i.

Two-Gaussian world
------------------
Binary classes at means (mu_minus, mu_plus) with shared sigma. Label 1 is the
positive class, label 0 the negative class. Within each class, samples beyond
``eta`` standard deviations on the confusable side (toward the other class)
form the tail group. Group ids: 0 = head+, 1 = tail+, 2 = head-, 3 = tail-.
Head/tail membership is defined by the clean label and is not changed by
label flipping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import GroupAssignment, LabeledCorpus
from .seeds import (
    STREAM_APPLY_NOISE,
    STREAM_BLOBS,
    STREAM_GAUSSIAN,
    STREAM_POP_NOISE,
    STREAM_SUBSAMPLE,
    derive_rng,
)

__all__ = [
    "NoiseTransition",
    "LongTailSpec",
    "GaussianMixtureSpec",
    "longtail_counts",
    "subsample_longtail",
    "sym_transition",
    "imb_transition",
    "two_class_transition",
    "apply_noise",
    "gaussian_mixture",
    "population_noise",
    "class_blobs",
    "LABEL_MINUS",
    "LABEL_PLUS",
    "HEAD_PLUS",
    "TAIL_PLUS",
    "HEAD_MINUS",
    "TAIL_MINUS",
    "ROW_STOCHASTIC_TOL",
]

LABEL_MINUS, LABEL_PLUS = 0, 1
HEAD_PLUS, TAIL_PLUS, HEAD_MINUS, TAIL_MINUS = 0, 1, 2, 3

ROW_STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True)
class NoiseTransition:
    """Row-stochastic K x K matrix; entries[i][j] = P(noisy=j | clean=i)."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("transition matrix must be square")
        if (arr < 0).any():
            raise ValueError("transition entries must be nonnegative")
        if np.abs(arr.sum(axis=1) - 1.0).max() > ROW_STOCHASTIC_TOL:
            raise ValueError(f"rows must sum to 1 within {ROW_STOCHASTIC_TOL}")

    @property
    def class_count(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class LongTailSpec:
    """Per-class counts decay from base_count by imbalance_ratio across classes."""

    base_count: int
    imbalance_ratio: float
    class_count: int

    def __post_init__(self):
        if self.base_count < 1:
            raise ValueError("base_count must be >= 1")
        if self.imbalance_ratio < 1:
            raise ValueError("imbalance_ratio must be >= 1")
        if self.class_count < 1:
            raise ValueError("class_count must be >= 1")


@dataclass(frozen=True)
class GaussianMixtureSpec:
    """Two-Gaussian world: class means, shared sigma, tail threshold eta."""

    mu_plus: float
    mu_minus: float
    sigma: float
    eta: float
    count_plus: int
    count_minus: int

    def __post_init__(self):
        if not self.mu_plus > self.mu_minus:
            raise ValueError("mu_plus must exceed mu_minus")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.count_plus < 1 or self.count_minus < 1:
            raise ValueError("counts must be >= 1")


def longtail_counts(spec: LongTailSpec) -> list[int]:
    """count[k] = floor(base / ratio^(k/(K-1))) for k = 0..K-1, clamped at 1.

    Fractional targets are floored (documented choice), and no class is
    allowed to vanish.
    """
    if spec.class_count == 1:
        return [spec.base_count]
    out = []
    for k in range(spec.class_count):
        decay = spec.imbalance_ratio ** (k / (spec.class_count - 1))
        out.append(max(1, int(np.floor(spec.base_count / decay))))
    return out


def subsample_longtail(corpus: LabeledCorpus, spec: LongTailSpec, seed: int) -> LabeledCorpus:
    """Uniform without-replacement subsample to the long-tail class counts.

    Selection refers to clean labels; rows keep their original relative order.
    Deterministic given seed (one derived stream per class).
    """
    if corpus.clean_labels is None:
        raise ValueError("subsample_longtail requires clean labels")
    targets = longtail_counts(spec)
    keep: list[np.ndarray] = []
    for cls in range(spec.class_count):
        members = np.flatnonzero(corpus.clean_labels == cls)
        if members.size < targets[cls]:
            raise ValueError(
                f"insufficient class population: class {cls} has {members.size} rows, needs {targets[cls]}")
        rng = derive_rng(seed, STREAM_SUBSAMPLE, cls)
        keep.append(rng.choice(members, size=targets[cls], replace=False))
    order = np.sort(np.concatenate(keep))
    groups = corpus.groups
    if groups is not None:
        groups = GroupAssignment(groups.group_ids[order], groups.group_count)
    return LabeledCorpus(corpus.features[order], corpus.noisy_labels[order],
                         corpus.class_count, corpus.clean_labels[order], groups)


def sym_transition(K: int, rho: float) -> NoiseTransition:
    """Uniform flipping: diagonal 1-rho, every off-diagonal rho/(K-1)."""
    if K < 2:
        raise ValueError("K must be >= 2")
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    T = np.full((K, K), rho / (K - 1))
    np.fill_diagonal(T, 1.0 - rho)
    return NoiseTransition(T)


def imb_transition(K: int, rho: float, priors) -> NoiseTransition:
    """Frequency-directed flipping: T[i][j] = priors[j]*rho/(1-priors[i]), j != i.

    Rows sum to 1 exactly because the off-diagonal priors sum to 1-priors[i].
    """
    if K < 2:
        raise ValueError("K must be >= 2")
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    pri = np.asarray(priors, dtype=np.float64)
    if pri.shape != (K,) or (pri <= 0).any() or abs(pri.sum() - 1.0) > 1e-9:
        raise ValueError("priors must be K positive values summing to 1")
    if (1.0 - pri).min() <= 1e-12:
        raise ValueError("degenerate prior: some 1-priors[i] is not positive")
    T = (pri[None, :] * rho) / (1.0 - pri[:, None])
    np.fill_diagonal(T, 1.0 - rho)
    return NoiseTransition(T)


def two_class_transition(rho_plus: float, rho_minus: float) -> NoiseTransition:
    """2x2 transition with P(flip | clean +) = rho_plus, P(flip | clean -) = rho_minus.

    Label convention: index 0 is the negative class, index 1 the positive.
    """
    return NoiseTransition([[1.0 - rho_minus, rho_minus],
                            [rho_plus, 1.0 - rho_plus]])


def apply_noise(clean_labels, T: NoiseTransition, seed: int) -> np.ndarray:
    """Draw each noisy label independently from row T[clean]; seeded."""
    labels = np.asarray(clean_labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= T.class_count):
        raise ValueError("labels out of range for transition matrix")
    rng = derive_rng(seed, STREAM_APPLY_NOISE)
    u = rng.random(labels.shape[0])
    cum = np.cumsum(T.entries, axis=1)
    noisy = (u[:, None] > cum[labels]).sum(axis=1)
    return np.minimum(noisy, T.class_count - 1).astype(np.int64)


def gaussian_mixture(spec: GaussianMixtureSpec, seed: int) -> LabeledCorpus:
    """Sample the two-Gaussian world with the four head/tail groups.

    Rows are the positive class first, then the negative class. A sample with
    clean label y is a head member when (x - mu_y)/sigma * sign(y) >= -eta,
    i.e. when it does not sit more than eta standard deviations on the side
    facing the other class. Noisy labels start equal to clean.
    """
    rng = derive_rng(seed, STREAM_GAUSSIAN)
    x_plus = rng.normal(spec.mu_plus, spec.sigma, spec.count_plus)
    x_minus = rng.normal(spec.mu_minus, spec.sigma, spec.count_minus)
    head_plus = (x_plus - spec.mu_plus) / spec.sigma >= -spec.eta
    head_minus = -(x_minus - spec.mu_minus) / spec.sigma >= -spec.eta
    features = np.concatenate([x_plus, x_minus]).reshape(-1, 1)
    labels = np.concatenate([
        np.full(spec.count_plus, LABEL_PLUS, dtype=np.int64),
        np.full(spec.count_minus, LABEL_MINUS, dtype=np.int64),
    ])
    group_ids = np.concatenate([
        np.where(head_plus, HEAD_PLUS, TAIL_PLUS),
        np.where(head_minus, HEAD_MINUS, TAIL_MINUS),
    ]).astype(np.int64)
    groups = GroupAssignment(group_ids, 4)
    return LabeledCorpus(features, labels, 2, labels.copy(), groups)


def population_noise(corpus: LabeledCorpus, T_head: NoiseTransition,
                     T_tail: NoiseTransition, seed: int) -> LabeledCorpus:
    """Flip clean labels with T_head on head rows and T_tail on tail rows.

    Requires the four-group assignment from :func:`gaussian_mixture`; the
    assignment itself is untouched because head/tail membership follows the
    clean label. Off-diagonal rates must stay below 0.5.
    """
    if corpus.groups is None or corpus.groups.group_count != 4:
        raise ValueError("population_noise requires the four-group head/tail assignment")
    if corpus.clean_labels is None:
        raise ValueError("population_noise requires clean labels")
    for name, T in (("head", T_head), ("tail", T_tail)):
        if T.class_count != 2:
            raise ValueError(f"{name} transition must be 2x2")
        off = T.entries[~np.eye(2, dtype=bool)]
        if (off >= 0.5).any():
            raise ValueError("noise rate too large: off-diagonals must be < 0.5")
    ids = corpus.groups.group_ids
    is_head = (ids == HEAD_PLUS) | (ids == HEAD_MINUS)
    rng = derive_rng(seed, STREAM_POP_NOISE)
    u = rng.random(corpus.n)
    flip_prob = np.where(
        corpus.clean_labels == LABEL_PLUS,
        np.where(is_head, T_head.entries[LABEL_PLUS, LABEL_MINUS], T_tail.entries[LABEL_PLUS, LABEL_MINUS]),
        np.where(is_head, T_head.entries[LABEL_MINUS, LABEL_PLUS], T_tail.entries[LABEL_MINUS, LABEL_PLUS]),
    )
    noisy = np.where(u < flip_prob, 1 - corpus.clean_labels, corpus.clean_labels)
    return corpus.with_noisy_labels(noisy.astype(np.int64))


def class_blobs(per_class: int, class_count: int, dim: int, separation: float,
                sigma: float, seed: int) -> LabeledCorpus:
    """Balanced isotropic Gaussian blobs, one seeded center per class.

    Feature source for the K-class experiments; centers are drawn once from
    N(0, separation^2 I) so any class count works in any dimension.
    """
    rng = derive_rng(seed, STREAM_BLOBS)
    centers = rng.normal(0.0, separation, size=(class_count, dim))
    features = np.concatenate([
        centers[c] + rng.normal(0.0, sigma, size=(per_class, dim))
        for c in range(class_count)
    ])
    labels = np.repeat(np.arange(class_count, dtype=np.int64), per_class)
    return LabeledCorpus(features, labels, class_count, labels.copy())
