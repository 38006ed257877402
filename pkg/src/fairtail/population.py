"""Group discovery: k-means over feature vectors, two-group score splits,
and group files.

The feature matrix can come from anywhere (raw synthetic coordinates or an
externally computed embedding); nothing here trains a representation.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array

from .datamodel import GroupAssignment
from .seeds import STREAM_KMEANS, derive_rng

__all__ = ["KMeansResult", "kmeans_groups", "split_two_groups", "load_groups", "KMeansGrouper"]


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    assignment: GroupAssignment
    inertia: float
    n_iter: int


def _nearest(features: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid per row (ties to the lowest index) and squared distances."""
    d2 = ((features[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(features.shape[0]), labels]


def _plus_plus_init(features: np.ndarray, N: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: first center uniform, then proportional to squared distance."""
    n = features.shape[0]
    centers = np.empty((N, features.shape[1]))
    centers[0] = features[rng.integers(n)]
    d2 = ((features - centers[0]) ** 2).sum(axis=1)
    for k in range(1, N):
        total = d2.sum()
        if total <= 0:
            centers[k] = features[rng.integers(n)]
        else:
            centers[k] = features[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((features - centers[k]) ** 2).sum(axis=1))
    return centers


def kmeans_groups(features, N: int, seed: int, max_iters: int = 100,
                  tol: float = 1e-8) -> KMeansResult:
    """Lloyd iterations from k-means++ seeding; deterministic given seed.

    Stops when the inertia improvement drops below ``tol`` or after
    ``max_iters`` rounds. An emptied cluster is re-seeded at the point
    farthest from its assigned centroid, keeping N fixed. The returned
    assignment maps every sample to its nearest returned centroid.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n = X.shape[0]
    if not 1 <= N <= n:
        raise ValueError(f"N exceeds n: need 1 <= N <= {n}, got {N}")
    rng = derive_rng(seed, STREAM_KMEANS)
    centroids = _plus_plus_init(X, N, rng)
    labels, d2 = _nearest(X, centroids)
    inertia = float(d2.sum())
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        for k in range(N):
            members = labels == k
            if members.any():
                centroids[k] = X[members].mean(axis=0)
            else:
                # re-seed the empty cluster at the worst-fit point
                _, cur_d2 = _nearest(X, centroids)
                centroids[k] = X[np.argmax(cur_d2)]
        labels, d2 = _nearest(X, centroids)
        new_inertia = float(d2.sum())
        improved = inertia - new_inertia
        inertia = new_inertia
        if improved < tol:
            break
    return KMeansResult(centroids, GroupAssignment(labels, N), inertia, n_iter)


def split_two_groups(scores, head_fraction: float) -> GroupAssignment:
    """Head/tail split on per-sample scores: top scores form group 0 (head).

    The head holds exactly round(head_fraction * n) samples; ties at the
    score threshold are resolved by stable sample order.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("scores must be a nonempty one-dimensional sequence")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    if not 0 < head_fraction < 1:
        raise ValueError("head_fraction must lie in (0, 1)")
    n = s.shape[0]
    head_count = int(np.floor(head_fraction * n + 0.5))
    order = np.argsort(-s, kind="stable")
    ids = np.ones(n, dtype=np.int64)
    ids[order[:head_count]] = 0
    return GroupAssignment(ids, 2)


def load_groups(path, n: int) -> GroupAssignment:
    """Parse one integer group id per line; the group count is max id + 1."""
    lines = Path(path).read_text().splitlines()
    values = [ln.strip() for ln in lines if ln.strip() != ""]
    if len(values) != n:
        raise ValueError(f"length mismatch: {len(values)} lines for {n} samples")
    ids = []
    for lineno, raw in enumerate(values):
        try:
            v = int(raw)
        except ValueError:
            raise ValueError(f"non-integer line {lineno}: {raw!r}") from None
        if v < 0:
            raise ValueError(f"negative id at line {lineno}: {v}")
        ids.append(v)
    return GroupAssignment(np.array(ids, dtype=np.int64), max(ids) + 1)


class KMeansGrouper(BaseEstimator, ClusterMixin):
    """Estimator wrapper around :func:`kmeans_groups`.

    Parameters mirror the functional interface; ``fit`` stores
    ``cluster_centers_``, ``labels_`` and ``inertia_``.
    """

    def __init__(self, n_groups: int = 2, seed: int = 0, max_iters: int = 100, tol: float = 1e-8):
        self.n_groups = n_groups
        self.seed = seed
        self.max_iters = max_iters
        self.tol = tol

    def fit(self, X, y=None):
        X = check_array(X)
        result = kmeans_groups(X, self.n_groups, self.seed, self.max_iters, self.tol)
        self.cluster_centers_ = result.centroids
        self.labels_ = result.assignment.group_ids
        self.inertia_ = result.inertia
        self.result_ = result
        return self

    def predict(self, X):
        X = check_array(X)
        labels, _ = _nearest(X, self.cluster_centers_)
        return labels
