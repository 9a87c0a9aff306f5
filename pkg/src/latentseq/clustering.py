"""K-means, fuzzy C-means and silhouette scores on PCA scores.

Cluster labels are 1-based.  Both clusterings return clusters in a canonical
order (centroids sorted lexicographically, first coordinate ascending) so that
equal partitions found from different starts carry equal labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from latentseq.exceptions import ValidationError


@dataclass(frozen=True, eq=False)
class HardClustering:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    restarts_used: int
    n_iter: int = 0
    inertia_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k + 1)[1:]


@dataclass(frozen=True, eq=False)
class SoftClustering:
    membership: np.ndarray
    centroids: np.ndarray
    m: float
    n_iter: int = 0
    converged: bool = False

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _check_points(points, K: int) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValidationError("points must be an N x d matrix")
    if not np.all(np.isfinite(X)):
        raise ValidationError("points contain non-finite values")
    if int(K) != K or K < 1:
        raise ValidationError(f"K must be a positive integer, got {K}")
    if X.shape[0] < K:
        raise ValidationError(f"need at least K={K} points, got {X.shape[0]}")
    return X


def _sqdist(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _canonical_order(centroids: np.ndarray) -> np.ndarray:
    # lexsort uses the last key as primary
    return np.lexsort(centroids.T[::-1])


def _kmeanspp(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _repair_empty(X: np.ndarray, labels: np.ndarray, centroids: np.ndarray, d2: np.ndarray) -> None:
    """Reseed each empty cluster at the point farthest from its own centroid."""
    K = centroids.shape[0]
    for j in range(K):
        counts = np.bincount(labels, minlength=K)
        if counts[j] > 0:
            continue
        own = d2[np.arange(X.shape[0]), labels].copy()
        own[counts[labels] < 2] = -np.inf
        far = int(np.argmax(own))
        centroids[j] = X[far]
        labels[far] = j
        d2[:, j] = ((X - X[far]) ** 2).sum(axis=1)


def _lloyd(X: np.ndarray, centroids: np.ndarray, max_iter: int) -> tuple[np.ndarray, np.ndarray, float, int, list[float]]:
    n = X.shape[0]
    centroids = centroids.copy()
    labels = None
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _sqdist(X, centroids)
        new = np.argmin(d2, axis=1)
        _repair_empty(X, new, centroids, d2)
        history.append(float(d2[np.arange(n), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(centroids.shape[0]):
            centroids[j] = X[labels == j].mean(axis=0)
    inertia = float(((X - centroids[labels]) ** 2).sum())
    history.append(inertia)
    return labels, centroids, inertia, n_iter, history


def kmeans(
    points,
    K: int = 3,
    restarts: int = 25,
    seed: int | None = 0,
    max_iter: int = 300,
) -> HardClustering:
    """Best-of-``restarts`` Lloyd K-means from k-means++ starts.

    ``inertia_history`` records the objective after every assignment step of
    the winning run (nonincreasing), ending with the final inertia.

    Examples
    --------
    >>> hc = kmeans([0, 0.1, 10, 10.1, 20, 20.1], K=3, restarts=5)
    >>> hc.assignments.tolist(), round(hc.inertia, 12)
    ([1, 1, 2, 2, 3, 3], 0.015)
    """
    X = _check_points(points, K)
    if restarts < 1:
        raise ValidationError("restarts must be at least 1")
    best = None
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
        rng = np.random.default_rng(child)
        run = _lloyd(X, _kmeanspp(X, K, rng), max_iter)
        if best is None or run[2] < best[2]:
            best = run + (r,)
    labels, centroids, inertia, n_iter, history, _ = best
    order = _canonical_order(centroids)
    relabel = np.empty(K, dtype=np.int64)
    relabel[order] = np.arange(K)
    return HardClustering(
        assignments=relabel[labels] + 1,
        centroids=centroids[order],
        inertia=inertia,
        restarts_used=restarts,
        n_iter=n_iter,
        inertia_history=tuple(history),
    )


def _fcm_membership(X: np.ndarray, centroids: np.ndarray, m: float) -> np.ndarray:
    d = np.sqrt(_sqdist(X, centroids))
    U = np.empty_like(d)
    zero = d == 0
    hit = zero.any(axis=1)
    if hit.any():
        # limit rule: a point on a centroid belongs to it (shared among coincident centroids)
        U[hit] = zero[hit] / zero[hit].sum(axis=1, keepdims=True)
    rest = ~hit
    if rest.any():
        logits = -(2.0 / (m - 1.0)) * np.log(d[rest])
        logits -= logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        U[rest] = w / w.sum(axis=1, keepdims=True)
    return U


def _fcm_centroids(X: np.ndarray, U: np.ndarray, m: float, previous: np.ndarray | None = None) -> np.ndarray:
    W = U**m
    mass = W.sum(axis=0)
    C = (W.T @ X) / np.where(mass > 0, mass, 1.0)[:, None]
    if previous is not None:
        # a centroid nobody belongs to (e.g. all points on another centroid) stays put
        C[mass == 0] = previous[mass == 0]
    return C


def fuzzy_cmeans(
    points,
    K: int = 3,
    m: float = 2.0,
    tol: float = 1e-6,
    max_iter: int = 300,
    seed: int | None = 0,
) -> SoftClustering:
    """Fuzzy C-means by alternating centroid and membership updates.

    Starts from Dirichlet(1) memberships; stops once no membership moves by
    ``tol`` or more.
    """
    X = _check_points(points, K)
    if not m > 1:
        raise ValidationError(f"fuzzifier m must exceed 1, got {m}")
    rng = np.random.default_rng(seed)
    U = rng.dirichlet(np.ones(K), size=X.shape[0])
    converged = False
    n_iter = 0
    centroids = None
    for n_iter in range(1, max_iter + 1):
        centroids = _fcm_centroids(X, U, m, centroids)
        new = _fcm_membership(X, centroids, m)
        delta = np.max(np.abs(new - U))
        U = new
        if delta < tol:
            converged = True
            break
    centroids = _fcm_centroids(X, U, m, centroids)
    order = _canonical_order(centroids)
    return SoftClustering(U[:, order], centroids[order], float(m), n_iter, converged)


def harden(soft: SoftClustering) -> np.ndarray:
    """Row-wise argmax of the memberships (1-based, ties to the lower label)."""
    return np.argmax(soft.membership, axis=1) + 1


def silhouette(points, assignments, chunk: int = 2048) -> tuple[np.ndarray, float]:
    """Per-point silhouette widths and their mean (Euclidean distance).

    Points in singleton clusters score 0.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    labels = np.asarray(assignments)
    if labels.shape != (X.shape[0],):
        raise ValidationError("assignments must have one label per point")
    uniq, codes = np.unique(labels, return_inverse=True)
    K = uniq.size
    if K < 2:
        raise ValidationError("silhouette needs at least 2 clusters")
    counts = np.bincount(codes, minlength=K).astype(float)
    n = X.shape[0]

    sums = np.zeros((n, K))
    for start in range(0, n, chunk):
        D = cdist(X[start:start + chunk], X)
        for j in range(K):
            sums[start:start + chunk, j] = D[:, codes == j].sum(axis=1)

    own = codes
    own_count = counts[own]
    a = np.where(own_count > 1, sums[np.arange(n), own] / np.maximum(own_count - 1, 1), 0.0)
    other = sums / counts
    other[np.arange(n), own] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    s[own_count == 1] = 0.0
    return s, float(s.mean())
