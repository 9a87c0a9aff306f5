import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from latentseq import ValidationError, fuzzy_cmeans, harden, kmeans, silhouette
from latentseq.clustering import _fcm_membership

LINE = np.array([0.0, 0.1, 10.0, 10.1, 20.0, 20.1])[:, None]


def _best_partition(X, K):
    """Exhaustive minimum within-cluster sum of squares."""
    best = (np.inf, None)
    for labels in itertools.product(range(K), repeat=X.shape[0]):
        labels = np.array(labels)
        if np.unique(labels).size < K:
            continue
        ss = sum(((X[labels == k] - X[labels == k].mean(axis=0)) ** 2).sum() for k in range(K))
        if ss < best[0] - 1e-12:
            best = (ss, labels)
    return best


def _partition(labels):
    return {frozenset(np.flatnonzero(labels == k)) for k in np.unique(labels)}


def _silhouette_loops(X, labels):
    n = len(X)
    out = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            out.append(0.0)
            continue
        a = np.mean([np.linalg.norm(X[i] - X[j]) for j in own])
        b = min(
            np.mean([np.linalg.norm(X[i] - X[j]) for j in range(n) if labels[j] == c])
            for c in set(labels) if c != labels[i]
        )
        out.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    return np.array(out)


def _blobs(rng, n=40, sep=100.0, radius=1.0):
    a = rng.normal(scale=radius / 3, size=(n, 2))
    b = rng.normal(scale=radius / 3, size=(n, 2)) + [sep, 0.0]
    return np.r_[a, b]


class TestKMeans:
    def test_line_example_matches_exhaustive_search(self):
        ss, labels = _best_partition(LINE, 3)
        assert ss == pytest.approx(0.015, abs=1e-12)
        hc = kmeans(LINE, K=3, restarts=5, seed=0)
        assert hc.inertia == pytest.approx(ss, abs=1e-12)
        assert _partition(hc.assignments) == _partition(labels)
        assert hc.assignments.tolist() == [1, 1, 2, 2, 3, 3]

    def test_k1_and_kn(self, rng):
        X = rng.normal(size=(12, 2))
        one = kmeans(X, K=1)
        np.testing.assert_allclose(one.centroids[0], X.mean(axis=0))
        assert one.inertia == pytest.approx(((X - X.mean(axis=0)) ** 2).sum())
        assert kmeans(X, K=12, restarts=3).inertia == pytest.approx(0.0, abs=1e-20)

    def test_errors(self):
        with pytest.raises(ValidationError):
            kmeans(np.zeros((2, 2)), K=3)
        with pytest.raises(ValidationError):
            kmeans(np.zeros((4, 2)), K=0)
        with pytest.raises(ValidationError):
            kmeans([[0.0], [np.inf]], K=1)

    def test_history_and_inertia(self, rng):
        X = rng.normal(size=(200, 2))
        hc = kmeans(X, K=4, restarts=4, seed=1)
        assert np.all(np.diff(hc.inertia_history) <= 1e-9)
        recomputed = ((X - hc.centroids[hc.assignments - 1]) ** 2).sum()
        assert hc.inertia == pytest.approx(recomputed, abs=1e-8)
        assert sorted(np.unique(hc.assignments)) == [1, 2, 3, 4]
        assert hc.sizes.sum() == 200

    def test_repeated_points_keep_all_clusters(self):
        X = np.r_[np.zeros((10, 2)), np.ones((1, 2))]
        hc = kmeans(X, K=3, restarts=2)
        assert (hc.sizes > 0).all()

    def test_deterministic(self, rng):
        X = rng.normal(size=(100, 2))
        a, b = kmeans(X, K=3, seed=4), kmeans(X, K=3, seed=4)
        np.testing.assert_array_equal(a.assignments, b.assignments)

    def test_rotation_invariance(self, rng):
        X = np.r_[rng.normal(size=(30, 2)), rng.normal(size=(30, 2)) + 6, rng.normal(size=(30, 2)) + [0, 12]]
        theta = 0.7
        R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        a, b = kmeans(X, K=3, seed=0), kmeans(X @ R.T, K=3, seed=0)
        assert _partition(a.assignments) == _partition(b.assignments)

    @given(arrays(np.float64, st.tuples(st.integers(5, 40), st.integers(1, 3)), elements=st.floats(-50, 50)),
           st.integers(1, 4))
    def test_inertia_never_increases(self, X, K):
        if K > X.shape[0]:
            return
        hc = kmeans(X, K=K, restarts=2, seed=0)
        assert np.all(np.diff(hc.inertia_history) <= 1e-9 * max(1.0, hc.inertia_history[0]))


class TestFuzzy:
    def test_blobs(self, rng):
        X = _blobs(rng, sep=20.0)
        soft = fuzzy_cmeans(X, K=2, seed=3)
        truth = np.repeat([1, 2], 40)
        own = soft.membership[np.arange(80), harden(soft) - 1]
        assert np.all(own >= 0.99)
        assert _partition(harden(soft)) == _partition(truth)
        assert _partition(harden(soft)) == _partition(kmeans(X, K=2, seed=3).assignments)

    def test_closed_form_two_centroid_membership(self):
        X = np.array([[1.0, 0.0]])
        C = np.array([[0.0, 0.0], [4.0, 0.0]])
        u = _fcm_membership(X, C, 2.0)
        # u1 = 1 / (1 + (d1/d2)^2) with d1 = 1, d2 = 3
        np.testing.assert_allclose(u, [[0.9, 0.1]], atol=1e-15)

    def test_equidistant_point(self):
        u = _fcm_membership(np.array([[0.0, 0.0]]), np.array([[-1.0, 0.0], [1.0, 0.0]]), 2.0)
        np.testing.assert_array_equal(u, [[0.5, 0.5]])

    def test_point_on_centroid(self):
        u = _fcm_membership(np.array([[1.0, 1.0], [0.0, 0.0]]), np.array([[1.0, 1.0], [5.0, 5.0]]), 2.0)
        np.testing.assert_array_equal(u[0], [1.0, 0.0])
        assert abs(u[1].sum() - 1) < 1e-12

    def test_small_fuzzifier_approaches_kmeans(self, rng):
        X = _blobs(rng, sep=10.0)
        soft = fuzzy_cmeans(X, K=2, m=1.05, seed=0)
        assert _partition(harden(soft)) == _partition(kmeans(X, K=2).assignments)
        assert soft.membership.max(axis=1).min() > 0.999

    def test_errors(self):
        with pytest.raises(ValidationError):
            fuzzy_cmeans(np.zeros((5, 2)), K=2, m=1.0)
        with pytest.raises(ValidationError):
            fuzzy_cmeans(np.zeros((1, 2)), K=2)

    @given(arrays(np.float64, st.tuples(st.integers(3, 25), st.integers(1, 3)), elements=st.floats(-1e3, 1e3)),
           st.integers(2, 3), st.floats(1.1, 4.0))
    def test_rows_on_simplex(self, X, K, m):
        if K > X.shape[0]:
            return
        soft = fuzzy_cmeans(X, K=K, m=m, seed=0, max_iter=50)
        U = soft.membership
        assert np.all((U >= 0) & (U <= 1))
        np.testing.assert_allclose(U.sum(axis=1), 1.0, atol=1e-9)


class TestSilhouette:
    def test_line_example_by_direct_formula(self):
        labels = np.array([1, 1, 2, 2, 3, 3])
        s, mean = silhouette(LINE, labels)
        np.testing.assert_allclose(s, _silhouette_loops(LINE, labels), atol=1e-14)
        # point 0: a = 0.1, b = mean(10, 10.1) = 10.05
        assert s[0] == pytest.approx(1 - 0.1 / 10.05, abs=1e-14)
        assert mean == pytest.approx(s.mean())

    def test_matches_sklearn(self, rng):
        metrics = pytest.importorskip("sklearn.metrics")
        X = rng.normal(size=(150, 3))
        labels = rng.integers(1, 5, size=150)
        s, mean = silhouette(X, labels, chunk=37)
        np.testing.assert_allclose(s, metrics.silhouette_samples(X, labels), atol=1e-12)
        assert mean == pytest.approx(metrics.silhouette_score(X, labels), abs=1e-12)

    def test_separated_blobs(self, rng):
        X = _blobs(rng, sep=100.0, radius=1.0)
        assert silhouette(X, np.repeat([1, 2], 40))[1] >= 0.95

    def test_identical_points(self):
        s, mean = silhouette(np.zeros((6, 2)), [1, 1, 1, 2, 2, 2])
        assert mean == 0 and np.all(s == 0)

    def test_singleton_scores_zero(self):
        s, _ = silhouette(np.array([[0.0], [1.0], [1.1], [5.0]]), [1, 2, 2, 3])
        assert s[0] == 0 and s[3] == 0

    def test_errors(self):
        with pytest.raises(ValidationError):
            silhouette(np.zeros((4, 2)), [1, 1, 1, 1])
        with pytest.raises(ValidationError):
            silhouette(np.zeros((4, 2)), [1, 2])
