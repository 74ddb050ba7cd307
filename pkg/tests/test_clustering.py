import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cardioradar.clustering import NOISE, dbscan

sklearn_cluster = pytest.importorskip("sklearn.cluster")


def _same_partition(a, b):
    """Equal up to a renaming of cluster ids, with identical noise sets."""
    a, b = np.asarray(a), np.asarray(b)
    if not np.array_equal(a == NOISE, b == NOISE):
        return False
    pairs = {(x, y) for x, y in zip(a, b) if x != NOISE}
    return len(pairs) == len({x for x, _ in pairs}) == len({y for _, y in pairs})


def _blobs(rng, centers, n=30, scale=0.1):
    return np.vstack([c + scale * rng.standard_normal((n, 2)) for c in centers])


def test_empty_input():
    assert dbscan(np.empty((0, 2)), 0.5, 4).size == 0


def test_three_separated_blobs(rng):
    X = _blobs(rng, [(0, 0), (5, 0), (0, 5)])
    labels = dbscan(X, 0.5, 4)
    assert set(labels) == {0, 1, 2}
    for k in range(3):
        assert len(set(labels[30 * k:30 * (k + 1)])) == 1


def test_isolated_point_is_noise(rng):
    X = np.vstack([_blobs(rng, [(0, 0)]), [[10.0, 10.0]]])
    labels = dbscan(X, 0.5, 4)
    assert labels[-1] == NOISE
    assert np.all(labels[:-1] == 0)


def test_min_pts_counts_the_point_itself():
    X = np.array([[0.0, 0.0], [0.1, 0.0], [0.2, 0.0], [0.3, 0.0]])
    assert np.all(dbscan(X, 0.35, 4) == 0)
    assert np.all(dbscan(X, 0.35, 5) == NOISE)


def test_labels_ordered_by_smallest_member():
    X = np.array([[5.0, 0]] * 4 + [[0.0, 0]] * 4)
    labels = dbscan(X, 0.1, 4)
    assert labels.tolist() == [1] * 4 + [0] * 4


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 60), st.floats(0.2, 1.5))
def test_matches_sklearn_on_core_structure(seed, n, eps):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 5, size=(n, 2))
    ours = dbscan(X, eps, 4)
    ref = sklearn_cluster.DBSCAN(eps=eps, min_samples=4).fit(X)
    core = np.zeros(n, bool)
    core[ref.core_sample_indices_] = True
    # core points and noise agree exactly; border points may be assigned to
    # a different adjacent cluster by sklearn's scan order
    assert _same_partition(np.where(core, ours, NOISE), np.where(core, ref.labels_, NOISE))
    assert np.array_equal(ours == NOISE, ref.labels_ == NOISE)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 50))
def test_permutation_invariant(seed, n):
    rng = np.random.default_rng(seed)
    X = np.round(rng.uniform(0, 3, size=(n, 2)), 1)  # rounding creates ties
    perm = rng.permutation(n)
    a = dbscan(X, 0.5, 4)
    b = dbscan(X[perm], 0.5, 4)
    np.testing.assert_array_equal(a[perm], b)


def test_one_dimensional_input():
    labels = dbscan(np.array([0.0, 0.1, 0.2, 0.3, 9.0]), 0.5, 4)
    assert labels.tolist() == [0, 0, 0, 0, NOISE]
