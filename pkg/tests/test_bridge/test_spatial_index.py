import numpy as np
import pytest

from physmorph.bridge import SpatialIndex, inverse_distance_weights, knn
from physmorph.utils.parallel import set_num_threads


def _brute_force(points, queries, k):
    distances = np.linalg.norm(queries[:, None, :] - points[None], axis=-1)
    order = np.lexsort((np.broadcast_to(np.arange(points.shape[0]), distances.shape), distances))
    return order[:, :k]


def test_query_matches_brute_force(rng):
    points = rng.normal(size=(200, 3))
    queries = rng.normal(size=(50, 3))
    indices, distances = SpatialIndex(points).query(queries, 8)
    assert np.array_equal(indices, _brute_force(points, queries, 8))
    assert np.allclose(distances, np.linalg.norm(points[indices] - queries[:, None], axis=-1))
    assert bool((np.diff(distances, axis=1) >= 0).all())


def test_ties_broken_by_index():
    # Lattice points are equidistant from the query in many directions.
    axis = np.arange(-2.0, 3.0)
    points = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), -1).reshape(-1, 3)
    queries = np.array([[0.0, 0.0, 0.0], [0.5, 0.5, 0.5]])
    indices, _ = SpatialIndex(points).query(queries, 7)
    assert np.array_equal(indices, _brute_force(points, queries, 7))


def test_query_independent_of_threads(rng):
    points = rng.normal(size=(300, 3))
    queries = rng.normal(size=(100, 3))
    serial = SpatialIndex(points).query(queries, 5)
    set_num_threads(4)
    parallel = SpatialIndex(points).query(queries, 5)
    assert np.array_equal(serial[0], parallel[0])
    assert np.array_equal(serial[1], parallel[1])


def test_query_edge_cases(rng):
    index = SpatialIndex(rng.normal(size=(4, 3)))
    with pytest.raises(ValueError):
        index.query(np.zeros((1, 3)), 5)
    indices, distances = index.query(np.zeros((0, 3)), 2)
    assert indices.shape == (0, 2) and distances.shape == (0, 2)


def test_inverse_distance_weights():
    weights = inverse_distance_weights(np.array([[1.0, 1.0, 2.0], [0.0, 1.0, 1.0]]))
    assert np.allclose(weights.sum(-1), 1.0)
    assert weights[0, 0] == pytest.approx(0.4)
    # A coincident point takes almost all the weight.
    assert weights[1, 0] > 1 - 1e-6


def test_knn(rng):
    points = rng.normal(size=(40, 3))
    indices, weights = knn(points, points[:3], 4)
    assert np.array_equal(indices[:, 0], [0, 1, 2])
    assert np.allclose(weights.sum(-1), 1.0)
