"""Exact k nearest neighbors on a kd-tree, ties broken by lower point index."""
from typing import Tuple

import numpy as np
import structlog
from scipy.spatial import cKDTree

from physmorph.utils.parallel import get_num_threads

log = structlog.get_logger(__name__)

# Added to distances in inverse-distance weights.
WEIGHT_ETA = 1e-9
TIE_TOLERANCE = 1e-12


class SpatialIndex:
    """Nearest neighbor queries over a fixed point set."""

    def __init__(self, points: np.ndarray):
        self.points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
        self.tree = cKDTree(self.points)

    @property
    def count(self) -> int:
        return int(self.points.shape[0])

    def _distances(self, queries: np.ndarray, indices: np.ndarray) -> np.ndarray:
        return np.linalg.norm(self.points[indices] - queries[:, None, :], axis=-1)

    def query(self, queries: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """Indices (Q, k) and distances (Q, k), sorted by distance then index."""
        if k > self.count:
            raise ValueError(f"Requested {k} neighbors from {self.count} points.")
        queries = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 3)
        if k == 0 or queries.shape[0] == 0:
            return (
                np.zeros((queries.shape[0], k), dtype=np.int64),
                np.zeros((queries.shape[0], k)),
            )
        probe = min(k + 1, self.count)
        tree_dist, indices = self.tree.query(
            queries, k=list(range(1, probe + 1)), workers=get_num_threads()
        )
        indices = indices.astype(np.int64)
        if probe > k:
            kth, next_ = tree_dist[:, k - 1], tree_dist[:, k]
            tied = np.nonzero(next_ - kth <= TIE_TOLERANCE * np.maximum(kth, 1.0))[0]
            indices = indices[:, :k]
            for row in tied:
                radius = kth[row] * (1 + 1e-9) + 1e-12
                candidates = np.asarray(self.tree.query_ball_point(queries[row], radius))
                dist = np.linalg.norm(self.points[candidates] - queries[row], axis=-1)
                order = np.lexsort((candidates, dist))
                indices[row] = candidates[order[:k]]
        distances = self._distances(queries, indices)
        order = _row_lexsort(indices, distances)
        indices = np.take_along_axis(indices, order, axis=1)
        distances = np.take_along_axis(distances, order, axis=1)
        return indices, distances


def _row_lexsort(indices: np.ndarray, distances: np.ndarray) -> np.ndarray:
    """Per-row ordering by distance, then by index."""
    by_index = np.argsort(indices, axis=1, kind="stable")
    by_distance = np.argsort(np.take_along_axis(distances, by_index, axis=1), axis=1, kind="stable")
    return np.take_along_axis(by_index, by_distance, axis=1)


def inverse_distance_weights(distances: np.ndarray, eta: float = WEIGHT_ETA) -> np.ndarray:
    weights = 1.0 / (distances + eta)
    return weights / weights.sum(axis=-1, keepdims=True)


def knn(points: np.ndarray, queries: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Indices of the k nearest points and their normalized inverse-distance weights."""
    indices, distances = SpatialIndex(points).query(queries, k)
    return indices, inverse_distance_weights(distances)
