import numpy as np

from physmorph.bridge.spatial_index import SpatialIndex
from physmorph.types import PointSample


def _mean_nearest_squared(points: np.ndarray, others: np.ndarray) -> float:
    indices, _ = SpatialIndex(others).query(points, 1)
    return float(np.mean(np.sum((points - others[indices[:, 0]]) ** 2, axis=-1)))


def chamfer(p: PointSample, q: PointSample) -> float:
    """Symmetric mean squared nearest-neighbor distance over the joint bounding box diagonal."""
    if p.count == 0 or q.count == 0:
        raise ValueError("Chamfer distance requires two non-empty point sets.")
    joint = np.concatenate([p.points, q.points])
    diagonal = float(np.linalg.norm(joint.max(axis=0) - joint.min(axis=0)))
    if diagonal == 0.0:
        return 0.0
    forward = _mean_nearest_squared(p.points, q.points)
    backward = _mean_nearest_squared(q.points, p.points)
    return (forward + backward) / diagonal
