import numpy as np

from physmorph.scene.shapes import EmptyShapeError, Shape
from physmorph.types import PointSample, PointSource


def sample_shape_surface(shape: Shape, n: int, rng: np.random.Generator) -> PointSample:
    if n < 1:
        raise ValueError(f"At least one sample is required, got {n}.")
    return PointSample(points=shape.sample_surface(n, rng), source=PointSource.target)


def sample_cloud_surface(
    positions: np.ndarray,
    visibility: np.ndarray,
    n: int,
    rng: np.random.Generator,
    threshold: float = 0.5,
) -> PointSample:
    """Draw `n` points, uniformly by count, among the particles of the visible outer shell."""
    if n < 1:
        raise ValueError(f"At least one sample is required, got {n}.")
    shell = np.asarray(positions)[np.asarray(visibility) > threshold]
    if shell.shape[0] == 0:
        raise EmptyShapeError("No particle is visible enough to define a surface.")
    chosen = rng.choice(shell.shape[0], size=n, replace=shell.shape[0] < n)
    return PointSample(points=shell[np.sort(chosen)], source=PointSource.predicted)
