"""Signed distance shapes used as sources and targets.

All coordinates are world (grid) units. `sdf` is negative inside.
"""
import math
from abc import ABC, abstractmethod
from functools import cached_property
from typing import Tuple

import numpy as np
import structlog

from physmorph.config import ShapeKind, ShapeSpec
from physmorph.types import GridGeometry

log = structlog.get_logger(__name__)

REJECTION_BATCH_MIN = 4096
MAX_REJECTION_ROUNDS = 200
PROJECTION_ITERATIONS = 3
VOLUME_SAMPLES = 200_000


class EmptyShapeError(ValueError):
    pass


def _box_sdf(p: np.ndarray, half: np.ndarray) -> np.ndarray:
    q = np.abs(p) - half
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
    return outside + np.minimum(q.max(axis=-1), 0.0)


def _cylinder_sdf(p: np.ndarray, radius: float, height: float) -> np.ndarray:
    d = np.stack(
        [np.linalg.norm(p[..., :2], axis=-1) - radius, np.abs(p[..., 2]) - 0.5 * height], -1
    )
    return np.minimum(d.max(axis=-1), 0.0) + np.linalg.norm(np.maximum(d, 0.0), axis=-1)


class Shape(ABC):
    def __init__(self, center):
        self.center = np.asarray(center, dtype=np.float64)

    @abstractmethod
    def local_sdf(self, p: np.ndarray) -> np.ndarray:
        """Signed distance of points expressed relative to the center."""

    @abstractmethod
    def local_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        ...

    def analytic_volume(self):
        return None

    def sdf(self, points: np.ndarray) -> np.ndarray:
        return self.local_sdf(np.asarray(points, dtype=np.float64) - self.center)

    def contains(self, points: np.ndarray) -> np.ndarray:
        return self.sdf(points) < 0

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        lo, hi = self.local_bounds()
        return self.center + lo, self.center + hi

    @property
    def extent(self) -> np.ndarray:
        lo, hi = self.bounds()
        return hi - lo

    @cached_property
    def volume(self) -> float:
        analytic = self.analytic_volume()
        if analytic is not None:
            return float(analytic)
        lo, hi = self.bounds()
        rng = np.random.default_rng(0)
        points = rng.uniform(lo, hi, size=(VOLUME_SAMPLES, 3))
        return float(np.prod(hi - lo) * self.contains(points).mean())

    def check_inside(self, geometry: GridGeometry) -> None:
        lo, hi = self.bounds()
        if lo.min() < geometry.lower_margin or hi.max() > geometry.upper_margin:
            raise ValueError(
                f"Shape bounds {lo.tolist()} - {hi.tolist()} exceed the grid interior "
                f"[{geometry.lower_margin}, {geometry.upper_margin}]."
            )

    def _uniform_batches(self, rng: np.random.Generator, n: int, pad: float = 0.0):
        lo, hi = self.bounds()
        lo, hi = lo - pad, hi + pad
        batch = max(REJECTION_BATCH_MIN, 4 * n)
        for _ in range(MAX_REJECTION_ROUNDS):
            yield rng.uniform(lo, hi, size=(batch, 3))

    def sample_interior(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform samples inside the shape by rejection against the bounding box."""
        accepted, total = [], 0
        for points in self._uniform_batches(rng, n):
            inside = points[self.contains(points)]
            if total == 0 and inside.shape[0] == 0:
                raise EmptyShapeError(f"{type(self).__name__} has no interior.")
            accepted.append(inside)
            total += inside.shape[0]
            if total >= n:
                break
        if total < n:
            raise EmptyShapeError(f"Could only sample {total} of {n} interior points.")
        return np.concatenate(accepted)[:n]

    def sdf_gradient(self, points: np.ndarray) -> np.ndarray:
        h = 1e-6 * max(float(self.extent.max()), 1e-3)
        grad = np.empty_like(points)
        for axis in range(3):
            step = np.zeros(3)
            step[axis] = h
            grad[:, axis] = (self.sdf(points + step) - self.sdf(points - step)) / (2 * h)
        return grad

    def project(self, points: np.ndarray) -> np.ndarray:
        for _ in range(PROJECTION_ITERATIONS):
            grad = self.sdf_gradient(points)
            norm = np.maximum(np.linalg.norm(grad, axis=-1, keepdims=True), 1e-12)
            points = points - self.sdf(points)[:, None] * grad / norm
        return points

    def sample_surface(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Roughly area-weighted: uniform points in a thin band, projected on the surface."""
        extent = self.extent
        if extent.min() <= 0:
            raise EmptyShapeError(f"{type(self).__name__} has no surface.")
        band = 0.02 * float(extent.min())
        accepted, total = [], 0
        for points in self._uniform_batches(rng, 8 * n, pad=band):
            near = points[np.abs(self.sdf(points)) < band]
            accepted.append(near)
            total += near.shape[0]
            if total >= n:
                break
        if total < n:
            raise EmptyShapeError(f"Could only sample {total} of {n} surface points.")
        return self.project(np.concatenate(accepted)[:n])


class Sphere(Shape):
    def __init__(self, center, radius: float):
        super().__init__(center)
        self.radius = radius

    def local_sdf(self, p):
        return np.linalg.norm(p, axis=-1) - self.radius

    def local_bounds(self):
        return np.full(3, -self.radius), np.full(3, self.radius)

    def analytic_volume(self):
        return 4.0 / 3.0 * math.pi * self.radius**3

    def sample_surface(self, n, rng):
        if self.radius <= 0:
            raise EmptyShapeError("Sphere has no surface.")
        directions = rng.normal(size=(n, 3))
        directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
        return self.center + self.radius * directions


class Box(Shape):
    def __init__(self, center, half_extents):
        super().__init__(center)
        self.half = np.asarray(half_extents, dtype=np.float64)

    def local_sdf(self, p):
        return _box_sdf(p, self.half)

    def local_bounds(self):
        return -self.half, self.half.copy()

    def analytic_volume(self):
        return float(np.prod(2 * self.half))

    def sample_surface(self, n, rng):
        if self.half.min() <= 0:
            raise EmptyShapeError("Box has no surface.")
        # Face pairs normal to x, y and z, picked by area.
        h = self.half
        areas = np.array([h[1] * h[2], h[0] * h[2], h[0] * h[1]])
        axis = rng.choice(3, size=n, p=areas / areas.sum())
        side = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        points = rng.uniform(-h, h, size=(n, 3))
        points[np.arange(n), axis] = side * h[axis]
        return self.center + points


class Cylinder(Shape):
    """Axis along z."""

    def __init__(self, center, radius: float, height: float):
        super().__init__(center)
        self.radius, self.height = radius, height

    def local_sdf(self, p):
        return _cylinder_sdf(p, self.radius, self.height)

    def local_bounds(self):
        half = np.array([self.radius, self.radius, 0.5 * self.height])
        return -half, half

    def analytic_volume(self):
        return math.pi * self.radius**2 * self.height

    def sample_surface(self, n, rng):
        if self.radius <= 0 or self.height <= 0:
            raise EmptyShapeError("Cylinder has no surface.")
        side_area = 2 * math.pi * self.radius * self.height
        cap_area = 2 * math.pi * self.radius**2
        on_side = rng.random(n) < side_area / (side_area + cap_area)
        theta = rng.uniform(0.0, 2 * math.pi, size=n)
        # sqrt keeps cap points uniform over the disk
        rho = np.where(on_side, self.radius, self.radius * np.sqrt(rng.random(n)))
        cap = np.where(rng.random(n) < 0.5, -0.5, 0.5) * self.height
        z = np.where(on_side, rng.uniform(-0.5, 0.5, size=n) * self.height, cap)
        points = np.stack([rho * np.cos(theta), rho * np.sin(theta), z], axis=-1)
        return self.center + points


class Torus(Shape):
    """Ring in the xy plane."""

    def __init__(self, center, major: float, minor: float):
        super().__init__(center)
        self.major, self.minor = major, minor

    def local_sdf(self, p):
        q = np.stack([np.linalg.norm(p[..., :2], axis=-1) - self.major, p[..., 2]], -1)
        return np.linalg.norm(q, axis=-1) - self.minor

    def local_bounds(self):
        reach = self.major + self.minor
        half = np.array([reach, reach, self.minor])
        return -half, half

    def analytic_volume(self):
        return 2.0 * math.pi**2 * self.major * self.minor**2


class Capsule(Shape):
    """Segment from z=-height/2 to z=height/2, swept by a sphere."""

    def __init__(self, center, radius: float, height: float):
        super().__init__(center)
        self.radius, self.height = radius, height

    def local_sdf(self, p):
        axis = np.zeros_like(p)
        axis[..., 2] = np.clip(p[..., 2], -0.5 * self.height, 0.5 * self.height)
        return np.linalg.norm(p - axis, axis=-1) - self.radius

    def local_bounds(self):
        half = np.array([self.radius, self.radius, 0.5 * self.height + self.radius])
        return -half, half

    def analytic_volume(self):
        return math.pi * self.radius**2 * self.height + 4.0 / 3.0 * math.pi * self.radius**3


class Heart(Shape):
    """Two spherical lobes over a diamond (a box turned 45 degrees about y)."""

    def __init__(self, center, size: float):
        super().__init__(center)
        self.size = size
        s = size
        self.lobes = [np.array([-0.5 * s, 0.0, 0.3 * s]), np.array([0.5 * s, 0.0, 0.3 * s])]
        self.lobe_radius = 0.55 * s
        self.diamond_center = np.array([0.0, 0.0, -0.15 * s])
        self.diamond_half = np.array([0.6 * s, 0.45 * s, 0.6 * s])
        c = math.cos(math.pi / 4)
        self.rotation = np.array([[c, 0.0, -c], [0.0, 1.0, 0.0], [c, 0.0, c]])

    def local_sdf(self, p):
        lobes = [np.linalg.norm(p - c, axis=-1) - self.lobe_radius for c in self.lobes]
        diamond = _box_sdf((p - self.diamond_center) @ self.rotation.T, self.diamond_half)
        return np.minimum(np.minimum(*lobes), diamond)

    def local_bounds(self):
        s = self.size
        return np.array([-1.05 * s, -0.55 * s, -1.0 * s]), np.array([1.05 * s, 0.55 * s, 0.85 * s])


class Pillar(Shape):
    """A cylindrical shaft between a square base and a square capital."""

    def __init__(self, center, radius: float, height: float):
        super().__init__(center)
        self.radius, self.height = radius, height
        self.slab_half = np.array([0.8 * radius, 0.8 * radius, 0.1 * height])
        self.slab_offset = 0.4 * height

    def local_sdf(self, p):
        shaft = _cylinder_sdf(p, 0.45 * self.radius, self.height)
        offset = np.array([0.0, 0.0, self.slab_offset])
        base = _box_sdf(p + offset, self.slab_half)
        capital = _box_sdf(p - offset, self.slab_half)
        return np.minimum(shaft, np.minimum(base, capital))

    def local_bounds(self):
        half = np.array([0.8 * self.radius, 0.8 * self.radius, 0.5 * self.height])
        return -half, half


def make_shape(spec: ShapeSpec, spacing: float = 1.0) -> Shape:
    """Build the shape described by `spec`; meshes are voxelized at `spacing`."""
    if spec.kind == ShapeKind.sphere:
        return Sphere(spec.center, spec.radius)
    if spec.kind == ShapeKind.box:
        return Box(spec.center, spec.half_extents)
    if spec.kind == ShapeKind.cylinder:
        return Cylinder(spec.center, spec.radius, spec.height)
    if spec.kind == ShapeKind.torus:
        return Torus(spec.center, spec.radius, spec.minor_radius)
    if spec.kind == ShapeKind.capsule:
        return Capsule(spec.center, spec.radius, spec.height)
    if spec.kind == ShapeKind.heart:
        return Heart(spec.center, spec.radius)
    if spec.kind == ShapeKind.pillar:
        return Pillar(spec.center, spec.radius, spec.height)
    if spec.kind == ShapeKind.mesh:
        from physmorph.scene.mesh import MeshShape

        return MeshShape.from_obj(spec.path, spec.center, spec.scale, spacing)
    raise ValueError(f"Unknown shape kind {spec.kind}.")
