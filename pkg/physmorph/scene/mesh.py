"""Wavefront OBJ ingestion and voxelization to a signed distance grid."""
from typing import Tuple

import numpy as np
import structlog
from scipy import ndimage

from physmorph.scene.shapes import EmptyShapeError, Shape

log = structlog.get_logger(__name__)

# Voxels per grid cell along each axis.
VOXELS_PER_CELL = 2
PAD_VOXELS = 3
# Offset of the parity rays, avoids rays grazing vertices and edges.
RAY_JITTER = 1.234567e-4


def load_obj(path: str) -> Tuple[np.ndarray, np.ndarray]:
    """Vertices (V, 3) and triangles (T, 3); polygons are fan-triangulated."""
    vertices, faces = [], []
    with open(path, "r") as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(value) for value in parts[1:4]])
            elif parts[0] == "f":
                indices = []
                for token in parts[1:]:
                    index = int(token.split("/")[0])
                    indices.append(index - 1 if index > 0 else len(vertices) + index)
                for i in range(1, len(indices) - 1):
                    faces.append([indices[0], indices[i], indices[i + 1]])
    if not vertices or not faces:
        raise EmptyShapeError(f"{path} holds no triangles.")
    return np.asarray(vertices, dtype=np.float64), np.asarray(faces, dtype=np.int64)


def is_watertight(vertices: np.ndarray, faces: np.ndarray) -> bool:
    """Every edge shared by exactly two triangles and Euler characteristic of a closed surface."""
    edges = np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1)
    unique, counts = np.unique(edges, axis=0, return_counts=True)
    used = np.unique(faces).shape[0]
    euler = used - unique.shape[0] + faces.shape[0]
    return bool(np.all(counts == 2)) and euler % 2 == 0 and euler <= 2


def triangle_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a, b, c = (vertices[faces[:, i]] for i in range(3))
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=-1)


def sample_triangles(
    vertices: np.ndarray, faces: np.ndarray, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform samples over the triangle soup, triangles picked proportionally to area."""
    areas = triangle_areas(vertices, faces)
    if areas.sum() <= 0:
        raise EmptyShapeError("Mesh has zero surface area.")
    chosen = rng.choice(faces.shape[0], size=n, p=areas / areas.sum())
    r1, r2 = rng.random(n), rng.random(n)
    root = np.sqrt(r1)
    a, b, c = (vertices[faces[chosen, i]] for i in range(3))
    return (1 - root)[:, None] * a + (root * (1 - r2))[:, None] * b + (root * r2)[:, None] * c


def voxelize(vertices: np.ndarray, faces: np.ndarray, spacing: float):
    """Inside/outside occupancy by ray parity along +x, plus the voxel grid origin."""
    lo = vertices.min(axis=0) - PAD_VOXELS * spacing
    hi = vertices.max(axis=0) + PAD_VOXELS * spacing
    shape = np.ceil((hi - lo) / spacing).astype(int) + 1
    xs = lo[0] + spacing * np.arange(shape[0])
    ys = lo[1] + spacing * (np.arange(shape[1]) + RAY_JITTER)
    zs = lo[2] + spacing * (np.arange(shape[2]) + RAY_JITTER)
    crossings = [[[] for _ in range(shape[2])] for _ in range(shape[1])]
    for tri in vertices[faces]:
        a, b, c = tri
        det = (b[1] - a[1]) * (c[2] - a[2]) - (c[1] - a[1]) * (b[2] - a[2])
        if abs(det) < 1e-15:
            continue
        j = np.nonzero((ys >= tri[:, 1].min()) & (ys <= tri[:, 1].max()))[0]
        k = np.nonzero((zs >= tri[:, 2].min()) & (zs <= tri[:, 2].max()))[0]
        if j.size == 0 or k.size == 0:
            continue
        jj, kk = np.meshgrid(j, k, indexing="ij")
        py, pz = ys[jj], zs[kk]
        u = ((py - a[1]) * (c[2] - a[2]) - (c[1] - a[1]) * (pz - a[2])) / det
        v = ((b[1] - a[1]) * (pz - a[2]) - (py - a[1]) * (b[2] - a[2])) / det
        hit = (u >= 0) & (v >= 0) & (u + v <= 1)
        x_hit = a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0])
        for row, col, x in zip(jj[hit], kk[hit], x_hit[hit]):
            crossings[row][col].append(x)
    occupancy = np.zeros(shape, dtype=bool)
    for row in range(shape[1]):
        for col in range(shape[2]):
            if crossings[row][col]:
                hits = np.sort(np.asarray(crossings[row][col]))
                beyond = hits.shape[0] - np.searchsorted(hits, xs, side="right")
                occupancy[:, row, col] = beyond % 2 == 1
    return occupancy, lo


class MeshShape(Shape):
    """Triangle mesh with a voxelized signed distance field, trilinearly interpolated."""

    def __init__(self, vertices: np.ndarray, faces: np.ndarray, spacing: float):
        lo, hi = vertices.min(axis=0), vertices.max(axis=0)
        super().__init__(0.5 * (lo + hi))
        self.vertices, self.faces = vertices, faces
        self.half = 0.5 * (hi - lo)
        if not is_watertight(vertices, faces):
            log.warning("Mesh is not watertight, inside/outside tests may be wrong.")
        self.spacing = spacing
        occupancy, self.grid_origin = voxelize(vertices, faces, spacing)
        if not occupancy.any():
            raise EmptyShapeError("Mesh voxelization is empty.")
        outside = ndimage.distance_transform_edt(~occupancy)
        inside = ndimage.distance_transform_edt(occupancy)
        self.field = spacing * (outside - inside)

    @classmethod
    def from_obj(cls, path: str, center, scale: float, cell_size: float) -> "MeshShape":
        vertices, faces = load_obj(path)
        vertices = vertices * scale + np.asarray(center, dtype=np.float64)
        log.info("Mesh loaded.", path=path, vertices=vertices.shape[0], triangles=faces.shape[0])
        return cls(vertices, faces, cell_size / VOXELS_PER_CELL)

    def local_sdf(self, p):
        world = p + self.center
        coords = ((world - self.grid_origin) / self.spacing).reshape(-1, 3).T
        values = ndimage.map_coordinates(self.field, coords, order=1, mode="nearest")
        # Beyond the voxel grid, add the distance to it.
        grid_hi = self.grid_origin + self.spacing * (np.asarray(self.field.shape) - 1)
        excess = np.linalg.norm(
            np.maximum(self.grid_origin - world, 0) + np.maximum(world - grid_hi, 0), axis=-1
        ).reshape(-1)
        return (values + excess).reshape(p.shape[:-1])

    def local_bounds(self):
        return -self.half, self.half.copy()

    def sample_surface(self, n, rng):
        return sample_triangles(self.vertices, self.faces, n, rng)
