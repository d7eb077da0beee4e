import numpy as np
import torch

from physmorph.types import CameraModel

AMBIENT = 0.35
DIFFUSE = 0.55
SPECULAR = 0.25
SHININESS = 16.0


def phong_colors(
    means: torch.Tensor,
    covariances: torch.Tensor,
    base_color,
    light_direction,
    camera: CameraModel,
) -> np.ndarray:
    """Per-Gaussian directional Phong shading, normals along the minor covariance axis."""
    with torch.no_grad():
        _, vectors = torch.linalg.eigh(covariances)
        normals = vectors[..., :, 0].numpy()
        to_eye = np.asarray(camera.eye) - means.numpy()
    to_eye /= np.maximum(np.linalg.norm(to_eye, axis=-1, keepdims=True), 1e-12)
    # Minor axes have no orientation, face them to the camera.
    normals = normals * np.sign(np.sum(normals * to_eye, axis=-1, keepdims=True) + 1e-300)
    light = np.asarray(light_direction, dtype=np.float64)
    light /= np.linalg.norm(light)
    diffuse = np.clip(normals @ light, 0.0, None)
    reflected = 2.0 * (normals @ light)[:, None] * normals - light
    specular = np.clip(np.sum(reflected * to_eye, axis=-1), 0.0, None) ** SHININESS
    base = np.asarray(base_color, dtype=np.float64)
    colors = (AMBIENT + DIFFUSE * diffuse)[:, None] * base + (SPECULAR * specular)[:, None]
    return np.clip(colors, 0.0, 1.0)
