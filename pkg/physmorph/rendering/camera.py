"""Pinhole projection of 3D Gaussians to the image plane."""
import torch

from physmorph.types import CameraModel, PhysMorphModel, Tensor

# Added to the diagonal of every screen-space covariance, in pixels².
SCREEN_COVARIANCE_FLOOR = 0.3


class Projection(PhysMorphModel):
    means2d: Tensor
    covariances2d: Tensor
    depth: Tensor
    valid: Tensor


def to_camera(means: torch.Tensor, camera: CameraModel) -> torch.Tensor:
    return means @ camera.view_rotation().T + camera.view_translation()


def project(means: torch.Tensor, covariances: torch.Tensor, camera: CameraModel) -> Projection:
    """Screen means, EWA screen covariances and camera depth.

    Gaussians outside (near, far) are flagged invalid; their entries are finite but meaningless.
    """
    rotation = camera.view_rotation()
    points = to_camera(means, camera)
    z = points[:, 2]
    valid = (z > camera.near) & (z < camera.far)
    z_safe = torch.where(valid, z, torch.ones_like(z))
    u = camera.fx * points[:, 0] / z_safe + camera.cx
    v = camera.fy * points[:, 1] / z_safe + camera.cy
    zero = torch.zeros_like(z)
    jacobian = torch.stack(
        [
            torch.stack([camera.fx / z_safe, zero, -camera.fx * points[:, 0] / z_safe**2], -1),
            torch.stack([zero, camera.fy / z_safe, -camera.fy * points[:, 1] / z_safe**2], -1),
        ],
        dim=-2,
    )
    transform = jacobian @ rotation
    covariances2d = transform @ covariances @ transform.transpose(-1, -2)
    covariances2d = covariances2d + SCREEN_COVARIANCE_FLOOR * torch.eye(2, dtype=means.dtype)
    return Projection(
        means2d=torch.stack([u, v], -1), covariances2d=covariances2d, depth=z, valid=valid
    )
