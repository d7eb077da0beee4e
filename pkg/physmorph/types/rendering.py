from typing import Optional, Tuple

import numpy as np
import torch

from physmorph.config import CameraOptions
from physmorph.types.general.array_type import Array, Tensor
from physmorph.types.general.base_model import PhysMorphModel


def _normalized(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


class CameraModel(PhysMorphModel):
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    near: float
    far: float
    eye: Tuple[float, float, float]
    target: Tuple[float, float, float]
    up: Tuple[float, float, float] = (0.0, 0.0, 1.0)

    @classmethod
    def from_options(cls, options: CameraOptions) -> "CameraModel":
        scale = options.resolution_scale
        return cls(
            fx=options.fx * scale,
            fy=options.fy * scale,
            cx=options.cx * scale,
            cy=options.cy * scale,
            width=max(1, int(round(options.width * scale))),
            height=max(1, int(round(options.height * scale))),
            near=options.near,
            far=options.far,
            eye=options.eye,
            target=options.target,
            up=options.up,
        )

    @property
    def pixel_count(self) -> int:
        return self.width * self.height

    def view_rotation(self) -> torch.Tensor:
        """World to camera rotation; camera x right, y down, z forward."""
        eye, target, up = (
            np.asarray(v, dtype=np.float64) for v in (self.eye, self.target, self.up)
        )
        forward = _normalized(target - eye)
        right = _normalized(np.cross(forward, up))
        true_up = np.cross(right, forward)
        return torch.as_tensor(np.stack([right, -true_up, forward]), dtype=torch.float64)

    def view_translation(self) -> torch.Tensor:
        eye = torch.as_tensor(self.eye, dtype=torch.float64)
        return -self.view_rotation() @ eye


class RenderGaussians(PhysMorphModel):
    """means (M, 3), covariances (M, 3, 3), opacities (M,), colors (M, 3)."""

    means: Tensor
    covariances: Tensor
    opacities: Tensor
    colors: Optional[Tensor] = None

    @property
    def count(self) -> int:
        return int(self.means.shape[0])


class RenderGraph:
    """Autograd handles kept by a forward render so the backward pass can reuse the graph."""

    def __init__(
        self,
        means: torch.Tensor,
        covariances: torch.Tensor,
        opacities: torch.Tensor,
        alpha: torch.Tensor,
        depth: torch.Tensor,
    ):
        self.means = means
        self.covariances = covariances
        self.opacities = opacities
        self.alpha = alpha
        self.depth = depth


class RenderTarget(PhysMorphModel):
    """Rendered channels.

    alpha and depth are (H, W) float64 tensors attached to `graph`; color, first-hit depth and
    per-Gaussian statistics are detached numpy arrays.
    """

    alpha: Tensor
    depth: Tensor
    color: Array[float]
    first_hit: Array[float]
    means2d: Array[float]
    contribution: Array[float]
    visibility: Array[float]
    near: float
    far: float
    graph: Optional[RenderGraph] = None

    @property
    def shape(self) -> Tuple[int, int]:
        return int(self.alpha.shape[0]), int(self.alpha.shape[1])


class TargetImages(PhysMorphModel):
    alpha: Tensor
    depth: Tensor


class VisibilityMask(PhysMorphModel):
    pixels: Array[bool]
    visible: Array[bool]
    mode: str

    @property
    def ratio(self) -> float:
        return float(self.pixels.mean()) if self.pixels.size else 0.0
