"""Batched 3x3 matrix algebra. Every function accepts tensors of shape (..., 3, 3)."""
import structlog
import torch
import torch.nn.functional as nnf

from physmorph.types.general.array_type import Tensor
from physmorph.types.general.base_model import PhysMorphModel
from physmorph.utils.validation import assert_finite

log = structlog.get_logger(__name__)

# Regularizer of 1 / (sigma_j² - sigma_i²) in the SVD gradient.
SVD_GAP_EPSILON = 1e-6
SOFT_CLAMP_SHARPNESS = 20.0
DEFAULT_CLAMP = (0.35, 2.5)


class Svd3(PhysMorphModel):
    """m = u @ diag(sigma) @ v.T, sigma sorted descending."""

    u: Tensor
    sigma: Tensor
    v: Tensor

    def reconstruct(self) -> torch.Tensor:
        return self.u @ torch.diag_embed(self.sigma) @ self.v.transpose(-1, -2)


class SvdGradient(PhysMorphModel):
    u: Tensor
    sigma: Tensor
    v: Tensor


def transpose(m: torch.Tensor) -> torch.Tensor:
    return m.transpose(-1, -2)


def identity_like(m: torch.Tensor) -> torch.Tensor:
    return torch.eye(3, dtype=m.dtype).expand(m.shape).clone()


def cofactor(m: torch.Tensor) -> torch.Tensor:
    """Cofactor matrix, equal to det(m) * m^{-T} and defined for singular m as well."""
    c0, c1, c2 = m[..., :, 0], m[..., :, 1], m[..., :, 2]
    return torch.stack(
        [torch.cross(c1, c2, dim=-1), torch.cross(c2, c0, dim=-1), torch.cross(c0, c1, dim=-1)],
        dim=-1,
    )


def svd3(m: torch.Tensor) -> Svd3:
    """Differentiable SVD; the backward pass is `svd_backward`."""
    assert_finite("svd3 input", m)
    from physmorph.linalg.autograd import Svd3Function

    u, sigma, v = Svd3Function.apply(m)
    return Svd3(u=u, sigma=sigma, v=v)


def svd_backward(svd: Svd3, grad: SvdGradient) -> torch.Tensor:
    """dL/dm from dL/d(u, sigma, v).

    The 1 / (sigma_j² - sigma_i²) factors are replaced by d / (d² + eps²) so repeated singular
    values give a bounded gradient.
    """
    u, sigma, v = svd.u, svd.sigma, svd.v
    s2 = sigma**2
    gap = s2[..., None, :] - s2[..., :, None]
    f = gap / (gap**2 + SVD_GAP_EPSILON**2)
    j = transpose(u) @ grad.u
    k = transpose(v) @ grad.v
    s = torch.diag_embed(sigma)
    inner = (
        torch.diag_embed(grad.sigma)
        + (f * (j - transpose(j))) @ s
        + s @ (f * (k - transpose(k)))
    )
    return u @ inner @ transpose(v)


def polar_decompose(f: torch.Tensor):
    """Return (r, s) with f = r @ s, det(r) = +1 and s symmetric.

    Inverted elements (det(f) <= 0) flip the smallest singular value, so s is then indefinite.
    """
    assert_finite("polar_decompose input", f)
    from physmorph.linalg.autograd import PolarFunction

    return PolarFunction.apply(f)


def soft_clamp_singular(
    sigma: torch.Tensor,
    lo: float = DEFAULT_CLAMP[0],
    hi: float = DEFAULT_CLAMP[1],
    sharpness: float = SOFT_CLAMP_SHARPNESS,
) -> torch.Tensor:
    """Smooth max with `lo` followed by a smooth min with `hi`."""
    if lo >= hi:
        raise ValueError(f"Soft clamp bounds must satisfy lo < hi, got [{lo}, {hi}].")
    raised = lo + nnf.softplus(sigma - lo, beta=sharpness)
    return hi - nnf.softplus(hi - raised, beta=sharpness)


def soft_clamp_singular_grad(
    sigma: torch.Tensor,
    lo: float = DEFAULT_CLAMP[0],
    hi: float = DEFAULT_CLAMP[1],
    sharpness: float = SOFT_CLAMP_SHARPNESS,
) -> torch.Tensor:
    """Derivative of `soft_clamp_singular` with respect to sigma."""
    raised = lo + nnf.softplus(sigma - lo, beta=sharpness)
    return torch.sigmoid(sharpness * (sigma - lo)) * torch.sigmoid(sharpness * (hi - raised))


def clamped_stretch_squared(
    s: torch.Tensor,
    lo: float = DEFAULT_CLAMP[0],
    hi: float = DEFAULT_CLAMP[1],
    sharpness: float = SOFT_CLAMP_SHARPNESS,
) -> torch.Tensor:
    """V diag(c(sigma)²) V^T for a symmetric stretch s = V diag(sigma) V^T, c the soft clamp."""
    if lo >= hi:
        raise ValueError(f"Soft clamp bounds must satisfy lo < hi, got [{lo}, {hi}].")
    from physmorph.linalg.autograd import SymmetricMatrixFunction

    def squared(sigma):
        return soft_clamp_singular(sigma, lo, hi, sharpness) ** 2

    def squared_grad(sigma):
        clamped = soft_clamp_singular(sigma, lo, hi, sharpness)
        return 2.0 * clamped * soft_clamp_singular_grad(sigma, lo, hi, sharpness)

    return SymmetricMatrixFunction.apply(s, squared, squared_grad)
