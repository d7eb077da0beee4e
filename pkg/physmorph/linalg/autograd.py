import structlog
import torch

from physmorph.linalg.core import Svd3, SvdGradient, svd_backward, transpose

log = structlog.get_logger(__name__)

# Floor on |sigma_i + sigma_j| in the polar backward pass.
POLAR_PAIR_FLOOR = 1e-12
# Eigenvalue gaps below this use the derivative instead of a divided difference.
EIGEN_GAP_FLOOR = 1e-9


class Svd3Function(torch.autograd.Function):
    @staticmethod
    def forward(ctx, m):
        u, sigma, vh = torch.linalg.svd(m)
        v = transpose(vh)
        ctx.save_for_backward(u, sigma, v)
        return u, sigma, v

    @staticmethod
    def backward(ctx, grad_u, grad_sigma, grad_v):
        u, sigma, v = ctx.saved_tensors
        grad = SvdGradient(
            u=torch.zeros_like(u) if grad_u is None else grad_u,
            sigma=torch.zeros_like(sigma) if grad_sigma is None else grad_sigma,
            v=torch.zeros_like(v) if grad_v is None else grad_v,
        )
        return svd_backward(Svd3(u=u, sigma=sigma, v=v), grad)


class PolarFunction(torch.autograd.Function):
    """Polar decomposition whose backward pass stays exact at repeated singular values.

    With f = r s, the rotation derivative solves s X + X s = r^T df - df^T r, which in the
    eigenbasis of s divides by sigma_i + sigma_j instead of sigma_i² - sigma_j².
    """

    @staticmethod
    def forward(ctx, f):
        u, sigma, vh = torch.linalg.svd(f)
        flip = torch.det(u @ vh) < 0
        if bool(flip.any()):
            log.debug("Inverted elements in polar decomposition.", count=int(flip.sum()))
            sign = torch.where(flip, -1.0, 1.0).to(f.dtype)
            u = u.clone()
            sigma = sigma.clone()
            u[..., :, 2] = u[..., :, 2] * sign[..., None]
            sigma[..., 2] = sigma[..., 2] * sign
        v = transpose(vh)
        r = u @ vh
        s = v @ torch.diag_embed(sigma) @ vh
        ctx.save_for_backward(r, s, v, sigma)
        return r, s

    @staticmethod
    def backward(ctx, grad_r, grad_s):
        r, s, v, sigma = ctx.saved_tensors
        if grad_r is None:
            grad_r = torch.zeros_like(r)
        if grad_s is None:
            grad_s = torch.zeros_like(s)
        m = transpose(r) @ grad_r - grad_s @ s
        pair = sigma[..., :, None] + sigma[..., None, :]
        pair = torch.where(
            pair.abs() < POLAR_PAIR_FLOOR,
            torch.full_like(pair, POLAR_PAIR_FLOOR) * torch.where(pair < 0, -1.0, 1.0),
            pair,
        )
        z = v @ ((transpose(v) @ m @ v) / pair) @ transpose(v)
        return r @ (grad_s + z - transpose(z))


class SymmetricMatrixFunction(torch.autograd.Function):
    """h(s) = Q diag(h(lambda)) Q^T for symmetric s, with divided differences in backward.

    Coincident eigenvalues use the derivative of h, so the gradient is exact at s = c I.
    """

    @staticmethod
    def forward(ctx, s, fn, fn_grad):
        sym = 0.5 * (s + transpose(s))
        lam, q = torch.linalg.eigh(sym)
        h = fn(lam)
        ctx.save_for_backward(q, lam, h, fn_grad(lam))
        return q @ torch.diag_embed(h) @ transpose(q)

    @staticmethod
    def backward(ctx, grad):
        q, lam, h, dh = ctx.saved_tensors
        grad_sym = 0.5 * (grad + transpose(grad))
        diff = lam[..., :, None] - lam[..., None, :]
        close = diff.abs() < EIGEN_GAP_FLOOR
        quotient = (h[..., :, None] - h[..., None, :]) / torch.where(
            close, torch.ones_like(diff), diff
        )
        divided = torch.where(close, 0.5 * (dh[..., :, None] + dh[..., None, :]), quotient)
        return q @ (divided * (transpose(q) @ grad_sym @ q)) @ transpose(q), None, None
