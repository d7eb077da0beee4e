import numpy as np
import pytest
import torch

from physmorph.linalg import (
    clamped_stretch_squared,
    cofactor,
    polar_decompose,
    soft_clamp_singular,
    soft_clamp_singular_grad,
    svd3,
)
from tests.utils import random_deformation, random_rotation


def test_svd_reconstruction(rng):
    m = random_deformation(rng, 50, spread=0.5)
    svd = svd3(m)
    assert torch.allclose(svd.reconstruct(), m, atol=1e-12)
    assert bool((svd.sigma[:, :-1] >= svd.sigma[:, 1:]).all())
    eye = torch.eye(3, dtype=torch.float64).expand(50, 3, 3)
    assert torch.allclose(svd.u.transpose(-1, -2) @ svd.u, eye, atol=1e-12)
    assert torch.allclose(svd.v.transpose(-1, -2) @ svd.v, eye, atol=1e-12)


def test_svd_rejects_non_finite():
    m = torch.eye(3, dtype=torch.float64)
    m[0, 0] = float("nan")
    with pytest.raises(ValueError):
        svd3(m)


def test_cofactor(rng):
    m = random_deformation(rng, 20, spread=0.3)
    expected = torch.det(m)[:, None, None] * torch.linalg.inv(m).transpose(-1, -2)
    assert torch.allclose(cofactor(m), expected, atol=1e-12)
    # Defined for singular matrices as well.
    singular = torch.zeros(3, 3, dtype=torch.float64)
    singular[0, 0] = 1.0
    assert torch.equal(cofactor(singular), torch.zeros(3, 3, dtype=torch.float64))


def test_polar_properties(rng):
    f = random_deformation(rng, 50, spread=0.3)
    r, s = polar_decompose(f)
    eye = torch.eye(3, dtype=torch.float64).expand(50, 3, 3)
    assert torch.allclose(r @ s, f, atol=1e-12)
    assert torch.allclose(r.transpose(-1, -2) @ r, eye, atol=1e-12)
    assert torch.allclose(torch.det(r), torch.ones(50, dtype=torch.float64), atol=1e-12)
    assert torch.allclose(s, s.transpose(-1, -2), atol=1e-12)


def test_polar_inverted_element(rng):
    f = torch.diag(torch.tensor([1.5, 1.0, -0.5], dtype=torch.float64))
    rotation = random_rotation(rng)
    r, s = polar_decompose(rotation @ f)
    assert float(torch.det(r)) == pytest.approx(1.0, abs=1e-12)
    assert torch.allclose(r @ s, rotation @ f, atol=1e-12)
    # The flipped singular value makes s indefinite.
    assert float(torch.linalg.eigvalsh(s).min()) == pytest.approx(-0.5, abs=1e-12)


def test_polar_identity():
    r, s = polar_decompose(torch.eye(3, dtype=torch.float64))
    assert torch.allclose(r, torch.eye(3, dtype=torch.float64), atol=1e-14)
    assert torch.allclose(s, torch.eye(3, dtype=torch.float64), atol=1e-14)


def test_soft_clamp():
    sigma = torch.tensor([0.01, 0.35, 1.0, 2.5, 10.0], dtype=torch.float64)
    clamped = soft_clamp_singular(sigma)
    assert bool((clamped >= 0.35 - 1e-12).all())
    assert bool((clamped <= 2.5 + 1e-12).all())
    # Identity well inside the bounds.
    assert float(clamped[2]) == pytest.approx(1.0, abs=1e-6)
    assert bool((clamped[1:] >= clamped[:-1]).all())
    with pytest.raises(ValueError):
        soft_clamp_singular(sigma, 2.0, 1.0)


def test_soft_clamp_grad(rng):
    sigma = torch.as_tensor(rng.uniform(0.1, 3.0, size=40)).requires_grad_(True)
    (grad,) = torch.autograd.grad(soft_clamp_singular(sigma).sum(), sigma)
    assert torch.allclose(grad, soft_clamp_singular_grad(sigma.detach()), atol=1e-12)


def test_clamped_stretch_squared(rng):
    rotation = random_rotation(rng, 10)
    sigma = torch.as_tensor(rng.uniform(0.1, 4.0, size=(10, 3)))
    s = rotation @ torch.diag_embed(sigma) @ rotation.transpose(-1, -2)
    expected = (
        rotation
        @ torch.diag_embed(soft_clamp_singular(sigma) ** 2)
        @ rotation.transpose(-1, -2)
    )
    assert torch.allclose(clamped_stretch_squared(s), expected, atol=1e-10)
