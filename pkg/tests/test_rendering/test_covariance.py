import pytest
import torch

from physmorph.config import CovarianceOptions
from physmorph.rendering import anisotropy, build_covariance, covariance_backward
from tests.utils import central_difference, random_deformation, random_rotation, relative_error


def test_rotation_invariance(rng):
    F = random_deformation(rng, 30, spread=0.3)
    rotation = random_rotation(rng, 30)
    options = CovarianceOptions()
    assert torch.allclose(
        build_covariance(rotation @ F, 0.5, options), build_covariance(F, 0.5, options), atol=1e-9
    )


def _stress_deformations(rng, count):
    """Generic, inverted, near-singular and strongly stretched deformation gradients."""
    quarter = count // 4
    generic = random_deformation(rng, quarter, spread=1.5)
    flip = torch.diag(torch.tensor([1.0, 1.0, -1.0], dtype=torch.float64))
    inverted = random_deformation(rng, quarter, spread=0.3) @ flip
    sigma = torch.as_tensor(rng.uniform(0.1, 3.0, size=(quarter, 3)))
    sigma[:, 2] = torch.as_tensor(10.0 ** rng.uniform(-12, -6, size=quarter))
    singular = random_rotation(rng, quarter) @ torch.diag_embed(sigma) @ random_rotation(
        rng, quarter
    )
    stretched = random_rotation(rng, count - 3 * quarter) @ torch.diag_embed(
        torch.as_tensor(10.0 ** rng.uniform(-3, 2, size=(count - 3 * quarter, 3)))
    )
    return torch.cat([generic, inverted, singular, stretched])


def test_eigenvalue_bounds(rng):
    options = CovarianceOptions(clamp_min=0.35, clamp_max=2.5)
    F = _stress_deformations(rng, 10_000)
    assert F.shape == (10_000, 3, 3)
    assert bool((torch.det(F) < 0).any())
    scale = 0.1
    eigenvalues = torch.linalg.eigvalsh(build_covariance(F, scale, options))
    assert float(eigenvalues.min()) >= (scale * 0.35) ** 2 * (1.0 - 1e-3)
    assert float(eigenvalues.max()) <= (scale * 2.5) ** 2 * (1.0 + 1e-9)


def test_identity_gives_isotropic_splat():
    F = torch.eye(3, dtype=torch.float64).repeat(2, 1, 1)
    covariance = build_covariance(F, 0.2)
    assert torch.allclose(covariance, 0.04 * F, atol=1e-7)
    assert torch.allclose(anisotropy(covariance), torch.ones(2, dtype=torch.float64), atol=1e-6)


def test_per_gaussian_scale(rng):
    F = random_deformation(rng, 3, spread=0.1)
    scales = torch.tensor([0.1, 0.2, 0.3], dtype=torch.float64)
    batched = build_covariance(F, scales)
    for i in range(3):
        assert torch.allclose(batched[i], build_covariance(F[i : i + 1], float(scales[i]))[0])


def test_anisotropy():
    covariance = torch.diag(torch.tensor([4.0, 1.0, 1.0], dtype=torch.float64))
    assert float(anisotropy(covariance)) == pytest.approx(2.0)


def test_covariance_backward(rng):
    options = CovarianceOptions()
    F = random_deformation(rng, 5, spread=0.2)
    weights = torch.as_tensor(rng.normal(size=(5, 3, 3)))
    analytic = covariance_backward(F, 0.3, weights, options)

    def objective(m):
        return float((weights * build_covariance(m, 0.3, options)).sum())

    indices = list(range(F.numel()))
    numeric = central_difference(objective, F, indices, 1e-6)
    assert relative_error(analytic.reshape(-1), numeric) < 1e-5
