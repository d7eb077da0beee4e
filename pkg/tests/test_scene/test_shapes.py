import math

import numpy as np
import pytest

from physmorph.config import ShapeKind, ShapeSpec
from physmorph.scene import (
    Box,
    Capsule,
    Cylinder,
    EmptyShapeError,
    Heart,
    Pillar,
    Sphere,
    Torus,
    init_particles,
    make_shape,
)
from physmorph.types import GridGeometry


def test_analytic_volumes():
    assert Sphere((0, 0, 0), 2.0).volume == pytest.approx(4 / 3 * math.pi * 8)
    assert Box((1, 1, 1), (1.0, 2.0, 0.5)).volume == pytest.approx(8.0)
    assert Cylinder((0, 0, 0), 1.0, 2.0).volume == pytest.approx(2 * math.pi)
    assert Torus((0, 0, 0), 2.0, 0.5).volume == pytest.approx(2 * math.pi**2 * 2.0 * 0.25)


def test_estimated_volume_matches_analytic():
    capsule = Capsule((0, 0, 0), 1.0, 2.0)
    analytic = capsule.volume
    capsule.analytic_volume = lambda: None
    del capsule.__dict__["volume"]
    assert capsule.volume == pytest.approx(analytic, rel=0.02)


def test_contains():
    sphere = Sphere((1.0, 0.0, 0.0), 1.0)
    assert sphere.contains(np.array([[1.0, 0.0, 0.0], [1.5, 0.5, 0.0]])).all()
    assert not sphere.contains(np.array([[2.5, 0.0, 0.0]])).any()
    box = Box((0, 0, 0), (1.0, 1.0, 1.0))
    assert box.sdf(np.array([[0.0, 0.0, 0.0]]))[0] == pytest.approx(-1.0)
    assert box.sdf(np.array([[3.0, 0.0, 0.0]]))[0] == pytest.approx(2.0)


@pytest.mark.parametrize(
    "shape",
    [
        Sphere((0, 0, 0), 2.0),
        Box((0, 0, 0), (1.0, 2.0, 1.5)),
        Torus((0, 0, 0), 2.0, 0.7),
        Heart((0, 0, 0), 2.0),
        Pillar((0, 0, 0), 2.0, 5.0),
    ],
)
def test_samples_stay_inside(shape, rng):
    interior = shape.sample_interior(500, rng)
    assert interior.shape == (500, 3)
    assert shape.contains(interior).all()
    lo, hi = shape.bounds()
    assert np.all(interior >= lo) and np.all(interior <= hi)
    surface = shape.sample_surface(200, rng)
    # Projection may leave points off the creases of composite shapes.
    assert np.abs(shape.sdf(surface)).max() < 0.05 * shape.extent.min()


def test_box_surface_is_area_weighted(rng):
    box = Box((0.5, -1.0, 2.0), (1.0, 2.0, 3.0))
    surface = box.sample_surface(12_000, rng)
    assert np.abs(box.sdf(surface)).max() < 1e-12
    local = np.abs(surface - box.center)
    on_face = np.isclose(local, box.half, rtol=0, atol=1e-12)
    assert (on_face.sum(axis=1) >= 1).all()
    # Face pair areas are 2*3, 1*3 and 1*2.
    fractions = on_face.mean(axis=0)
    assert fractions == pytest.approx(np.array([6.0, 3.0, 2.0]) / 11.0, abs=0.02)
    # Uniform within a face: the inner half of the x-faces holds half of their points.
    x_faces = local[on_face[:, 0]]
    assert (x_faces[:, 1] < 1.0).mean() == pytest.approx(0.5, abs=0.03)


def test_cylinder_surface_is_area_weighted(rng):
    cylinder = Cylinder((0, 0, 0), 1.0, 4.0)
    surface = cylinder.sample_surface(12_000, rng)
    assert np.abs(cylinder.sdf(surface)).max() < 1e-9
    on_cap = np.isclose(np.abs(surface[:, 2]), 2.0, rtol=0, atol=1e-12)
    assert on_cap.mean() == pytest.approx(2.0 / 10.0, abs=0.02)
    rho = np.linalg.norm(surface[on_cap, :2], axis=-1)
    assert (rho < math.sqrt(0.5)).mean() == pytest.approx(0.5, abs=0.04)


def test_empty_shape(rng):
    with pytest.raises(EmptyShapeError):
        Sphere((0, 0, 0), 0.0).sample_interior(10, rng)
    with pytest.raises(EmptyShapeError):
        Box((0, 0, 0), (1.0, 0.0, 1.0)).sample_surface(10, rng)


def test_check_inside():
    geometry = GridGeometry(resolution=16, dx=1.0)
    Sphere((0, 0, 0), 5.0).check_inside(geometry)
    with pytest.raises(ValueError):
        Sphere((0, 0, 0), 7.0).check_inside(geometry)
    with pytest.raises(ValueError):
        Sphere((3.0, 0, 0), 5.0).check_inside(geometry)


def test_make_shape():
    assert isinstance(make_shape(ShapeSpec()), Sphere)
    torus = make_shape(ShapeSpec(kind=ShapeKind.torus, radius=3.0, minor_radius=1.0))
    assert isinstance(torus, Torus)
    assert (torus.major, torus.minor) == (3.0, 1.0)
    box = make_shape(ShapeSpec(kind=ShapeKind.box, half_extents=(1.0, 2.0, 3.0)))
    assert np.allclose(box.extent, [2.0, 4.0, 6.0])


def test_init_particles(rng):
    sphere = Sphere((0, 0, 0), 3.0)
    state = init_particles(sphere, 1000, density=60.0, rng=rng)
    assert state.count == 1000
    assert state.total_mass == pytest.approx(60.0 * sphere.volume)
    assert np.all(state.v.numpy() == 0) and np.all(state.C.numpy() == 0)
    assert np.allclose(state.F.numpy(), np.eye(3))
    assert sphere.contains(state.x.numpy()).all()


def test_init_particles_rejects_bad_input(rng):
    with pytest.raises(ValueError):
        init_particles(Sphere((0, 0, 0), 1.0), 0, 1.0, rng)
    with pytest.raises(ValueError):
        init_particles(Sphere((0, 0, 0), 9.0), 10, 1.0, rng, GridGeometry(resolution=16, dx=1.0))
