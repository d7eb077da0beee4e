"""Quadratic B-spline particle/grid transfers of MLS-MPM."""
import functools
from typing import List, Optional, Tuple

import structlog
import torch

from physmorph.config import SimulationOptions
from physmorph.mpm.constitutive import apply_control, compute_stress
from physmorph.types import (
    MARGIN_CELLS,
    GridGeometry,
    GridState,
    IndexTensor,
    ParticleState,
    PhysMorphModel,
    Tensor,
)
from physmorph.utils.parallel import chunk_ranges, ordered_map

log = structlog.get_logger(__name__)

# Fixed chunking keeps the summation order independent of the worker count.
PARTICLE_CHUNK = 4096
# Nodes this close to the boundary are sticky.
BOUNDARY_NODES = 2
# Round-off allowed on the margin check, in cells.
MARGIN_TOLERANCE = 1e-9

_OFFSETS = torch.tensor(
    [(i, j, k) for i in range(3) for j in range(3) for k in range(3)], dtype=torch.int64
)


class ParticleOutsideMarginError(ValueError):
    def __init__(self, index: int, position):
        super().__init__(f"Particle {index} at {position} is outside the grid interior margin.")
        self.index = index


class Stencil(PhysMorphModel):
    """27 neighbor nodes per particle: flat node index, weight and offset x_i - x_p (world)."""

    nodes: IndexTensor
    weights: Tensor
    offsets: Tensor


def bspline_weights(fx: torch.Tensor) -> torch.Tensor:
    """(N, 3) fractional positions to (N, 3 axes, 3 nodes) weights."""
    return torch.stack([0.5 * (1.5 - fx) ** 2, 0.75 - (fx - 1.0) ** 2, 0.5 * (fx - 0.5) ** 2], -1)


def stencil(x: torch.Tensor, geometry: GridGeometry) -> Stencil:
    xg = geometry.to_grid(x)
    base = torch.floor(xg.detach() - 0.5)
    fx = xg - base
    w = bspline_weights(fx)
    weights = w[:, 0, _OFFSETS[:, 0]] * w[:, 1, _OFFSETS[:, 1]] * w[:, 2, _OFFSETS[:, 2]]
    node = base.to(torch.int64)[:, None, :] + _OFFSETS[None]
    r = geometry.resolution
    flat = (node[..., 0] * r + node[..., 1]) * r + node[..., 2]
    offsets = (_OFFSETS[None].to(x.dtype) - fx[:, None, :]) * geometry.dx
    return Stencil(nodes=flat, weights=weights, offsets=offsets)


def check_margin(x: torch.Tensor, geometry: GridGeometry) -> None:
    xg = geometry.to_grid(x.detach())
    lo, hi = MARGIN_CELLS - MARGIN_TOLERANCE, geometry.resolution - MARGIN_CELLS + MARGIN_TOLERANCE
    outside = ((xg < lo) | (xg > hi)).any(dim=-1)
    if bool(outside.any()):
        index = int(torch.nonzero(outside)[0, 0])
        raise ParticleOutsideMarginError(index, x[index].detach().tolist())


def _sum_in_order(parts: List[torch.Tensor]) -> torch.Tensor:
    return functools.reduce(lambda a, b: a + b, parts)


def deposit_mass(x: torch.Tensor, mass: torch.Tensor, geometry: GridGeometry) -> torch.Tensor:
    """Scatter particle masses on the lattice with the transfer kernel, flat (R³,) result."""
    check_margin(x, geometry)

    def deposit(chunk: range) -> torch.Tensor:
        sl = slice(chunk.start, chunk.stop)
        st = stencil(x[sl], geometry)
        values = (st.weights * mass[sl, None]).reshape(-1)
        return torch.zeros(geometry.node_count, dtype=x.dtype).index_add(
            0, st.nodes.reshape(-1), values
        )

    return _sum_in_order(ordered_map(deposit, chunk_ranges(x.shape[0], PARTICLE_CHUNK)))


def p2g(particles: ParticleState, params: SimulationOptions, geometry: GridGeometry) -> GridState:
    """Scatter mass and APIC momentum, with the MLS stress impulse fused in."""
    check_margin(particles.x, geometry)
    dx, dt = geometry.dx, params.dt

    def scatter(chunk: range) -> Tuple[torch.Tensor, torch.Tensor]:
        sl = slice(chunk.start, chunk.stop)
        x, v, C, F = (field[sl] for field in particles.differentiable())
        mass = particles.mass[sl]
        st = stencil(x, geometry)
        stress = compute_stress(F, params.lame_mu, params.lame_lambda)
        volume = mass / params.density
        affine = (-dt * 4.0 / dx**2 * volume)[:, None, None] * (stress @ F.transpose(-1, -2))
        affine = affine + mass[:, None, None] * C
        contribution = st.weights[..., None] * (
            (mass[:, None] * v)[:, None, :] + torch.einsum("nij,nkj->nki", affine, st.offsets)
        )
        nodes = st.nodes.reshape(-1)
        grid_mass = torch.zeros(geometry.node_count, dtype=x.dtype).index_add(
            0, nodes, (st.weights * mass[:, None]).reshape(-1)
        )
        grid_momentum = torch.zeros(geometry.node_count, 3, dtype=x.dtype).index_add(
            0, nodes, contribution.reshape(-1, 3)
        )
        return grid_mass, grid_momentum

    parts = ordered_map(scatter, chunk_ranges(particles.count, PARTICLE_CHUNK))
    return GridState(
        geometry=geometry,
        mass=_sum_in_order([m for m, _ in parts]),
        momentum=_sum_in_order([p for _, p in parts]),
    )


@functools.lru_cache(maxsize=8)
def boundary_mask(resolution: int) -> torch.Tensor:
    idx = torch.arange(resolution)
    edge = (idx < BOUNDARY_NODES) | (idx >= resolution - BOUNDARY_NODES)
    mask = edge[:, None, None] | edge[None, :, None] | edge[None, None, :]
    return mask.reshape(-1)


def grid_update(grid: GridState, params: SimulationOptions) -> GridState:
    """Momentum to velocity, drag, external force, sticky boundary."""
    occupied = grid.mass > 0
    safe_mass = torch.where(occupied, grid.mass, torch.ones_like(grid.mass))
    velocity = torch.where(
        occupied[:, None], grid.momentum / safe_mass[:, None], torch.zeros_like(grid.momentum)
    )
    force = torch.as_tensor(params.external_force, dtype=velocity.dtype)
    velocity = velocity * (1.0 - params.drag * params.dt) + params.dt * force * occupied[:, None]
    interior = ~boundary_mask(grid.geometry.resolution)
    velocity = velocity * interior[:, None].to(velocity.dtype)
    return GridState(
        geometry=grid.geometry, mass=grid.mass, momentum=grid.momentum, velocity=velocity
    )


def clamp_to_margin(x: torch.Tensor, geometry: GridGeometry) -> torch.Tensor:
    lo, hi = geometry.lower_margin, geometry.upper_margin
    outside = ((x < lo) | (x > hi)).any(dim=-1)
    if bool(outside.any()):
        log.warning("Particles advected outside the margin were clamped.", count=int(outside.sum()))
    return torch.clamp(x, min=lo, max=hi)


def g2p(
    grid: GridState,
    particles: ParticleState,
    params: SimulationOptions,
    control: Optional[torch.Tensor] = None,
) -> ParticleState:
    """Gather velocity and affine field, advect, and update F with the step's control."""
    if grid.velocity is None:
        raise ValueError("g2p requires an updated grid, call grid_update first.")
    geometry = grid.geometry
    dx, dt = geometry.dx, params.dt

    def gather(chunk: range) -> Tuple[torch.Tensor, torch.Tensor]:
        sl = slice(chunk.start, chunk.stop)
        st = stencil(particles.x[sl], geometry)
        weighted = st.weights[..., None] * grid.velocity[st.nodes]
        v = weighted.sum(dim=1)
        C = 4.0 / dx**2 * torch.einsum("nki,nkj->nij", weighted, st.offsets)
        return v, C

    parts = ordered_map(gather, chunk_ranges(particles.count, PARTICLE_CHUNK))
    v = torch.cat([p[0] for p in parts])
    C = torch.cat([p[1] for p in parts])
    x = clamp_to_margin(particles.x + dt * v, geometry)
    if control is None:
        control = torch.zeros_like(particles.F)
    F = apply_control(particles.F, control, C, dt)
    return ParticleState(x=x, v=v, C=C, F=F, mass=particles.mass)
