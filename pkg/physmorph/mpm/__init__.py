from physmorph.mpm.constitutive import apply_control, compute_stress, young_poisson_to_lame
from physmorph.mpm.transfer import (
    ParticleOutsideMarginError,
    Stencil,
    bspline_weights,
    deposit_mass,
    g2p,
    grid_update,
    p2g,
    stencil,
)
from physmorph.mpm.engine import (
    Tape,
    Trajectory,
    geometry_from,
    kinetic_energy,
    measurement_grid,
    mpm_step,
    simulate,
)
from physmorph.mpm.adjoint import AdjointResult, AdjointSeed, TapeMismatchError, adjoint
