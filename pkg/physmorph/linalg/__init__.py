from physmorph.linalg.core import (
    Svd3,
    SvdGradient,
    clamped_stretch_squared,
    cofactor,
    identity_like,
    polar_decompose,
    soft_clamp_singular,
    soft_clamp_singular_grad,
    svd3,
    svd_backward,
    transpose,
)
from physmorph.linalg.autograd import PolarFunction, Svd3Function, SymmetricMatrixFunction
