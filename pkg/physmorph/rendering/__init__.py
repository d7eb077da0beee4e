from physmorph.rendering.camera import SCREEN_COVARIANCE_FLOOR, Projection, project, to_camera
from physmorph.rendering.covariance import anisotropy, build_covariance, covariance_backward
from physmorph.rendering.shading import phong_colors
from physmorph.rendering.splatting import GaussianGradients, render, render_backward
from physmorph.rendering.visibility import visibility_mask
