"""Regularization of time-dependent linear inverse problems in discretized
Lebesgue-Bochner spaces, with a dynamic computerized tomography testbed.

Two solvers form the core: a dual-space Tikhonov method driven by explicit
duality mappings and smoothness-of-power-type constants, and a temporal
variational method that penalizes the time derivative and alternates a
Landweber step with a Neumann-cosine spectral filter.
"""

from .geometry import (
    GridFunction,
    SpaceSpec,
    bochner_norm,
    bregman_distance,
    conjugate_exponent,
    duality_map_bochner,
    duality_map_lebesgue,
    inner_product,
    lebesgue_norm,
    lipschitz_power_constant,
    smoothness_constant_bochner,
    smoothness_constant_downgrade,
    smoothness_constant_lebesgue,
)
from .radon import (
    DynamicRadon,
    GeometrySpec,
    Sinogram,
    Volume,
    dynamic_adjoint,
    dynamic_forward,
    operator_norm_estimate,
    static_adjoint,
    static_forward,
)
from .dct import SpectralGrid, cosine_forward, cosine_inverse, spectral_filter, spectral_pde_residual
from .phantoms import MotionModel, add_noise, intensity_phantom, mass_phantom
from .metrics import MetricReport, psnr_mean, relative_error, resample_volume, ssim_mean
from .solvers import (
    IterationTrace,
    NumericalFailure,
    SolverConfig,
    dual_tikhonov,
    dual_tikhonov_static,
    fbp,
    landweber,
    temporal_variational,
)
from .harness import ExperimentConfig, build_problem, default_config, run_sweep, run_table

__version__ = "0.1.0"
