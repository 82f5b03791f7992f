"""Solvers and analysis tools for a 1D nonlocal aggregation-diffusion model.

The equation moves a density by the continuity law with velocity
``-d/dx (epsilon*rho - G*rho)`` where ``G*rho`` is convolution against an
attractive kernel.  Two independent discretizations are provided — a
finite-volume scheme (:mod:`aggdiff.fv`) and a deterministic particle system
(:mod:`aggdiff.particles`) — plus steady-state computation, energy/transport
diagnostics, and a reduced two-particle model (:mod:`aggdiff.toy`).
"""

from .density import (
    CustomProfile,
    GridDensity,
    OscillatingGaussian,
    Parabola,
    QuantileFunction,
    UniformBox,
    build_initial,
    center_of_mass,
    convolve,
    l2_norm_sq,
    linf_norm,
    mass,
    moment,
    pseudo_inverse,
    wasserstein_p,
)
from .diagnostics import (
    DiagnosticsRow,
    HypothesesReport,
    SteadyState,
    compute_steady_state,
    dissipation,
    energy,
    second_moment_rate,
    second_moment_rate_asymptotic,
    second_moment_rate_box,
    stability_hypotheses_check,
    w2_decay_fit,
)
from .fv import FvAbort, FvConfig, FvRunResult, FvState
from .fv import run as run_fv
from .kernels import InteractionKernel, contraction_rate, gaussian
from .particles import (
    ParticleCollision,
    ParticleEnsemble,
    init_particles,
    reconstruct_density,
    resample_to_grid,
    run_particles,
    wasserstein_to_grid,
)
from .toy import ToyProblem, classify_basin, find_equilibria, fold_epsilon, integrate_toy

__version__ = "0.1.0"

__all__ = [
    "CustomProfile",
    "DiagnosticsRow",
    "FvAbort",
    "FvConfig",
    "FvRunResult",
    "FvState",
    "GridDensity",
    "HypothesesReport",
    "InteractionKernel",
    "OscillatingGaussian",
    "Parabola",
    "ParticleCollision",
    "ParticleEnsemble",
    "QuantileFunction",
    "SteadyState",
    "ToyProblem",
    "UniformBox",
    "build_initial",
    "center_of_mass",
    "classify_basin",
    "compute_steady_state",
    "contraction_rate",
    "convolve",
    "dissipation",
    "energy",
    "find_equilibria",
    "fold_epsilon",
    "gaussian",
    "init_particles",
    "integrate_toy",
    "l2_norm_sq",
    "linf_norm",
    "mass",
    "moment",
    "pseudo_inverse",
    "reconstruct_density",
    "resample_to_grid",
    "run_fv",
    "run_particles",
    "second_moment_rate",
    "second_moment_rate_asymptotic",
    "second_moment_rate_box",
    "stability_hypotheses_check",
    "w2_decay_fit",
    "wasserstein_p",
]
