"""Particle-based energetic variational inference."""
from .diagnostics import GridSpec, MetricsRecord, find_modes, kde_density, mmd2, particle_moments
from .energy import (
    discrete_energy,
    discrete_energy_grad,
    energy_report,
    proximal_objective,
    proximal_objective_grad,
)
from .kernels import (
    KernelConfig,
    KernelMatrix,
    gaussian_kernel,
    gaussian_kernel_grad,
    kernel_matrix,
    median_bandwidth,
)
from .solvers import (
    RunState,
    Scheme,
    SolverConfig,
    evi_im_step,
    explicit_step,
    lmc_step,
    parvi_velocity,
    run,
)
from .targets import TargetModel

__version__ = "0.1.0"
