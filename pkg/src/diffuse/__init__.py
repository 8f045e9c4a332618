"""Fixed-point solvers built from per-node diffusion steps.

A matrix-vector product ``P x`` is split into elementary diffusions: node
``i`` hands its residual fluid to the entries of column ``i`` and records
what it sent in a history vector. Scheduling those diffusions well
(greedily, or only on negative fluid for the DI+ eigenvector variant) is
what the package is about.
"""

from .core import DiffusionState, DimensionError, MonitorVector, SparseMatrix, is_sigma_decreasing, matvec, residual_linf, sigma_v
from .io import EdgeList, Normalization, make_fixture, read_edge_list, read_matrix_market, to_matrix
from .kernels import backend as kernel_backend
from .operators import ScheduleStep, apply_alpha_blend, check_invariant, diffuse_step
from .scheduling import EXHAUSTED, EligibilityIndex, Scheduler, SchedulerKind
from .solvers import (
    ConvergenceTrace,
    SolveConfig,
    SolveReport,
    compare_alpha_runs,
    dense_oracle_eigen,
    dense_oracle_solve,
    emulate_power_iteration,
    jacobi_baseline,
    power_iteration_baseline,
    power_iteration_linear,
    snake_oscillation_demo,
    solve_eigen_diplus,
    solve_linear,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceTrace",
    "DiffusionState",
    "DimensionError",
    "EXHAUSTED",
    "EdgeList",
    "EligibilityIndex",
    "MonitorVector",
    "Normalization",
    "ScheduleStep",
    "Scheduler",
    "SchedulerKind",
    "SolveConfig",
    "SolveReport",
    "SparseMatrix",
    "apply_alpha_blend",
    "check_invariant",
    "compare_alpha_runs",
    "dense_oracle_eigen",
    "dense_oracle_solve",
    "diffuse_step",
    "emulate_power_iteration",
    "is_sigma_decreasing",
    "jacobi_baseline",
    "kernel_backend",
    "make_fixture",
    "matvec",
    "power_iteration_baseline",
    "power_iteration_linear",
    "read_edge_list",
    "read_matrix_market",
    "residual_linf",
    "sigma_v",
    "snake_oscillation_demo",
    "solve_eigen_diplus",
    "solve_linear",
    "to_matrix",
]
