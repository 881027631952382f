"""Finite-difference spectral discretization of the fractional stochastic heat equation.

The subpackages cover the grid eigensystem, fractional operators, projection
and interpolation maps, reproducible Brownian increments, an exponential Euler
integrator and a strong-convergence laboratory.
"""

from __future__ import annotations

__version__ = "0.1.0"

from ._backend import BACKEND
from .config import ConfigError, ExperimentConfig, parse_config
from .convergence import (
    ConvergenceReport,
    HypothesisError,
    RateFit,
    TheoreticalRate,
    commutator_norm,
    deterministic_gap,
    deterministic_rate,
    fit_rate,
    lemma_sum_check,
    mc_strong_error,
    path_error,
    semigroup_gap,
    theoretical_rate,
)
from .grid import (
    AliasingError,
    EigenSystem,
    GridField,
    GridSpec,
    InvalidLevelError,
    SpectralField,
    analyze,
    discrete_eigenvalues,
    eigen_system,
    make_grid,
    sine_matrix,
    stiffness_matrix,
    synthesize,
    transform,
)
from .integrator import (
    DivergenceError,
    InitialCondition,
    SolutionPath,
    exp_euler_step,
    make_initial,
    solve_discrete,
    solve_reference,
)
from .lifting import (
    NemytskiiMap,
    constant_map,
    diffusion_matrix_gn,
    get_nemytskii,
    interpolate_En,
    nemytskii_eval,
    project_Pn,
)
from .noise import NoiseBundle, TimeGrid, increment, normals, restrict
from .operators import (
    ContinuousFracOperator,
    DimensionError,
    DiscreteFracOperator,
    FractionalOrderError,
    QuadratureError,
    TruncationError,
    balakrishnan_scalar,
    frac_matrix_balakrishnan,
    frac_matrix_spectral,
    green_kernel,
    gruenwald_apply,
    gruenwald_coefficients,
    kernel_truncation,
    make_continuous_operator,
    make_discrete_operator,
    semigroup_apply,
)
