"""Conservative square-root-noise SPDE simulation on the torus.

The package evolves nonnegative densities under the stochastic heat flow

    du = (1/2) Laplace(u) dt + N^{-1/2} div( f_delta(u) dW ),

with a band-limited cylindrical noise W and a C^1 square-root regularizer
f_delta, and checks the simulated law against an exact exponential-moment
oracle obtained from independent Brownian particles by a Hopf transform.
"""
__version__ = "0.1.0"

from .config import ConfigError, ExperimentConfig, TestFunction, load_config, parse_test_function
from .duality import duality_expectation, gaussian_baseline, solve_hj
from .ensemble import comparison_paths, structure_paths, weak_error_paths
from .experiments import (
    run_comparison,
    run_duality,
    run_simulate,
    run_structure,
    run_weak_error,
)
from .noise import NoiseIncrement, derive_stream, noise_term, sample_increment
from .particles import (
    Mollifier,
    ParticleEnsemble,
    ResolutionError,
    generate_positions,
    mollified_initial,
)
from .regularization import (
    CoercivityViolation,
    RegParams,
    RegSqrt,
    check_coercivity,
    select_parameters,
)
from .solver import BlowUpError, Diagnostics, SolverState, diagnostics, integrate, step
from .torus import GridField, GridSpec, coarsen, dealias, gradient, heat_semigroup, mass, pairing

__all__ = [
    "__version__",
    "GridSpec",
    "GridField",
    "pairing",
    "mass",
    "gradient",
    "heat_semigroup",
    "dealias",
    "coarsen",
    "RegSqrt",
    "RegParams",
    "CoercivityViolation",
    "check_coercivity",
    "select_parameters",
    "NoiseIncrement",
    "sample_increment",
    "noise_term",
    "derive_stream",
    "SolverState",
    "Diagnostics",
    "BlowUpError",
    "diagnostics",
    "step",
    "integrate",
    "ParticleEnsemble",
    "Mollifier",
    "ResolutionError",
    "generate_positions",
    "mollified_initial",
    "solve_hj",
    "duality_expectation",
    "gaussian_baseline",
    "weak_error_paths",
    "structure_paths",
    "comparison_paths",
    "ConfigError",
    "ExperimentConfig",
    "TestFunction",
    "load_config",
    "parse_test_function",
    "run_weak_error",
    "run_structure",
    "run_comparison",
    "run_duality",
    "run_simulate",
]
