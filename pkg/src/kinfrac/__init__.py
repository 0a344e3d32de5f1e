"""Kinetic transport with fat-tailed equilibria and its fractional diffusion limit.

Submodules
----------
equilibrium
    Fat-tailed equilibrium ``M`` and the tail-aware velocity quadrature.
kernels, collision, feps
    Turning kernels, collision operators and the perturbed equilibrium.
fractional
    Limit constants and the fractional Laplacian.
symbols
    Fourier-Laplace symbols, damped test functions, weak-form residuals.
solvers
    Kinetic and macroscopic solvers on the torus.
particles
    Velocity-jump Monte Carlo.
config, harness, acceptance, cli
    Configuration, sweeps, acceptance checks and the command-line tool.
"""
__version__ = "0.1.0"

from .equilibrium import (EquilibriumSpec, QuadratureError, VelocityQuadrature, build_velocity_quadrature,
                          eval_M, moment, normalization_gamma)
from .kernels import TurningKernel, get_kernel, incoming_kernel, simple_kernel, tempered_kernel, zero_kernel
from .collision import (CollisionOperator, VelocityProfile, apply_Q0, apply_Q1, apply_Qeps, coercivity_gap,
                        drift_u)
from .feps import ContractionError, FepsSolution, feps_derivative_bounds, solve_Feps
from .fractional import (LimitConstants, constant_A, constant_B, constant_c_norm, frac_laplacian_integral,
                         frac_laplacian_spectral, limit_constants)
from .grid import MacroField, TorusGrid
from .symbols import (ChiEvaluation, SymbolEvaluation, TrigTestFunction, chi_diagnostics, chi_eps, symbol_eps,
                      symbol_limit, weak_form_residual)
from .solvers import (KineticRun, KineticState, RunDiagnostics, kinetic_solve, macro_solve, micro_residual,
                      rel_l2_error)
from .particles import ParticleEnsemble, empirical_density, sample_from_M, sample_post_jump, simulate
