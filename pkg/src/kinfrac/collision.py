"""Relaxation, turning and full collision operators on discrete velocity profiles.

All operators act on the last axis of an array of nodal values, so the same
code serves single profiles and whole ``(x, v)`` fields.  Both ``v`` and
``v'`` integrals use the same node set, which makes the discrete operators
exactly mass-free: the gain and loss sums of the turning operator are the same
double sum in a different order.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .equilibrium import VelocityQuadrature
from .kernels import TurningKernel


@dataclass(frozen=True, eq=False)
class VelocityProfile:
    """Values of ``f`` at the nodes of ``quad``."""

    values: np.ndarray
    quad: VelocityQuadrature

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape[-1:] != (self.quad.n,):
            raise ValueError(f"profile has {vals.shape[-1:]} values, quadrature has {self.quad.n} nodes")
        if not np.all(np.isfinite(vals)):
            raise ValueError("profile values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def mass(self):
        return self.values @ self.quad.weights_plain

    def l1(self):
        return np.abs(self.values) @ self.quad.weights_plain


def density(values, quad: VelocityQuadrature):
    """``rho_f``: integral of ``f`` over velocity, along the last axis."""
    return np.asarray(values) @ quad.weights_plain


class CollisionOperator:
    """``Q_eps = Q_0 + eps**(alpha-1) Q_1`` for fixed kernel, ``c`` and ``eps``.

    The kernel matrix and the loss rates are built once.  ``eps=None`` gives a
    handle on ``Q_1`` alone with ``scale=1``.
    """

    def __init__(self, quad: VelocityQuadrature, kernel: TurningKernel, c, eps: float | None = None):
        self.quad = quad
        self.kernel = kernel
        self.c = np.atleast_1d(np.asarray(c, dtype=float))
        self.eps = eps
        self.scale = 1.0 if eps is None else eps ** (quad.spec.alpha - 1.0)
        self.K = kernel.matrix(quad, self.c)
        # int Phi(v', v, c) M' dv'  at v = v_j
        self.loss_integral = self.K.T @ quad.weights_M
        self.M = quad.M
        # Phi independent of v' gives a rank-one gain: M (1 + s Phi(v,.)) rho
        self.rank_one = bool(np.all(self.K == self.K[:, :1]))

    @property
    def loss_rate(self) -> np.ndarray:
        """``lambda_eps(v) = 1 + eps**(alpha-1) int Phi(v', v) M' dv'``."""
        return 1.0 + self.scale * self.loss_integral

    def Q0(self, f):
        f = np.asarray(f)
        return density(f, self.quad)[..., None] * self.M - f

    def Q1(self, f):
        f = np.asarray(f)
        gain = self.M * ((f * self.quad.weights_plain) @ self.K.T)
        return gain - f * self.loss_integral

    def __call__(self, f):
        return self.Q0(f) + self.scale * self.Q1(f)


def apply_Q0(f: VelocityProfile) -> VelocityProfile:
    """``rho_f M - f``."""
    rho = f.mass
    return VelocityProfile(np.asarray(rho)[..., None] * f.quad.M - f.values, f.quad)


def apply_Q1(f: VelocityProfile, kernel: TurningKernel, c) -> VelocityProfile:
    return VelocityProfile(CollisionOperator(f.quad, kernel, c).Q1(f.values), f.quad)


def apply_Qeps(f: VelocityProfile, kernel: TurningKernel, c, eps: float) -> VelocityProfile:
    if eps <= 0:
        raise ValueError("eps must be positive")
    return VelocityProfile(CollisionOperator(f.quad, kernel, c, eps)(f.values), f.quad)


def _drift(quad, kernel, c):
    op = CollisionOperator(quad, kernel, c)
    q1m = op.Q1(quad.M)
    return (quad.weights_plain * q1m) @ quad.nodes


def drift_u(kernel: TurningKernel, c, quad: VelocityQuadrature, check_tail: bool = True) -> np.ndarray:
    """Drift vector ``u(c) = int Q_1(M) v dv``.

    With ``check_tail`` the computation is repeated on a quadrature with doubled
    tail orders and a ``RuntimeWarning`` is issued if the two differ by more
    than ``1e-6``.
    """
    u = _drift(quad, kernel, c)
    if check_tail:
        u2 = _drift(quad.refined(2), kernel, c)
        if np.max(np.abs(u2 - u)) > 1e-6:
            warnings.warn(f"drift tail not converged: |du| = {np.max(np.abs(u2 - u)):.2e} "
                          f"on doubling the tail order", RuntimeWarning, stacklevel=2)
    return u


@dataclass(frozen=True)
class CoercivityCheck:
    lhs: float
    rhs: float
    nu: float

    @property
    def holds(self) -> bool:
        return self.lhs >= self.rhs


def coercivity_constant(feps_sol) -> float:
    """``nu = min_{i,j} (1 + eps**(alpha-1) Phi(v_i, v_j)) / mu_2``.

    ``mu_2`` is the attained maximum of ``F_eps/M``.  Writing the Dirichlet
    form of the jump generator with rates ``T_ij >= nu F_i`` shows that this
    constant is admissible for the discrete operator.
    """
    op = CollisionOperator(feps_sol.quad, feps_sol.kernel, feps_sol.c, feps_sol.eps)
    floor = float(np.min(1.0 + op.scale * op.K))
    if not floor > 0:
        raise ValueError(f"coercivity precondition fails: min(1 + eps^(alpha-1) Phi) = {floor:.3e}")
    return floor / feps_sol.mu[1]


def coercivity_gap(f: VelocityProfile, feps_sol, eps: float | None = None) -> CoercivityCheck:
    """Both sides of the entropy-dissipation inequality for ``Q_eps``.

    ``nu = min_{i,j} (1 + eps**(alpha-1) Phi(v_i, v_j)) / mu_2`` with ``mu_2``
    the attained maximum of ``F_eps/M``; this is one admissible constant.
    """
    eps = feps_sol.eps if eps is None else eps
    if not np.isclose(eps, feps_sol.eps, rtol=1e-14, atol=0):
        raise ValueError("eps does not match the equilibrium solution")
    op = CollisionOperator(f.quad, feps_sol.kernel, feps_sol.c, eps)
    nu = coercivity_constant(feps_sol)
    F = feps_sol.values
    w = f.quad.weights_plain
    lhs = -float(np.sum(w * op(f.values) * f.values / F))
    rho = float(f.mass)
    rhs = nu * float(np.sum(w * (f.values - rho * F) ** 2 / F))
    return CoercivityCheck(lhs, rhs, nu)
