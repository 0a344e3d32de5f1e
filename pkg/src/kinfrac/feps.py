"""Equilibrium ``F_eps`` of the full collision operator.

``G = F_eps / M`` is the fixed point of

    G(v) = (1 + s int Phi(v, v') M' G' dv') / (1 + s int Phi(v', v) M' dv'),

``s = eps**(alpha - 1)``, which is a contraction on bounded functions for
``s * sup|Phi|`` small.  ``x`` and ``t`` only enter through ``c``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .collision import CollisionOperator
from .equilibrium import EquilibriumSpec, VelocityQuadrature
from .kernels import TurningKernel


class ContractionError(ValueError):
    """``eps**(alpha-1) * sup|Phi| >= 1``: the fixed-point map is not a contraction."""


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class FepsSolution:
    values: np.ndarray
    G: np.ndarray
    ratio_bounds: tuple
    mu: tuple
    residual: float
    iterations: int
    eps: float
    c: np.ndarray
    kernel: TurningKernel
    quad: VelocityQuadrature
    lambda_fd: Optional[tuple] = None

    @property
    def scale(self) -> float:
        return self.eps ** (self.quad.spec.alpha - 1.0)

    def g_bounds(self) -> tuple:
        """Certified lower and upper bounds on ``F_eps / M``."""
        sb = self.scale * self.kernel.phi_bound(self.c)
        return (1 - sb) / (1 + sb), (1 + sb) / (1 - sb)


def _iterate(gain_mat, loss, mw, G0, tol, max_iter):
    """Vectorized fixed-point iteration; leading axes of ``loss`` are batch axes."""
    G = G0
    for it in range(1, max_iter + 1):
        G_new = (1.0 + gain_mat(mw * G)) / loss
        G_new = G_new / np.sum(mw * G_new, axis=-1, keepdims=True)
        diff = np.max(np.abs(G_new - G))
        G = G_new
        if diff < tol:
            return G, it
    raise ConvergenceError(f"F_eps iteration did not converge in {max_iter} steps (last change {diff:.2e})")


def solve_Feps(spec: EquilibriumSpec, quad: VelocityQuadrature, kernel: TurningKernel, c, eps: float,
               tol: float = 1e-14, max_iter: int = 1000) -> FepsSolution:
    """Solve ``Q_eps(F) = 0``, ``int F dv = 1`` by contraction on ``G = F/M``."""
    if quad.spec != spec:
        raise ValueError("quadrature was built for a different equilibrium")
    if tol <= 0:
        raise ValueError("tol must be positive")
    c = np.atleast_1d(np.asarray(c, dtype=float))
    op = CollisionOperator(quad, kernel, c, eps)
    s = op.scale
    sb = s * kernel.phi_bound(c)
    if sb >= 1.0:
        raise ContractionError(f"eps^(alpha-1) * sup|Phi| = {sb:.3f} >= 1")
    mw = quad.weights_M
    G, iters = _iterate(lambda y: s * (y @ op.K.T), op.loss_rate, mw, np.ones(quad.n), tol, max_iter)
    F = G * op.M
    residual = float(np.sum(quad.weights_plain * np.abs(op(F))))
    lo, hi = float(G.min()), float(G.max())
    mu3 = float(np.max(np.abs(G - 1.0)) / s) if s > 0 else 0.0
    return FepsSolution(F, G, (lo, hi), (lo, hi, mu3), residual, iters, eps, c, kernel, quad)


def feps_field(quad: VelocityQuadrature, kernel: TurningKernel, c_values, eps: float,
               tol: float = 1e-14, max_iter: int = 1000) -> np.ndarray:
    """``F_eps`` for a batch of ``c`` vectors, shape ``(..., n)``.

    Uses the linear-in-``c`` structure of the kernel so that no per-point
    kernel matrix is formed.
    """
    c_values = np.asarray(c_values, dtype=float)
    s = eps ** (quad.spec.alpha - 1.0)
    cmax = float(np.max(np.linalg.norm(c_values.reshape(-1, quad.spec.N), axis=-1)))
    if s * kernel.phi_bound(np.full(1, cmax)) >= 1.0:
        raise ContractionError("eps^(alpha-1) * sup|Phi| >= 1 somewhere in the field")
    P = kernel.component_matrices(quad)  # (N, n, n)
    mw = quad.weights_M
    loss_parts = np.einsum("dji,j->di", P, mw)  # (N, n)
    loss = 1.0 + s * np.tensordot(c_values, loss_parts, axes=(-1, 0))

    def gain(y):
        # sum_d c_d (P_d @ y)
        return s * np.einsum("...d,...di->...i", c_values, np.einsum("dij,...j->...di", P, y))

    G0 = np.ones(c_values.shape[:-1] + (quad.n,))
    G, _ = _iterate(gain, loss, mw, G0, tol, max_iter)
    return G * quad.M


def feps_derivative_bounds(spec: EquilibriumSpec, quad: VelocityQuadrature, kernel: TurningKernel,
                           c_field: Callable, eps: float, fd_step: float = 1e-4,
                           points=None, tol: float = 1e-15) -> tuple:
    """Central-difference estimates of ``sup|d_t F/F|`` and ``sup|v . grad_x F/F|``.

    ``c_field(x, t)`` returns the vector field at a point (``x`` a length-``N``
    array).  ``points`` is a sequence of ``(x, t)`` samples; the default is
    sixteen points on ``[0, 2 pi) x {0.25}``.
    """
    if kernel.assumption_class not in ("A", "B", "C"):
        raise ValueError("derivative bounds require a kernel satisfying assumption A, B or C")
    if points is None:
        xs = 2 * np.pi * np.arange(16) / 16
        points = [(np.full(spec.N, x), 0.25) for x in xs]
    h = fd_step
    N = spec.N
    cs = []
    for x, t in points:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        cs.append(c_field(x, t))
        cs.append(c_field(x, t + h))
        cs.append(c_field(x, t - h))
        for d in range(N):
            e = np.zeros(N)
            e[d] = h
            cs.append(c_field(x + e, t))
            cs.append(c_field(x - e, t))
    cs = np.array([np.atleast_1d(np.asarray(c, float)) for c in cs]).reshape(len(points), 3 + 2 * N, N)
    F = feps_field(quad, kernel, cs, eps, tol=tol)
    F0 = F[:, 0]
    dt = (F[:, 1] - F[:, 2]) / (2 * h) / F0
    grad = np.stack([(F[:, 3 + 2 * d] - F[:, 4 + 2 * d]) / (2 * h) for d in range(N)], axis=-1)
    vgrad = np.einsum("pid,id->pi", grad, quad.nodes) / F0
    return float(np.max(np.abs(dt))), float(np.max(np.abs(vgrad)))
