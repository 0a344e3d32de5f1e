"""Limit constants and the fractional Laplacian in its two representations.

On the torus the fractional Laplacian is the Fourier multiplier ``|k|**alpha``.
The whole-space singular integral with constant ``c_{N,alpha}`` is evaluated by
adaptive quadrature and serves as an independent cross-check on rapidly
decaying functions.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

from .equilibrium import EquilibriumSpec, VelocityQuadrature, moment
from .grid import MacroField

_QUAD_OPTS = dict(epsabs=0.0, epsrel=1e-13, limit=200)


class QuadratureWarning(RuntimeWarning):
    pass


def _quad(f, a, b, **kw):
    """``scipy.integrate.quad`` that warns only if the error estimate is large.

    Round-off notices at the tight default tolerance are expected and silent.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, **{**_QUAD_OPTS, **kw})
    if not np.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
        warnings.warn(f"adaptive quadrature error estimate {err:.2e} for value {val:.6e}",
                      QuadratureWarning, stacklevel=3)
    return val


def _radial_integral(alpha: float) -> float:
    """``int_0^inf s**(1-alpha) / (1 + s**2) ds`` split at 1 (``s -> 1/s`` beyond)."""
    lower = _quad(lambda s: 1.0 / (1.0 + s * s), 0.0, 1.0, weight="alg", wvar=(1.0 - alpha, 0.0))
    upper = _quad(lambda t: 1.0 / (1.0 + t * t), 0.0, 1.0, weight="alg", wvar=(alpha - 1.0, 0.0))
    return lower + upper


def _angular_factor(N: int, alpha: float) -> float:
    """``int_{S^{N-1}} |w_1 / |w||**alpha dS``."""
    if N == 1:
        return 2.0
    # cos(t)**alpha = (cos(t) / (pi/2 - t))**alpha * (pi/2 - t)**alpha on [0, pi/2]
    def smooth(t):
        d = math.pi / 2 - t
        return (math.cos(t) / d) ** alpha if d > 1e-12 else 1.0
    return 4.0 * _quad(smooth, 0.0, math.pi / 2, weight="alg", wvar=(0.0, alpha))


def kernel_integral(N: int, alpha: float) -> float:
    """``int_{R^N} w_1**2 |w|**(-N-alpha) / (1 + w_1**2) dw``.

    Polar coordinates with ``s = |w| |cos theta|`` separate it into a radial
    and an angular factor.
    """
    return _radial_integral(alpha) * _angular_factor(N, alpha)


@dataclass(frozen=True)
class LimitConstants:
    A: float
    B: float
    c_norm: float
    alpha: float
    N: int
    gamma: float


def constant_A(spec: EquilibriumSpec) -> float:
    """Fractional diffusivity ``A = gamma * int w_1^2 |w|^(-N-alpha) / (1 + w_1^2) dw``."""
    return spec.gamma * kernel_integral(spec.N, spec.alpha)


def constant_B(spec: EquilibriumSpec, quad: VelocityQuadrature) -> float:
    """Drift susceptibility of the simple kernel, ``(1/N) int |v| M dv``."""
    return moment(spec, quad, lambda v: np.linalg.norm(v, axis=-1)) / spec.N


def constant_c_norm(N: int, alpha: float) -> float:
    """``c_{N,alpha} = Gamma(alpha+1) / int w_1^2 |w|^(-N-alpha) / (1 + w_1^2) dw``."""
    spec = EquilibriumSpec(N, alpha)
    return float(gamma_fn(alpha + 1.0)) * spec.gamma / constant_A(spec)


def limit_constants(spec: EquilibriumSpec, quad: VelocityQuadrature) -> LimitConstants:
    return LimitConstants(constant_A(spec), constant_B(spec, quad), constant_c_norm(spec.N, spec.alpha),
                          spec.alpha, spec.N, spec.gamma)


def frac_symbol(grid, alpha: float) -> np.ndarray:
    return np.linalg.norm(grid.wavevectors, axis=-1) ** alpha


def frac_laplacian_spectral(field: MacroField, alpha: float) -> MacroField:
    """Apply ``(-Delta)^(alpha/2)`` as the multiplier ``|k|**alpha`` (mode 0 maps to 0)."""
    out_hat = field.spectral * frac_symbol(field.grid, alpha)
    return MacroField.from_spectral(out_hat, field.grid, field.t)


def frac_laplacian_integral(phi, alpha: float, x, N: int = 1, n_angles: int = 64,
                            h_min: float = 1e-4) -> float:
    """Singular-integral value of ``(-Delta)^(alpha/2) phi`` at ``x``.

    Pairing ``y = x + h`` with ``y = x - h`` cancels the gradient correction
    exactly and leaves the second difference ``2 phi(x) - phi(x+h) - phi(x-h)``,
    which is ``O(|h|^2)``.  Near the origin the second difference divided by
    ``|h|^2`` is integrated against the weight ``|h|**(1-alpha)`` by an
    algebraic-weight rule; below ``h_min`` that ratio is frozen to avoid
    cancellation (the error is ``O(h_min**(4-alpha))``).

    ``phi`` maps an array of points of shape ``(..., N)`` (or scalars in 1-D)
    to values.  In 2-D the direction integral uses ``n_angles`` equispaced
    angles on a half circle.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if N == 1:
        f0 = float(phi(x[0]))

        def second_diff(h):
            return 2 * f0 - float(phi(x[0] + h)) - float(phi(x[0] - h))
    elif N == 2:
        th = np.pi * np.arange(n_angles) / n_angles
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
        f0 = float(phi(x))

        def second_diff(h):
            pts_p = x + h * dirs
            pts_m = x - h * dirs
            vals = 2 * f0 - np.asarray(phi(pts_p)) - np.asarray(phi(pts_m))
            return float(np.mean(vals)) * np.pi
    else:
        raise ValueError("N must be 1 or 2")

    def near(h):
        h = max(h, h_min)
        return second_diff(h) / (h * h)

    inner = _quad(near, 0.0, 1.0, weight="alg", wvar=(1.0 - alpha, 0.0))
    outer = _quad(lambda h: second_diff(h) * h ** (-1.0 - alpha), 1.0, np.inf)
    # 1-D: the two half-lines are already paired, the integral over h > 0 covers R.
    return constant_c_norm(N, alpha) * (inner + outer)
