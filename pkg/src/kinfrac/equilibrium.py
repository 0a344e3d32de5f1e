"""Fat-tailed equilibrium distribution and tail-aware velocity quadrature.

The equilibrium is rotationally symmetric, integrates to one and is exactly
``gamma * |v|**(-N - alpha)`` outside the unit ball.  Inside the unit ball the
profile is a configuration point; only the flat profile is implemented.

The velocity quadrature is a composite rule:

* core ``|v| <= 1``: Gauss-Legendre in the radius (mirrored in 1-D so the kink
  of ``|v|`` at the origin is a panel boundary),
* resolved tail ``1 < |v| <= v_max``: Gauss-Legendre in ``log|v|``,
* far tail ``|v| > v_max``: Gauss-Jacobi in ``t = v_max / |v|`` with weight
  ``t**(alpha - 2)``, which integrates both ``1`` and ``|v|`` against the
  algebraic tail exactly.

In 2-D the radial rule is tensorized with an equispaced angular rule whose
size is a multiple of four, so quarter turns map the node set onto itself.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import roots_jacobi

PROFILES = ("flat",)


class QuadratureError(RuntimeError):
    """Raised when a velocity quadrature fails its normalization check."""


def _check_alpha(alpha: float) -> None:
    if not 1.0 < alpha < 2.0:
        raise ValueError(f"tail exponent alpha must lie in (1, 2), got {alpha!r}")


def _check_dim(N: int) -> None:
    if N not in (1, 2):
        raise ValueError(f"dimension N must be 1 or 2, got {N!r}")


def unit_ball_volume(N: int) -> float:
    return math.pi ** (N / 2) / math.gamma(N / 2 + 1)


def unit_sphere_area(N: int) -> float:
    """Surface measure of the unit sphere in R^N (2 for N=1: two points)."""
    return N * unit_ball_volume(N)


def normalization_gamma(N: int, alpha: float, inner_profile: str = "flat") -> float:
    """Tail amplitude that makes the equilibrium a probability density.

    For the flat profile ``gamma * min(1, |v|**(-N-alpha))`` the closed form is
    ``1 / (V_N + S_{N-1} / alpha)``.
    """
    _check_dim(N)
    _check_alpha(alpha)
    if inner_profile not in PROFILES:
        raise ValueError(f"unknown inner profile {inner_profile!r}; known: {PROFILES}")
    return 1.0 / (unit_ball_volume(N) + unit_sphere_area(N) / alpha)


@dataclass(frozen=True)
class EquilibriumSpec:
    """Rotationally symmetric equilibrium with algebraic tail."""

    N: int
    alpha: float
    inner_profile: str = "flat"
    gamma: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "gamma", normalization_gamma(self.N, self.alpha, self.inner_profile))

    def density(self, speed):
        """M as a function of ``|v|``."""
        speed = np.asarray(speed, dtype=float)
        tail = self.gamma * np.power(np.maximum(speed, 1.0), -(self.N + self.alpha))
        return np.where(speed < 1.0, self.gamma, tail)

    @property
    def first_moment(self) -> float:
        """Closed form of the integral of ``|v| M(v)``."""
        S = unit_sphere_area(self.N)
        return self.gamma * S * (1.0 / (self.N + 1) + 1.0 / (self.alpha - 1.0))

    @property
    def core_mass(self) -> float:
        """Probability of ``|v| < 1``."""
        return self.gamma * unit_ball_volume(self.N)


def _as_velocities(v, N: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if N == 1 and (v.ndim == 0 or v.shape[-1] != 1):
        v = v[..., None]
    if v.shape[-1] != N:
        raise ValueError(f"velocity array has trailing dimension {v.shape[-1]}, expected {N}")
    return v


def eval_M(spec: EquilibriumSpec, v):
    """Evaluate the equilibrium at velocities ``v``.

    In 1-D ``v`` may be a scalar or any array of scalars; in 2-D the last axis
    holds the components.
    """
    v = _as_velocities(v, spec.N)
    out = spec.density(np.linalg.norm(v, axis=-1))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class VelocityQuadrature:
    """Nodes and weights for velocity integrals.

    ``weights_plain`` approximate Lebesgue measure; ``weights_M`` approximate
    ``M(v) dv`` including the analytic tail, so ``weights_M = weights_plain * M``
    at every node.  Instances are immutable and hash by identity.
    """

    spec: EquilibriumSpec
    nodes: np.ndarray
    weights_plain: np.ndarray
    weights_M: np.ndarray
    core_order: int
    tail_order: int
    far_order: int
    angular_order: int
    v_max_resolved: float

    @property
    def n(self) -> int:
        return len(self.weights_M)

    @property
    def speeds(self) -> np.ndarray:
        return np.linalg.norm(self.nodes, axis=-1)

    @property
    def M(self) -> np.ndarray:
        return self.spec.density(self.speeds)

    @property
    def directions(self) -> np.ndarray:
        """``v/|v|`` with the convention ``0/0 = 0``."""
        s = self.speeds[:, None]
        return np.divide(self.nodes, s, out=np.zeros_like(self.nodes), where=s > 0)

    def refined(self, factor: int = 2) -> "VelocityQuadrature":
        """Same construction with the tail orders multiplied by ``factor``."""
        return build_velocity_quadrature(
            self.spec, self.core_order, self.tail_order * factor,
            v_max_resolved=self.v_max_resolved, far_order=self.far_order * factor,
            angular_order=self.angular_order)

    def to_csv(self, path) -> Path:
        path = Path(path)
        cols = [f"v{d + 1}" for d in range(self.spec.N)]
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols + ["weight_plain", "weight_M"])
            for node, wp, wm in zip(self.nodes, self.weights_plain, self.weights_M):
                writer.writerow([repr(float(x)) for x in node] + [repr(float(wp)), repr(float(wm))])
        return path


def _radial_rule(spec: EquilibriumSpec, core_order, tail_order, v_max, far_order):
    """Radial nodes and M-weights per unit of angular measure."""
    a, g = spec.alpha, spec.gamma
    x, w = np.polynomial.legendre.leggauss(core_order)
    r_core = 0.5 * (x + 1.0)
    # core: gamma * r**(N-1) dr
    m_core = g * 0.5 * w * r_core ** (spec.N - 1)

    smax = math.log(v_max)
    x, w = np.polynomial.legendre.leggauss(tail_order)
    s = 0.5 * (x + 1.0) * smax
    r_res = np.exp(s)
    # gamma r**(-N-alpha) r**(N-1) dr with r = e^s
    m_res = g * np.exp(-a * s) * 0.5 * smax * w

    xj, wj = roots_jacobi(far_order, 0.0, a - 2.0)
    t = 0.5 * (xj + 1.0)
    wt = wj / 2.0 ** (a - 1.0)
    r_far = v_max / t
    m_far = g * v_max ** (-a) * wt * t

    r = np.concatenate([r_core, r_res, r_far])
    m = np.concatenate([m_core, m_res, m_far])
    return r, m


_DEFAULT_ORDERS = {1: (64, 64, 8, 1), 2: (16, 32, 4, 16)}


def build_velocity_quadrature(spec: EquilibriumSpec, core_order: int | None = None,
                              tail_order: int | None = None, v_max_resolved: float = 1.0e4,
                              far_order: int | None = None,
                              angular_order: int | None = None) -> VelocityQuadrature:
    """Composite velocity quadrature exact for ``1`` and ``|v|`` against M.

    Orders left as ``None`` take dimension-dependent defaults (64/64/8 radial
    nodes in 1-D; 16/32/4 radial times 16 angles in 2-D, which keeps dense
    kernel matrices below a thousand nodes a side).

    Raises :class:`QuadratureError` if ``|sum(weights_M) - 1| > 1e-10``.
    """
    d = _DEFAULT_ORDERS[spec.N]
    core_order = d[0] if core_order is None else core_order
    tail_order = d[1] if tail_order is None else tail_order
    far_order = d[2] if far_order is None else far_order
    angular_order = d[3] if angular_order is None else angular_order
    if core_order < 2 or tail_order < 2 or far_order < 2:
        raise ValueError("quadrature orders must be at least 2")
    if v_max_resolved <= 1.0:
        raise ValueError("v_max_resolved must exceed 1")
    r, m = _radial_rule(spec, core_order, tail_order, v_max_resolved, far_order)
    if spec.N == 1:
        nodes = np.concatenate([-r[::-1], r])[:, None]
        weights_M = np.concatenate([m[::-1], m])
    else:
        if angular_order < 4 or angular_order % 4:
            raise ValueError("angular_order must be a positive multiple of 4")
        theta = 2.0 * np.pi * (np.arange(angular_order) + 0.5) / angular_order
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        nodes = (r[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
        weights_M = (m[:, None] * np.full(angular_order, 2.0 * np.pi / angular_order)).ravel()
    weights_plain = weights_M / spec.density(np.linalg.norm(nodes, axis=-1))

    total = weights_M.sum()
    if abs(total - 1.0) > 1e-10:
        raise QuadratureError(f"velocity quadrature normalization off by {total - 1.0:.3e}")
    if not (np.all(np.isfinite(weights_M)) and np.all(weights_M >= 0)):
        raise QuadratureError("velocity quadrature produced negative or non-finite weights")
    return VelocityQuadrature(spec, nodes, weights_plain, weights_M, core_order, tail_order,
                              far_order, angular_order if spec.N == 2 else 1, float(v_max_resolved))


def moment(spec: EquilibriumSpec, quad: VelocityQuadrature, g) -> np.ndarray | float:
    """Approximate the integral of ``g(v) M(v)`` with the M-weights.

    ``g`` receives the node array of shape ``(n, N)`` and may return shape
    ``(n,)`` or ``(n, ...)`` (e.g. vector-valued moments).
    """
    if quad.spec is not spec and quad.spec != spec:
        raise ValueError("quadrature was built for a different equilibrium")
    vals = np.asarray(g(quad.nodes), dtype=float)
    out = np.tensordot(quad.weights_M, vals, axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out
