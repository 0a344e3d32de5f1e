"""Velocity-jump Monte Carlo whose law solves the kinetic equation.

A particle flies with velocity ``eps^(1-alpha) v`` (macroscopic time), jumps
at rate ``lambda_eps(v) / eps^alpha`` with
``lambda_eps(v) = 1 + eps^(alpha-1) int Phi(v', v, c) M(v') dv'``, and draws
its new velocity from ``(1 + eps^(alpha-1) Phi(v, v_prev, c)) M(v)`` by
rejection from ``M``.  Waiting times are sampled exactly (the rate is constant
along a flight); flights are never truncated.

All particles share one :class:`numpy.random.Generator` (PCG64, period
``2**128``) and are advanced in vectorized rounds, so a fixed seed reproduces
every snapshot bit for bit.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .equilibrium import EquilibriumSpec, VelocityQuadrature, unit_ball_volume, unit_sphere_area
from .feps import ContractionError
from .grid import MacroField, TorusGrid
from .kernels import TurningKernel

log = logging.getLogger(__name__)


@dataclass(eq=False)
class ParticleEnsemble:
    """Snapshot of ``n_p`` particles; positions are unwrapped (in ``R^N``)."""

    positions: np.ndarray
    velocities: np.ndarray
    t: float
    origins: np.ndarray = field(repr=False)
    rng_state: dict = field(default=None, repr=False)
    n_jumps: int = 0

    @property
    def n_p(self) -> int:
        return len(self.positions)

    @property
    def displacements(self) -> np.ndarray:
        return self.positions - self.origins

    def wrapped(self, L: float) -> np.ndarray:
        return np.mod(self.positions, L)


def _radius_from_uniform(spec: EquilibriumSpec, u: np.ndarray) -> np.ndarray:
    """Inverse CDF of ``|v|`` for the flat-core profile."""
    if spec.inner_profile != "flat":
        raise ValueError("closed-form radial sampling needs the flat inner profile")
    N, a, g = spec.N, spec.alpha, spec.gamma
    core = g * unit_ball_volume(N)
    tail_c = g * unit_sphere_area(N) / a  # P(|v| > r) = tail_c r^-alpha for r >= 1
    r_core = (np.minimum(u, core) / core) ** (1.0 / N)
    r_tail = (np.maximum(1.0 - u, np.finfo(float).tiny) / tail_c) ** (-1.0 / a)
    return np.where(u < core, r_core, r_tail)


def _directions(N: int, size: int, rng: np.random.Generator) -> np.ndarray:
    if N == 1:
        return np.where(rng.random(size) < 0.5, -1.0, 1.0)[:, None]
    th = 2.0 * np.pi * rng.random(size)
    return np.stack([np.cos(th), np.sin(th)], axis=-1)


def sample_from_M(spec: EquilibriumSpec, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Draw velocities from ``M``; shape ``(size, N)`` (or ``(N,)`` if ``size`` is None)."""
    n = 1 if size is None else int(size)
    r = _radius_from_uniform(spec, rng.random(n))
    v = r[:, None] * _directions(spec.N, n, rng)
    return v[0] if size is None else v


def _check_contraction(spec, kernel, c, eps):
    s = eps ** (spec.alpha - 1.0)
    if s * kernel.phi_bound(c) >= 1.0:
        raise ContractionError(f"eps^(alpha-1) sup|Phi| = {s * kernel.phi_bound(c):.3f} >= 1")
    return s


def sample_post_jump(spec: EquilibriumSpec, kernel: TurningKernel, c, eps: float, v_prev,
                     rng: np.random.Generator, return_stats: bool = False):
    """Post-jump velocities for every row of ``v_prev`` (shape ``(m, N)``).

    Proposals from ``M`` are accepted with probability
    ``(1 + s Phi(v, v_prev, c)) / (1 + s Phi_bar)``.  With ``return_stats``
    also returns the overall acceptance rate.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    s = _check_contraction(spec, kernel, c, eps)
    v_prev = np.asarray(v_prev, dtype=float)
    single = v_prev.ndim == 1
    v_prev = np.atleast_2d(v_prev)
    m = len(v_prev)
    cap = 1.0 + s * kernel.phi_bound(c)
    out = np.empty_like(v_prev)
    todo = np.arange(m)
    proposals = 0
    while todo.size:
        prop = sample_from_M(spec, rng, todo.size)
        proposals += todo.size
        acc_p = (1.0 + s * kernel.phi(prop, v_prev[todo], c)) / cap
        ok = rng.random(todo.size) < acc_p
        out[todo[ok]] = prop[ok]
        todo = todo[~ok]
    res = out[0] if single else out
    if return_stats:
        return res, m / proposals if proposals else 1.0
    return res


def jump_rate(spec: EquilibriumSpec, kernel: TurningKernel, c, eps: float, v,
              quad: Optional[VelocityQuadrature] = None) -> np.ndarray:
    """``lambda_eps(v)``; the loss integral uses ``quad`` unless ``Phi`` is known to integrate to zero."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    s = eps ** (spec.alpha - 1.0)
    v = np.atleast_2d(v)
    if kernel.assumption_class == "B" or kernel.bound_factor == 0 or not np.any(c):
        return np.ones(len(v))
    if quad is None:
        raise ValueError("a velocity quadrature is needed for the loss rate of this kernel")
    return 1.0 + s * _loss_batched(kernel, c, quad, v)


def _loss_batched(kernel, c, quad, v, chunk=2048):
    out = np.empty(len(v))
    for i in range(0, len(v), chunk):
        vv = v[i:i + chunk]
        Phi = kernel.phi(quad.nodes[:, None, :], vv[None, :, :], c)  # (n, m)
        out[i:i + chunk] = quad.weights_M @ Phi
    return out


def sample_positions(rho_in: Optional[Callable], L: float, N: int, n_p: int, rng: np.random.Generator,
                     rho_max: Optional[float] = None) -> np.ndarray:
    """Positions on ``[0, L)^N`` with density proportional to ``rho_in`` (uniform if None).

    Rejection sampling needs an upper bound ``rho_max``; it is estimated on a
    fine grid (times 1.05) when not given.
    """
    if rho_in is None:
        return L * rng.random((n_p, N))
    if rho_max is None:
        g = TorusGrid(L, 1024 if N == 1 else 128, N)
        pts = g.points if N > 1 else g.x1d
        rho_max = 1.05 * float(np.max(rho_in(pts)))
    out = np.empty((n_p, N))
    todo = np.arange(n_p)
    while todo.size:
        prop = L * rng.random((todo.size, N))
        vals = rho_in(prop[:, 0] if N == 1 else prop)
        if np.any(vals > rho_max) or np.any(vals < 0):
            raise ValueError("initial density must be nonnegative and bounded by rho_max")
        ok = rng.random(todo.size) * rho_max < vals
        out[todo[ok]] = prop[ok]
        todo = todo[~ok]
    return out


def simulate(spec: EquilibriumSpec, kernel: TurningKernel, c, eps: float, n_p: int, T: float,
             rng: np.random.Generator, snapshot_times: Optional[Sequence[float]] = None,
             rho_in: Optional[Callable] = None, L: float = 2 * np.pi * 8,
             quad: Optional[VelocityQuadrature] = None) -> list:
    """Event-driven simulation; returns one :class:`ParticleEnsemble` per snapshot time.

    Initial positions follow ``rho_in`` on ``[0, L)^N`` and initial
    velocities follow ``M``.  ``c`` is a constant vector.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if c.shape != (spec.N,):
        raise ValueError(f"c must have {spec.N} components")
    if n_p < 1:
        raise ValueError("need at least one particle")
    _check_contraction(spec, kernel, c, eps)
    times = sorted([T] if snapshot_times is None else snapshot_times)
    if times[0] < 0 or times[-1] > T * (1 + 1e-12):
        raise ValueError("snapshot times must lie in [0, T]")
    speed = eps ** (1.0 - spec.alpha)
    time_unit = eps ** spec.alpha

    x0 = sample_positions(rho_in, L, spec.N, n_p, rng)
    x = x0.copy()
    v = sample_from_M(spec, rng, n_p)
    t_cur = np.zeros(n_p)
    t_next = rng.exponential(time_unit / jump_rate(spec, kernel, c, eps, v, quad))
    jumps = 0
    out = []
    for ts in times:
        while True:
            idx = np.flatnonzero(t_next < ts)
            if idx.size == 0:
                break
            x[idx] += speed * v[idx] * (t_next[idx] - t_cur[idx])[:, None]
            t_cur[idx] = t_next[idx]
            v[idx] = sample_post_jump(spec, kernel, c, eps, v[idx], rng)
            t_next[idx] = t_cur[idx] + rng.exponential(time_unit / jump_rate(spec, kernel, c, eps, v[idx], quad))
            jumps += idx.size
        pos = x + speed * v * (ts - t_cur)[:, None]
        out.append(ParticleEnsemble(pos, v.copy(), float(ts), x0, rng.bit_generator.state, jumps))
    log.debug("simulated %d jumps for %d particles", jumps, n_p)
    return out


def empirical_density(ensemble: ParticleEnsemble, grid: TorusGrid, mass: float = 1.0) -> MacroField:
    """Histogram of the wrapped positions on the grid cells, integrating to ``mass``.

    Cell ``i`` covers ``[x_i - dx/2, x_i + dx/2)`` so that histogram values
    are comparable with grid-point values of a smooth density.
    """
    if ensemble.n_p == 0:
        raise ValueError("empty ensemble")
    if ensemble.positions.shape[1] != grid.N:
        raise ValueError("ensemble and grid differ in dimension")
    pos = np.mod(ensemble.positions + 0.5 * grid.dx, grid.L)
    idx = np.minimum((pos / grid.dx).astype(int), grid.n - 1)
    counts = np.zeros(grid.shape)
    np.add.at(counts, tuple(idx.T), 1.0)
    rho = counts * (mass / (ensemble.n_p * grid.cell_volume))
    return MacroField(rho, grid, ensemble.t)
