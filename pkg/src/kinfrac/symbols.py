"""Fourier-Laplace symbols of the kinetic model and the damped test function chi.

For the simple kernel ``Phi = c . v/|v|`` the transformed kinetic equation
closes on the density: ``S_eps(k, p) rho_hat = (initial data term)`` with

    Re S_eps = int (p + eps^a p^2 + eps^(2-a) (v.k)^2) / D  M dv,
    Im S_eps = int (c . v/|v|) (v.k) / D  M dv,
    D = (1 + eps^a p)^2 + eps^2 (v.k)^2,

and ``S_eps -> p + A |k|^a + i B c.k`` as ``eps -> 0``.  The radial integrals
are split at ``|v| = 1``; on the algebraic tail the variable is stretched to
``w = eps |v.k|`` so that the fractional contribution is evaluated directly as
``|k|^a int w^(1-a) / ((1 + eps^a p)^2 + w^2) dw`` without cancellation.

The damped average ``chi_eps(x, v) = int_0^inf e^(-z) phi(x + eps v z) dz``
solves ``chi - eps v . grad chi = phi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .equilibrium import EquilibriumSpec, VelocityQuadrature
from .fractional import LimitConstants, _quad, constant_A

# ---------------------------------------------------------------------------
# symbols


@dataclass(frozen=True)
class SymbolEvaluation:
    eps: float
    k: np.ndarray
    p: float
    real_part: float
    imag_part: float
    limit_real: float
    limit_imag: float

    @property
    def gap_real(self) -> float:
        return abs(self.real_part - self.limit_real)

    @property
    def gap_imag(self) -> float:
        return abs(self.imag_part - self.limit_imag)

    @property
    def gap(self) -> float:
        """Modulus of the complex difference to the limit symbol."""
        return math.hypot(self.real_part - self.limit_real, self.imag_part - self.limit_imag)


def _core(s: float, a: float, b: float) -> float:
    """``int_0^1 r^s / (a^2 + b^2 r^2) dr``."""
    return _quad(lambda r: r ** s / (a * a + b * b * r * r), 0.0, 1.0)


def _stretched(power: float, a: float, b: float) -> float:
    """``int_b^inf w^power / (a^2 + w^2) dw`` for ``b >= 0`` (``power < 1``)."""
    # beyond max(a, b): w = a / t maps to a^(power-1) int t^(-power) / (1 + t^2) dt
    upper_t = 1.0 if b <= a else a / b
    far = a ** (power - 1.0) * _quad(lambda t: 1.0 / (1.0 + t * t), 0.0, upper_t,
                                     weight="alg", wvar=(-power, 0.0))
    if b >= a:
        return far
    if b == 0.0:
        near = a ** (power - 1.0) * _quad(lambda u: 1.0 / (1.0 + u * u), 0.0, 1.0,
                                          weight="alg", wvar=(power, 0.0))
    else:
        # log variable between b and a
        near = _quad(lambda u: math.exp((power + 1.0) * u) / (a * a + math.exp(2.0 * u)),
                     math.log(b), math.log(a))
    return near + far


def _tail(power: float, a: float, b: float) -> float:
    """``int_1^inf r^power / (a^2 + b^2 r^2) dr`` for ``power < -1``."""
    if b == 0.0:
        return -1.0 / ((power + 1.0) * a * a)
    if b >= a:
        return b ** (-power - 1.0) * _stretched(power, a, b)
    # r in [1, a/b] in the log variable (bounded integrand even for tiny b),
    # then w = b r = a / t beyond a
    near = _quad(lambda s: math.exp((power + 1.0) * s) / (a * a + (b * math.exp(s)) ** 2),
                 0.0, math.log(a / b))
    far = b ** (-power - 1.0) * a ** (power - 1.0) * _quad(lambda t: 1.0 / (1.0 + t * t), 0.0, 1.0,
                                                           weight="alg", wvar=(-power, 0.0))
    return near + far


# below this, eps |k| only changes the symbol by O(b^(alpha-1)), far under round-off
_B_MIN = 1e-150


def _symbol_1d(alpha, gamma, c, eps, k, p):
    a = 1.0 + eps ** alpha * p
    b = eps * abs(k)
    b = 0.0 if b < _B_MIN else b
    re = 2.0 * gamma * (p * a * (_core(0.0, a, b) + _tail(-1.0 - alpha, a, b))
                        + eps ** (2.0 - alpha) * k * k * _core(2.0, a, b)
                        + abs(k) ** alpha * _stretched(1.0 - alpha, a, b))
    tail_im = _tail(-alpha, a, b) if b > 0 else 1.0 / ((alpha - 1.0) * a * a)
    im = c * k * 2.0 * gamma * (_core(1.0, a, b) + tail_im)
    return re, im


def _symbol_2d(alpha, gamma, c, eps, k, p):
    knorm = float(np.linalg.norm(k))
    a = 1.0 + eps ** alpha * p
    if knorm == 0.0:
        return p / a, 0.0
    c_par = float(np.dot(c, k)) / knorm

    def real_theta(th):
        kap = knorm * math.cos(th)
        b = eps * kap
        b = 0.0 if b < _B_MIN else b
        return (p * a * (_core(1.0, a, b) + _tail(-1.0 - alpha, a, b))
                + eps ** (2.0 - alpha) * kap * kap * _core(3.0, a, b)
                + kap ** alpha * _stretched(1.0 - alpha, a, b))

    def imag_theta(th):
        cs = math.cos(th)
        b = eps * knorm * cs
        b = 0.0 if b < _B_MIN else b
        tail_im = _tail(-alpha, a, b) if b > 0 else 1.0 / ((alpha - 1.0) * a * a)
        return cs * cs * (_core(2.0, a, b) + tail_im)

    # integrands depend on |cos theta| only: integrate over a quarter turn
    opts = dict(epsabs=0.0, epsrel=1e-11, limit=200)
    re = 4.0 * gamma * integrate.quad(real_theta, 0.0, math.pi / 2, **opts)[0]
    im = 4.0 * gamma * c_par * knorm * integrate.quad(imag_theta, 0.0, math.pi / 2, **opts)[0]
    return re, im


def symbol_limit(constants: LimitConstants, c, k, p: float) -> tuple:
    """``(p + A |k|^alpha, B c.k)``."""
    if not p > 0:
        raise ValueError("Laplace variable p must be positive")
    k = np.atleast_1d(np.asarray(k, dtype=float))
    c = np.atleast_1d(np.asarray(c, dtype=float))
    knorm = float(np.linalg.norm(k))
    return p + constants.A * knorm ** constants.alpha, constants.B * float(np.dot(c, k))


def _limit_for(spec: EquilibriumSpec, c, k, p):
    A = constant_A(spec)
    B = spec.first_moment / spec.N
    const = LimitConstants(A, B, float("nan"), spec.alpha, spec.N, spec.gamma)
    return symbol_limit(const, c, k, p)


def symbol_eps(spec: EquilibriumSpec, c, eps: float, k, p: float,
               quad: Optional[VelocityQuadrature] = None) -> SymbolEvaluation:
    """Symbol of the kinetic model with the simple kernel at ``(k, p)``.

    Evaluated by adaptive quadrature of the radial integrals (the velocity
    quadrature is not needed and ``quad``, if given, is only checked for
    consistency; see :func:`symbol_eps_discrete` for the node-sum version).
    """
    if not p > 0:
        raise ValueError("Laplace variable p must be positive")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if quad is not None and quad.spec != spec:
        raise ValueError("quadrature was built for a different equilibrium")
    k = np.atleast_1d(np.asarray(k, dtype=float))
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if k.shape != (spec.N,) or c.shape != (spec.N,):
        raise ValueError(f"k and c must have {spec.N} components")
    if spec.N == 1:
        re, im = _symbol_1d(spec.alpha, spec.gamma, float(c[0]), eps, float(k[0]), p)
    else:
        re, im = _symbol_2d(spec.alpha, spec.gamma, c, eps, k, p)
    lr, li = _limit_for(spec, c, k, p)
    return SymbolEvaluation(eps, k, p, re, im, lr, li)


def symbol_eps_discrete(quad: VelocityQuadrature, c, eps: float, k, p: float) -> tuple:
    """Same symbol as a weighted node sum over ``quad`` (moderate ``eps`` only)."""
    if not p > 0:
        raise ValueError("Laplace variable p must be positive")
    spec = quad.spec
    k = np.atleast_1d(np.asarray(k, dtype=float))
    c = np.atleast_1d(np.asarray(c, dtype=float))
    a = 1.0 + eps ** spec.alpha * p
    vk = quad.nodes @ k
    D = a * a + (eps * vk) ** 2
    re = np.sum(quad.weights_M * (p * a + eps ** (2.0 - spec.alpha) * vk ** 2) / D)
    im = np.sum(quad.weights_M * (quad.directions @ c) * vk / D)
    return float(re), float(im)


# ---------------------------------------------------------------------------
# damped test functions


def chi_eps(phi: Callable, eps: float, x, v, z_quad_order: int = 48, N: int = 1):
    """``int_0^inf e^(-z) phi(x + eps v z) dz`` by Gauss-Laguerre quadrature.

    ``x`` and ``v`` broadcast against each other.  For ``N=1`` they are scalars
    or arrays of scalars; for ``N=2`` the last axis holds the components.
    ``phi`` must accept an array of points of the corresponding shape.
    """
    z, w = np.polynomial.laguerre.laggauss(z_quad_order)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if N == 1:
        pts = x[..., None] + eps * v[..., None] * z
    else:
        pts = x[..., None, :] + eps * v[..., None, :] * z[:, None]
    return np.tensordot(np.asarray(phi(pts)), w, axes=([-1], [0]))


@dataclass(frozen=True)
class TrigTestFunction:
    """``phi(x, t) = psi(t) Re sum_j coeffs_j exp(i k_j . x)`` on the torus ``[0, L)^N``.

    ``modes`` are integer index tuples, ``k_j = 2 pi m_j / L``.  The time
    profile ``psi(t) = cos^2(pi t / (2 T))`` on ``[0, T]`` (zero afterwards) is
    smooth with ``psi(0) = 1``, ``psi(T) = psi'(T) = 0``; ``T=None`` means
    ``psi = 1``.
    """

    L: float
    modes: tuple
    coeffs: tuple
    N: int = 1
    T: Optional[float] = None

    def __post_init__(self):
        modes = tuple(tuple(int(i) for i in np.atleast_1d(m)) for m in self.modes)
        if any(len(m) != self.N for m in modes):
            raise ValueError(f"each mode needs {self.N} integer indices")
        if len(modes) != len(self.coeffs):
            raise ValueError("modes and coeffs differ in length")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))

    @property
    def wavevectors(self) -> np.ndarray:
        return 2.0 * np.pi * np.array(self.modes, dtype=float) / self.L

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=complex)

    def psi(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.T is None:
            return np.ones_like(t)
        return np.where(t < self.T, np.cos(0.5 * np.pi * t / self.T) ** 2, 0.0)

    def dpsi(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.T is None:
            return np.zeros_like(t)
        arg = 0.5 * np.pi * t / self.T
        return np.where(t < self.T, -0.5 * np.pi / self.T * np.sin(2.0 * arg), 0.0)

    def _phase(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.N == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        return np.exp(1j * (x @ self.wavevectors.T))  # (..., modes)

    def __call__(self, x, t: float = 0.0):
        return self.psi(t) * np.real(self._phase(x) @ self.amplitudes)

    def chi(self, x, v, eps: float, t: float = 0.0):
        """Exact damped average: mode ``j`` is divided by ``1 - i eps v . k_j``."""
        vk = self._vdotk(v)
        return self.psi(t) * np.real(np.sum(self._phase(x) * self.amplitudes / (1.0 - 1j * eps * vk), -1))

    def _vdotk(self, v):
        v = np.asarray(v, dtype=float)
        if self.N == 1 and (v.ndim == 0 or v.shape[-1] != 1):
            v = v[..., None]
        return v @ self.wavevectors.T

    def frac_laplacian(self, x, alpha: float, t: float = 0.0):
        knorm = np.linalg.norm(self.wavevectors, axis=-1) ** alpha
        return self.psi(t) * np.real(self._phase(x) @ (self.amplitudes * knorm))

    def sup_norm_bound(self) -> float:
        return float(np.sum(np.abs(self.amplitudes)))


@dataclass(frozen=True)
class ChiEvaluation:
    eps: float
    phi: object = field(repr=False)
    dev_0: float
    dev_t: float
    dev_x: float
    frac_term: np.ndarray = field(repr=False)
    frac_limit: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)

    @property
    def frac_gap(self) -> float:
        return float(np.max(np.abs(self.frac_term - self.frac_limit)))


def _sample_points(L: float, N: int, n: int) -> np.ndarray:
    g = np.arange(n) * L / n
    if N == 1:
        return g[:, None]
    X, Y = np.meshgrid(g, g, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=-1)


def chi_diagnostics(phi: TrigTestFunction, spec: EquilibriumSpec, quad: VelocityQuadrature, eps: float,
                    t: float = 0.0, n_sample: int = 64, A: Optional[float] = None) -> ChiEvaluation:
    """Deviations of the damped average from ``phi`` and the rescaled fractional term.

    ``dev_0 = sup_x int M |chi - phi| dv``; ``dev_t`` and ``dev_x`` are the same
    with ``d/dt`` and the Euclidean norm of ``grad_x`` applied to both.  The
    fractional term is ``eps^(-alpha) int M (chi - phi) dv`` and its limit is
    ``-A (-Delta)^(alpha/2) phi``.  Suprema run over ``n_sample`` points per
    dimension of the torus.
    """
    if quad.spec != spec:
        raise ValueError("quadrature was built for a different equilibrium")
    if phi.N != spec.N:
        raise ValueError("test function and equilibrium differ in dimension")
    x = _sample_points(phi.L, spec.N, n_sample)
    kv = phi.wavevectors  # (m, N)
    vk = quad.nodes @ kv.T  # (n, m)
    damp = 1.0 / (1.0 - 1j * eps * vk) - 1.0  # chi - phi per unit mode
    ph = phi._phase(x) * phi.amplitudes  # (X, m)
    diff = np.einsum("xm,nm->xn", ph, damp)  # (X, n) complex, phi-part removed
    mw = quad.weights_M
    base = np.abs(np.real(diff)) @ mw
    dev_0 = float(np.max(base)) * float(abs(phi.psi(t)))
    dev_t = float(np.max(base)) * float(abs(phi.dpsi(t)))
    grads = np.einsum("xm,nm,md->xnd", ph, damp, 1j * kv)
    dev_x = float(np.max(np.linalg.norm(np.real(grads), axis=-1) @ mw)) * float(abs(phi.psi(t)))
    frac_term = eps ** (-spec.alpha) * (np.real(diff) @ mw) * phi.psi(t)
    A = constant_A(spec) if A is None else A
    frac_limit = -A * phi.frac_laplacian(x, spec.alpha, t)
    return ChiEvaluation(eps, phi, dev_0, dev_t, dev_x, frac_term, frac_limit, x)


# ---------------------------------------------------------------------------
# weak formulation


class SnapshotDensityError(ValueError):
    """Too few stored snapshots for the time quadrature of the weak form."""


def weak_form_terms(run, phi: TrigTestFunction, min_snapshots: int = 16) -> dict:
    """The four terms of the weak formulation integrated over the stored trajectory.

    For a solution of the kinetic equation and ``phi`` vanishing at the final
    time, ``int f d_t chi + int f_in chi(0) + eps^-alpha int rho M (chi - phi)
    + eps^-1 int Q_1(f) chi = 0`` (space, velocity and time integrals).  Time
    integrals use the trapezoidal rule over the snapshots.
    """
    snaps = run.snapshots
    if len(snaps) < min_snapshots:
        raise SnapshotDensityError(f"{len(snaps)} snapshots stored, at least {min_snapshots} needed")
    grid = run.grid
    quad = run.quad
    if phi.N != grid.N or not np.isclose(phi.L, grid.L):
        raise ValueError("test function does not live on the run's torus")
    if phi.T is None or phi.T > snaps[-1].t * (1 + 1e-12):
        raise ValueError("test function must vanish before the last snapshot")
    eps = run.eps
    alpha = quad.spec.alpha
    times = np.array([s.t for s in snaps])
    spacing = np.diff(times)
    if np.max(spacing) > phi.T / (min_snapshots - 1) * (1 + 1e-9):
        raise SnapshotDensityError("snapshot spacing too coarse for the test function's time support")

    idx = _mode_indices(grid, phi)
    kv = phi.wavevectors
    vk = quad.nodes @ kv.T  # (n, m)
    damp = 1.0 / (1.0 - 1j * eps * vk)  # (n, m)
    amp = phi.amplitudes
    w = quad.weights_plain
    mw = quad.weights_M
    vol = grid.cell_volume
    op = run.operator

    def pair(g_hat):
        # int int g Re(a e^{ikx} m(v)) dx dv = Re sum a m(v) conj(g_hat) * vol
        return vol * np.real(np.einsum("m,nm,mn->", amp, damp * w[:, None], np.conj(g_hat)))

    def pair_rho(rho_hat, mult):
        return vol * np.real(np.sum(amp * mult * np.conj(rho_hat)))

    # velocity-integrated multiplier of rho M (chi - phi)
    m_frac = mw @ (damp - 1.0)  # (m,)
    term_dt, term_frac, term_q1 = [], [], []
    for s in snaps:
        fh = _gather(grid, s.f_hat, idx)  # (m, n)
        term_dt.append(phi.dpsi(s.t) * pair(fh))
        rho_hat = fh @ w
        term_frac.append(phi.psi(s.t) * eps ** (-alpha) * pair_rho(rho_hat, m_frac))
        q1 = op.Q1(fh)
        term_q1.append(phi.psi(s.t) * pair(q1) / eps)
    trap = integrate.trapezoid
    f0 = _gather(grid, snaps[0].f_hat, idx)
    out = {
        "dt": float(trap(term_dt, times)),
        "initial": float(phi.psi(times[0]) * pair(f0)),
        "frac": float(trap(term_frac, times)),
        "turning": float(trap(term_q1, times)),
    }
    out["total"] = out["dt"] + out["initial"] + out["frac"] + out["turning"]
    return out


def weak_form_residual(run, phi: TrigTestFunction, constants: Optional[LimitConstants] = None,
                       relative: bool = True, min_snapshots: int = 16) -> float:
    """Sum of the weak-form terms over a stored kinetic trajectory.

    With ``relative`` the sum is divided by the largest term magnitude so that
    runs with different ``eps`` are comparable.  ``constants`` are accepted for
    symmetry with :func:`limit_weak_residual` and are not needed here.
    """
    terms = weak_form_terms(run, phi, min_snapshots)
    if not relative:
        return abs(terms["total"])
    scale = max(abs(terms[k]) for k in ("dt", "initial", "frac", "turning"))
    return abs(terms["total"]) / scale if scale > 0 else 0.0


def _mode_indices(grid, phi: TrigTestFunction) -> list:
    """Positions of the test function's modes in the ``rfftn`` layout (conjugating if needed)."""
    out = []
    n = grid.n
    for m in phi.modes:
        m = np.array(m)
        conj = False
        if m[-1] < 0:
            m, conj = -m, True
        if np.any(np.abs(m) >= n // 2):
            raise ValueError(f"mode {tuple(m)} is not resolved on the grid")
        idx = tuple(int(i) % n for i in m[:-1]) + (int(m[-1]),)
        out.append((idx, conj))
    return out


def _gather(grid, f_hat, idx):
    """Spectral coefficients ``int g e^{-i k x}`` per cell volume for the requested modes."""
    rows = []
    for (i, conj) in idx:
        val = f_hat[i]
        rows.append(np.conj(val) if conj else val)
    return np.array(rows)
