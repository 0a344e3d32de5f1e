"""Kinetic and macroscopic solvers on the periodic torus.

Kinetic model (macroscopic time ``t``)::

    d_t f + eps^(1-alpha) v . grad_x f = eps^(-alpha) Q_eps(f)

Space is discretized by Fourier collocation, velocity by the nodes of a
:class:`~kinfrac.equilibrium.VelocityQuadrature`.  For constant ``c`` every
Fourier mode evolves independently and one backward-Euler step per mode reads

    D_j f_j^{n+1} = f_j^n + tau (rho^{n+1} M_j + s M_j sum_i K_ji w_i f_i^{n+1}),
    D_j = 1 + i dt eps^(1-alpha) v_j . k + tau lambda_j,   tau = dt eps^(-alpha).

When ``Phi`` does not depend on the incoming velocity the gain is rank one and
the step closes on a scalar equation for ``rho^{n+1}``; otherwise the ``K`` part
is resolved by fixed-point iteration around the same closure.  Because the
discrete collision operator is the generator of a jump process with stationary
density ``F_eps`` and the transport phase is skew, the step is a contraction in
the ``F_eps``-weighted L2 norm and conserves mass exactly.

For ``c`` depending on ``x`` (and ``t``) a Strang splitting alternates exact
transport phases with a pointwise implicit collision step.

The limit equation ``d_t rho + div(u rho) + A (-Delta)^(alpha/2) rho = 0`` is
solved exactly per mode for constant ``u`` and by an integrating-factor RK4
scheme with 2/3 de-aliasing otherwise.
"""
from __future__ import annotations

import logging
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .collision import CollisionOperator, coercivity_constant, drift_u
from .equilibrium import EquilibriumSpec, VelocityQuadrature
from .feps import ContractionError, FepsSolution, feps_field, solve_Feps
from .fractional import LimitConstants, frac_symbol
from .grid import MacroField, TorusGrid
from .kernels import TurningKernel

log = logging.getLogger(__name__)


class SolverDivergenceError(FloatingPointError):
    """Non-finite values appeared; ``dump_path`` holds the last finite state."""

    def __init__(self, message: str, dump_path: Optional[Path] = None):
        super().__init__(message if dump_path is None else f"{message} (state dumped to {dump_path})")
        self.dump_path = dump_path


# ---------------------------------------------------------------------------
# data types


@dataclass(eq=False)
class KineticState:
    """``f`` on torus x velocity nodes, stored as ``rfftn`` coefficients in ``x``.

    ``f_hat`` has shape ``grid.spectral_shape + (n_v,)``.
    """

    f_hat: np.ndarray
    t: float
    eps: float
    grid: TorusGrid
    quad: VelocityQuadrature
    kernel: TurningKernel
    c: object

    @property
    def f(self) -> np.ndarray:
        return self.grid.irfft(self.f_hat)

    @property
    def rho_hat(self) -> np.ndarray:
        return self.f_hat @ self.quad.weights_plain

    @property
    def rho(self) -> MacroField:
        return MacroField.from_spectral(self.rho_hat, self.grid, self.t)

    @property
    def mass(self) -> float:
        zero = (0,) * self.grid.N
        return float(np.real(self.f_hat[zero] @ self.quad.weights_plain)) * self.grid.cell_volume


@dataclass
class RunDiagnostics:
    """Per-step time series recorded by :func:`kinetic_solve`."""

    t: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    l2_weighted: list = field(default_factory=list)
    micro_residual: list = field(default_factory=list)
    first_moment: list = field(default_factory=list)
    min_f: list = field(default_factory=list)

    def append(self, **row):
        for k, v in row.items():
            getattr(self, k).append(float(v))

    def as_arrays(self) -> dict:
        return {k: np.asarray(getattr(self, k)) for k in
                ("t", "mass", "l2_weighted", "micro_residual", "first_moment", "min_f")}

    @property
    def mass_drift(self) -> float:
        m = np.asarray(self.mass)
        return float(np.max(np.abs(m - m[0])) / max(abs(m[0]), 1e-300))

    def l2_nonincreasing(self, rtol: float = 1e-12) -> bool:
        e = np.asarray(self.l2_weighted)
        return bool(np.all(np.diff(e) <= rtol * e[:-1]))

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.as_arrays().values())

    def to_csv(self, path) -> Path:
        path = Path(path)
        arrs = self.as_arrays()
        cols = list(arrs)
        with path.open("w") as fh:
            fh.write(",".join(cols) + "\n")
            for row in zip(*(arrs[c] for c in cols)):
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
        return path


@dataclass(eq=False)
class KineticRun:
    snapshots: list
    diagnostics: RunDiagnostics
    grid: TorusGrid
    quad: VelocityQuadrature
    kernel: TurningKernel
    c: object
    eps: float
    dt: float
    operator: Optional[CollisionOperator]
    feps: Optional[FepsSolution]

    @property
    def final(self) -> KineticState:
        return self.snapshots[-1]

    def state_at(self, t: float) -> KineticState:
        for s in self.snapshots:
            if np.isclose(s.t, t, rtol=1e-12, atol=1e-12):
                return s
        raise KeyError(f"no snapshot at t={t}")


@dataclass(eq=False)
class MacroRun:
    snapshots: list
    constants: LimitConstants
    u: object

    @property
    def final(self) -> MacroField:
        return self.snapshots[-1]

    def at(self, t: float) -> MacroField:
        for s in self.snapshots:
            if np.isclose(s.t, t, rtol=1e-12, atol=1e-12):
                return s
        raise KeyError(f"no snapshot at t={t}")


# ---------------------------------------------------------------------------
# helpers


def _steps(T: float, dt: float) -> tuple:
    if not dt > 0 or not T >= 0:
        raise ValueError("need dt > 0 and T >= 0")
    n = int(round(T / dt))
    if n == 0 and T > 0:
        n = 1
    if n and abs(n * dt - T) > 1e-9 * max(T, 1.0):
        log.info("time step adjusted from %g to %g to land on T", dt, T / n)
    return n, (T / n if n else dt)


def _snapshot_steps(n_steps: int, dt: float, snapshot_times, snapshot_every) -> set:
    if snapshot_every is not None:
        if snapshot_every < 1:
            raise ValueError("snapshot_every must be a positive integer")
        steps = set(range(0, n_steps + 1, snapshot_every))
        steps.add(n_steps)
        return steps
    if snapshot_times is None:
        return {0, n_steps}
    steps = set()
    for t in snapshot_times:
        j = int(round(t / dt))
        if abs(j * dt - t) > 1e-9 * max(1.0, abs(t)) or not 0 <= j <= n_steps:
            raise ValueError(f"snapshot time {t} is not on the time grid")
        steps.add(j)
    return steps


def _initial_f_hat(grid: TorusGrid, quad: VelocityQuadrature, rho_in, f_in) -> np.ndarray:
    if f_in is not None:
        f_in = np.asarray(f_in, dtype=float)
        if f_in.shape != grid.shape + (quad.n,):
            raise ValueError(f"f_in must have shape {grid.shape + (quad.n,)}")
        if not np.all(np.isfinite(f_in)):
            raise ValueError("f_in must be finite")
        return grid.rfft(f_in)
    if rho_in is None:
        rho_in = np.ones(grid.shape)
    rho = rho_in.rho if isinstance(rho_in, MacroField) else np.asarray(rho_in, dtype=float)
    if rho.shape != grid.shape:
        raise ValueError(f"rho_in must have shape {grid.shape}")
    if not np.all(np.isfinite(rho)):
        raise ValueError("rho_in must be finite")
    return grid.rfft(rho)[..., None] * quad.M


def _c_vector(c, N):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if c.shape != (N,):
        raise ValueError(f"c must have {N} components")
    return c


class _Diagnostician:
    """Evaluates the run diagnostics from spectral coefficients."""

    def __init__(self, grid, quad, eps, F):
        self.grid, self.quad, self.eps = grid, quad, eps
        self.pw = grid.parseval_weights[..., None]
        self.w = quad.weights_plain
        self.M = quad.M
        self.F = F  # (n,) for constant c, grid.shape + (n,) otherwise
        self.s_inv = eps ** (1.0 - quad.spec.alpha)
        self.zero = (0,) * grid.N

    def __call__(self, f_hat, t, f_phys=None):
        g, w, vol = self.grid, self.w, self.grid.cell_volume
        mass = float(np.real(f_hat[self.zero] @ w)) * vol
        rho_hat = f_hat @ w
        r_hat = self.s_inv * (f_hat - rho_hat[..., None] * self.M)
        micro = np.sqrt(vol * np.sum(self.pw * np.abs(r_hat) ** 2 * (w / self.M)))
        if f_phys is None:
            f_phys = g.irfft(f_hat)
        if self.F.ndim == 1:
            l2 = np.sqrt(vol * np.sum(self.pw * np.abs(f_hat) ** 2 * (w / self.F)))
        else:
            l2 = np.sqrt(vol * np.sum(f_phys ** 2 * (w / self.F)))
        first = float(np.real(f_hat[self.zero] @ (w * self.quad.speeds))) * vol
        return dict(t=t, mass=mass, l2_weighted=l2, micro_residual=micro, first_moment=first,
                    min_f=float(np.min(f_phys)))


def _dump(f_hat, t, dump_dir) -> Path:
    d = Path(dump_dir) if dump_dir is not None else Path(tempfile.gettempdir())
    d.mkdir(parents=True, exist_ok=True)
    path = d / f"kinetic_state_t{t:.6g}.npz"
    np.savez(path, f_hat=f_hat, t=t)
    return path


# ---------------------------------------------------------------------------
# kinetic solver


def kinetic_solve(spec: EquilibriumSpec, quad: VelocityQuadrature, kernel: TurningKernel, c, eps: float,
                  grid: TorusGrid, T: float, dt: float, rho_in=None, f_in=None,
                  snapshot_times: Optional[Sequence[float]] = None, snapshot_every: Optional[int] = None,
                  c_field: Optional[Callable] = None, fp_tol: float = 1e-12, fp_max_iter: int = 200,
                  dump_dir=None) -> KineticRun:
    """Advance the kinetic equation from ``f_in`` (default ``rho_in M``) to ``T``.

    Parameters
    ----------
    c : array_like
        Constant bias vector.  Ignored when ``c_field`` is given.
    c_field : callable, optional
        ``c_field(points, t)`` returning ``grid.shape + (N,)``; switches to the
        split scheme for space/time dependent ``c``.
    snapshot_times, snapshot_every
        Either explicit times on the step grid or a step stride; the default
        stores the initial and the final state.

    Raises
    ------
    ContractionError
        If ``eps^(alpha-1) sup|Phi| >= 1``.
    SolverDivergenceError
        On non-finite values; the last finite state is written to ``dump_dir``.
    """
    if quad.spec != spec:
        raise ValueError("quadrature was built for a different equilibrium")
    if grid.N != spec.N:
        raise ValueError("grid and equilibrium differ in dimension")
    if not eps > 0:
        raise ValueError("eps must be positive")
    n_steps, dt = _steps(T, dt)
    snap_steps = _snapshot_steps(n_steps, dt, snapshot_times, snapshot_every)
    f_hat = _initial_f_hat(grid, quad, rho_in, f_in)
    if c_field is not None:
        return _kinetic_split(spec, quad, kernel, c_field, eps, grid, f_hat, n_steps, dt, snap_steps,
                              fp_tol, fp_max_iter, dump_dir)
    c = _c_vector(c, spec.N)
    feps = solve_Feps(spec, quad, kernel, c, eps)  # raises ContractionError
    op = CollisionOperator(quad, kernel, c, eps)
    s = op.scale
    tau = dt * eps ** (-spec.alpha)
    w, M = quad.weights_plain, op.M
    k = grid.wavevectors  # spectral_shape + (N,)
    vk = np.tensordot(k, quad.nodes, axes=(-1, -1))  # spectral_shape + (n,)
    D = 1.0 + 1j * dt * eps ** (1.0 - spec.alpha) * vk + tau * op.loss_rate
    if op.rank_one:
        g = M * (1.0 + s * op.K[:, 0])
    else:
        g = M
    denom = 1.0 - tau * ((g / D) @ w)
    diag = _Diagnostician(grid, quad, eps, feps.values)
    KsT = s * op.K.T

    def step(fh, active):
        Da, den = D[active], denom[active]
        rhs0 = fh[active]
        if op.rank_one:
            rho = ((rhs0 / Da) @ w) / den
            new = (rhs0 + tau * rho[..., None] * g) / Da
        else:
            h = np.zeros_like(rhs0)
            for it in range(fp_max_iter):
                base = rhs0 + tau * h
                rho = ((base / Da) @ w) / den
                new = (base + tau * rho[..., None] * g) / Da
                h_new = M * ((new * w) @ KsT)
                change = np.max(np.abs(h_new - h)) if h.size else 0.0
                h = h_new
                if change <= fp_tol * max(1.0, float(np.max(np.abs(h)))):
                    break
            else:
                log.warning("collision fixed point stopped after %d iterations (change %.2e)",
                            fp_max_iter, change)
            base = rhs0 + tau * h
            rho = ((base / Da) @ w) / den
            new = (base + tau * rho[..., None] * g) / Da
        out = np.zeros_like(fh)
        out[active] = new
        return out

    # modes evolve independently: only those present initially are ever nonzero
    active = np.any(f_hat != 0, axis=-1)
    diagnostics = RunDiagnostics()
    snapshots = []
    t = 0.0
    # overflow is detected explicitly below, so numpy's warnings are silenced
    with np.errstate(over="ignore", invalid="ignore"):
        diagnostics.append(**diag(f_hat, t))
        if 0 in snap_steps:
            snapshots.append(KineticState(f_hat.copy(), t, eps, grid, quad, kernel, c))
        for n in range(1, n_steps + 1):
            f_new = step(f_hat, active)
            t = n * dt
            if not np.all(np.isfinite(f_new[active])):
                raise SolverDivergenceError(f"non-finite values at t={t:.6g}", _dump(f_hat, t - dt, dump_dir))
            f_hat = f_new
            diagnostics.append(**diag(f_hat, t))
            if n in snap_steps:
                snapshots.append(KineticState(f_hat.copy(), t, eps, grid, quad, kernel, c))
    return KineticRun(snapshots, diagnostics, grid, quad, kernel, c, eps, dt, op, feps)


def _kinetic_split(spec, quad, kernel, c_field, eps, grid, f_hat, n_steps, dt, snap_steps,
                   fp_tol, fp_max_iter, dump_dir) -> KineticRun:
    """Strang splitting: half transport, implicit collision pointwise in x, half transport."""
    if kernel.assumption_class not in ("A", "C"):
        raise ValueError("space-dependent c requires a kernel with bounded moments (class A or C)")
    s = eps ** (spec.alpha - 1.0)
    tau = dt * eps ** (-spec.alpha)
    w, M = quad.weights_plain, quad.M
    mw = quad.weights_M
    P = kernel.component_matrices(quad)  # (N, n, n)
    loss_parts = np.einsum("dji,j->di", P, mw)  # (N, n)
    pts = grid.points
    vk = np.tensordot(grid.wavevectors, quad.nodes, axes=(-1, -1))
    half_phase = np.exp(-0.5j * dt * eps ** (1.0 - spec.alpha) * vk)

    def c_at(t):
        cf = np.asarray(c_field(pts, t), dtype=float)
        if cf.shape != grid.shape + (spec.N,):
            raise ValueError(f"c_field must return shape {grid.shape + (spec.N,)}")
        if s * kernel.phi_bound(np.full(1, np.max(np.linalg.norm(cf, axis=-1)))) >= 1.0:
            raise ContractionError("eps^(alpha-1) sup|Phi| >= 1 somewhere in the c field")
        return cf

    def collide(f, cf):
        lam = 1.0 + s * np.tensordot(cf, loss_parts, axes=(-1, 0))
        Dc = 1.0 + tau * lam
        den = 1.0 - tau * ((M / Dc) @ w)
        h = np.zeros_like(f)
        for it in range(fp_max_iter):
            base = f + tau * h
            rho = ((base / Dc) @ w) / den
            new = (base + tau * rho[..., None] * M) / Dc
            Pw = np.einsum("dij,...j->...di", P, new * w)
            h_new = s * M * np.einsum("...d,...di->...i", cf, Pw)
            change = np.max(np.abs(h_new - h))
            h = h_new
            if change <= fp_tol * max(1.0, float(np.max(np.abs(h)))):
                break
        base = f + tau * h
        rho = ((base / Dc) @ w) / den
        return (base + tau * rho[..., None] * M) / Dc

    c0 = c_at(0.0)
    diag = _Diagnostician(grid, quad, eps, feps_field(quad, kernel, c0, eps))
    diagnostics = RunDiagnostics()
    snapshots = []
    t = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        diagnostics.append(**diag(f_hat, t))
        if 0 in snap_steps:
            snapshots.append(KineticState(f_hat.copy(), t, eps, grid, quad, kernel, c_field))
        for n in range(1, n_steps + 1):
            tm = (n - 0.5) * dt
            f = grid.irfft(f_hat * half_phase)
            f = collide(f, c_at(tm))
            f_new = grid.rfft(f) * half_phase
            t = n * dt
            if not np.all(np.isfinite(f_new)):
                raise SolverDivergenceError(f"non-finite values at t={t:.6g}", _dump(f_hat, t - dt, dump_dir))
            f_hat = f_new
            diag.F = feps_field(quad, kernel, c_at(t), eps) if n in snap_steps or n == n_steps else diag.F
            diagnostics.append(**diag(f_hat, t))
            if n in snap_steps:
                snapshots.append(KineticState(f_hat.copy(), t, eps, grid, quad, kernel, c_field))
    return KineticRun(snapshots, diagnostics, grid, quad, kernel, c_field, eps, dt, None, None)


# ---------------------------------------------------------------------------
# macroscopic solver


def macro_solve(constants: LimitConstants, u, grid: TorusGrid, rho_in, T: float, dt: float,
                snapshot_times: Optional[Sequence[float]] = None, cfl: float = 2.5) -> MacroRun:
    """Solve ``d_t rho + div(u rho) + A (-Delta)^(alpha/2) rho = 0`` on the torus.

    ``u`` is a constant vector (exact per-mode solution), an array of shape
    ``grid.shape + (N,)`` or a callable ``u(points, t)`` returning one
    (integrating-factor RK4 with 2/3 de-aliasing).  For a drift field the step
    must satisfy ``dt * max|u| * k_max <= cfl``.
    """
    if grid.N != constants.N:
        raise ValueError("grid and constants differ in dimension")
    rho0 = rho_in if isinstance(rho_in, MacroField) else MacroField(np.asarray(rho_in, float), grid)
    if not rho0.grid.same_as(grid):
        raise ValueError("initial field lives on a different grid")
    n_steps, dt = _steps(T, dt)
    times = [T] if snapshot_times is None else list(snapshot_times)
    if snapshot_times is None and T > 0:
        times = [0.0, T]
    sym = constants.A * frac_symbol(grid, constants.alpha)
    k = grid.wavevectors
    rho_hat0 = rho0.spectral

    u_arr = np.asarray(u, dtype=float) if not callable(u) else None
    if u_arr is not None and u_arr.shape in ((grid.N,), ()):
        uvec = np.atleast_1d(u_arr)
        if uvec.shape != (grid.N,):
            raise ValueError(f"u must have {grid.N} components")
        lam = sym + 1j * (k @ uvec)
        snaps = [MacroField.from_spectral(rho_hat0 * np.exp(-lam * t), grid, t) for t in times]
        return MacroRun(snaps, constants, uvec)

    # drift field
    pts = grid.points

    def u_at(t):
        uf = np.asarray(u(pts, t) if callable(u) else u_arr, dtype=float)
        if uf.shape != grid.shape + (grid.N,):
            raise ValueError(f"u field must have shape {grid.shape + (grid.N,)}")
        return uf

    kmax = float(np.max(np.abs(k)))
    umax = float(np.max(np.abs(u_at(0.0))))
    if dt * umax * kmax * grid.N > cfl:
        raise ValueError(f"time step {dt:g} violates the advection limit "
                         f"dt*max|u|*k_max <= {cfl} (max|u|={umax:g}, k_max={kmax:g})")
    mask = grid.dealias_mask()

    def rhs(rh, t):
        rho = grid.irfft(rh)
        flux = u_at(t) * rho[..., None]
        flux_hat = np.stack([grid.rfft(flux[..., d]) for d in range(grid.N)], axis=-1)
        return -1j * np.sum(k * flux_hat, axis=-1) * mask

    E_half = np.exp(-sym * dt / 2)
    E_full = E_half * E_half
    snap_steps = {int(round(t / dt)): t for t in times}
    out = {}
    rh = rho_hat0.copy()
    if 0 in snap_steps:
        out[0] = MacroField.from_spectral(rh, grid, 0.0)
    for n in range(1, n_steps + 1):
        t = (n - 1) * dt
        k1 = rhs(rh, t)
        k2 = rhs(E_half * (rh + 0.5 * dt * k1), t + dt / 2)
        k3 = rhs(E_half * rh + 0.5 * dt * k2, t + dt / 2)
        k4 = rhs(E_full * rh + dt * E_half * k3, t + dt)
        rh = E_full * rh + dt / 6 * (E_full * k1 + 2 * E_half * (k2 + k3) + k4)
        if not np.all(np.isfinite(rh)):
            raise SolverDivergenceError(f"macro solve produced non-finite values at t={n * dt:.6g}")
        if n in snap_steps:
            out[n] = MacroField.from_spectral(rh, grid, n * dt)
    missing = set(snap_steps) - set(out)
    if missing:
        raise ValueError(f"snapshot times not on the step grid: {[snap_steps[j] for j in missing]}")
    return MacroRun([out[j] for j in sorted(out)], constants, u)


def drift_field(kernel: TurningKernel, quad: VelocityQuadrature, c_field: Callable) -> Callable:
    """``u(c(x, t))`` using the linearity of the drift in ``c``."""
    N = quad.spec.N
    U = np.stack([drift_u(kernel, np.eye(N)[d], quad, check_tail=False) for d in range(N)], axis=-1)

    def u(points, t):
        return np.asarray(c_field(points, t), dtype=float) @ U.T

    return u


# ---------------------------------------------------------------------------
# metrics


def rel_l2_error(rho_a: MacroField, rho_b: MacroField, time_rtol: float = 1e-9) -> float:
    """``||rho_a - rho_b||_2 / ||rho_b||_2`` on a common grid."""
    if not rho_a.grid.same_as(rho_b.grid):
        raise ValueError("fields live on different grids")
    if not np.isclose(rho_a.t, rho_b.t, rtol=time_rtol, atol=time_rtol):
        raise ValueError(f"fields are at different times ({rho_a.t} vs {rho_b.t})")
    nb = np.linalg.norm(rho_b.rho)
    if nb == 0:
        raise ValueError("reference field is zero")
    return float(np.linalg.norm(rho_a.rho - rho_b.rho) / nb)


def micro_residual(state: KineticState, feps_sol: FepsSolution) -> tuple:
    """``(||f - rho F_eps||_{L2(dv dx / F_eps)}, ||r_eps||_{L2(dv dx / M)})``.

    ``r_eps = eps^(1-alpha) (f - rho M)``.
    """
    if feps_sol.quad is not state.quad and feps_sol.quad.spec != state.quad.spec:
        raise ValueError("state and equilibrium use different velocity quadratures")
    if feps_sol.quad.n != state.quad.n:
        raise ValueError("state and equilibrium use different velocity quadratures")
    grid, quad = state.grid, state.quad
    w, vol = quad.weights_plain, grid.cell_volume
    pw = grid.parseval_weights[..., None]
    rho_hat = state.f_hat @ w
    F = feps_sol.values
    d1 = state.f_hat - rho_hat[..., None] * F
    n1 = np.sqrt(vol * np.sum(pw * np.abs(d1) ** 2 * (w / F)))
    r = state.eps ** (1.0 - quad.spec.alpha) * (state.f_hat - rho_hat[..., None] * quad.M)
    n2 = np.sqrt(vol * np.sum(pw * np.abs(r) ** 2 * (w / quad.M)))
    return float(n1), float(n2)


def first_moment_bound(run: KineticRun, c=None) -> float:
    """Uniform-in-time bound ``max(m_0, C1/C2)`` for ``int int |v| f``.

    ``C1 = mass (1 + s Phi_bar) int |v| M`` and ``C2 = 1 - s Phi_bar`` with
    ``s = eps^(alpha-1)``.
    """
    spec = run.quad.spec
    s = run.eps ** (spec.alpha - 1.0)
    if c is None:
        if callable(run.c):
            raise ValueError("pass the maximal |c| explicitly for space-dependent c")
        c = run.c
    pb = run.kernel.phi_bound(np.atleast_1d(c))
    mass = run.diagnostics.mass[0]
    C1 = mass * (1.0 + s * pb) * spec.first_moment
    C2 = 1.0 - s * pb
    return max(run.diagnostics.first_moment[0], C1 / C2)


def micro_residual_bound(run: KineticRun) -> float:
    """A-priori bound on ``(int_0^T ||r_eps||^2_{L2(dv dx/M)} dt)^(1/2)`` for constant ``c``.

    The weighted energy estimate ``d/dt ||f||_F^2 <= -(2 nu / eps^alpha)
    ||f - rho F||_F^2`` integrates to ``int ||f - rho F||_F^2 <= eps^alpha
    ||f_in||_F^2 / (2 nu)``.  Splitting ``f - rho M = (f - rho F) + rho (F - M)``
    and using ``1/M <= mu_2 / F``, ``|F/M - 1| <= s mu_3`` and
    ``||rho(t)||_{L2} <= ||f_in||_F`` gives

        ||f_in||_F * (sqrt(mu_2 / (2 nu)) eps^(1 - alpha/2) + mu_3 sqrt(T)),

    which stays bounded as ``eps -> 0``.
    """
    if run.feps is None:
        raise ValueError("the bound needs a constant-c run with its F_eps solution")
    fs = run.feps
    nu = coercivity_constant(fs)
    mu2, mu3 = fs.mu[1], fs.mu[2]
    alpha = run.quad.spec.alpha
    f0 = run.diagnostics.l2_weighted[0]
    T = run.diagnostics.t[-1]
    return f0 * (np.sqrt(mu2 / (2 * nu)) * run.eps ** (1 - alpha / 2) + mu3 * np.sqrt(T))
