"""Executable acceptance checks.

Each ``check_*`` function runs one criterion at its stated tolerance and
returns a :class:`CriterionResult`; :func:`run_all` runs them in order.  The
``verify`` CLI subcommand and the test suite both call these functions.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

from .collision import VelocityProfile, coercivity_gap, drift_u
from .equilibrium import EquilibriumSpec, build_velocity_quadrature
from .feps import solve_Feps
from .fractional import constant_A, constant_c_norm, frac_laplacian_integral, limit_constants
from .grid import TorusGrid
from .harness import fit_rate
from .kernels import simple_kernel, tempered_kernel, zero_kernel
from .particles import empirical_density, simulate
from .solvers import kinetic_solve, macro_solve, micro_residual_bound, rel_l2_error
from .symbols import TrigTestFunction, chi_diagnostics, symbol_eps, weak_form_residual


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{k}={_fmt(v)}" for k, v in self.details.items())
        return f"[{status}] criterion {self.number}: {self.name} ({self.seconds:.1f}s) {parts}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _timed(number, name):
    def deco(fn: Callable[[], tuple]):
        def run() -> CriterionResult:
            t0 = time.perf_counter()
            passed, details = fn()
            return CriterionResult(number, name, bool(passed), details, time.perf_counter() - t0)
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return deco


# reference values of the N=1, alpha=1.5 model (closed forms)
REF_GAMMA = 0.3
REF_B = 1.5
REF_A = 0.3 * math.pi / math.sin(0.75 * math.pi)
REF_C_NORM = math.gamma(2.5) * math.sin(0.75 * math.pi) / math.pi


@_timed(1, "limit constants")
def check_constants():
    spec = EquilibriumSpec(1, 1.5)
    quad = build_velocity_quadrature(spec)
    c = limit_constants(spec, quad)
    errs = {
        "gamma_err": abs(c.gamma - REF_GAMMA),
        "B_err": abs(c.B - REF_B),
        "A_err": abs(c.A - REF_A),
        "c_norm_err": abs(c.c_norm - REF_C_NORM),
    }
    ident = []
    for a in (1.1, 1.25, 1.5, 1.75, 1.9):
        s = EquilibriumSpec(1, a)
        ident.append(abs(constant_c_norm(1, a) * constant_A(s) - gamma_fn(a + 1.0) * s.gamma))
    errs["identity_err"] = max(ident)
    ok = (errs["gamma_err"] <= 1e-8 and errs["B_err"] <= 1e-8 and errs["A_err"] <= 1e-8
          and errs["c_norm_err"] <= 1e-6 and errs["identity_err"] <= 1e-8)
    return ok, errs


K_MAX = 80.0  # every transform in the corpus is below 1e-50 beyond this


def _fourier_side(ft_real_even, ft_odd_imag, x, alpha):
    """``(2 pi)^-1 int |k|^alpha F(phi)(k) e^{ikx} dk`` for real phi.

    ``F(phi)(k) = E(k) - i O(k)`` with ``E`` even and ``O`` odd real functions.
    """
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=400)
    val = 0.0
    if ft_real_even is not None:
        val += integrate.quad(lambda k: k ** alpha * ft_real_even(k) * math.cos(k * x), 0, K_MAX, **opts)[0]
    if ft_odd_imag is not None:
        val += integrate.quad(lambda k: k ** alpha * ft_odd_imag(k) * math.sin(k * x), 0, K_MAX, **opts)[0]
    return val / math.pi


SQPI = math.sqrt(math.pi)


def _sech(x):
    e = np.exp(-np.abs(x))
    return 2 * e / (1 + e * e)  # no overflow for large |x|

# (label, phi, even part of the transform, odd part, evaluation points)
DUALITY_CORPUS = (
    ("gauss", lambda x: np.exp(-np.asarray(x) ** 2), lambda k: SQPI * math.exp(-k * k / 4), None, (0.0, 0.7)),
    ("narrow_gauss", lambda x: np.exp(-2 * np.asarray(x) ** 2),
     lambda k: math.sqrt(math.pi / 2) * math.exp(-k * k / 8), None, (0.0, 1.3)),
    ("modulated_gauss", lambda x: np.exp(-np.asarray(x) ** 2) * np.cos(2 * np.asarray(x)),
     lambda k: 0.5 * SQPI * (math.exp(-(k - 2) ** 2 / 4) + math.exp(-(k + 2) ** 2 / 4)), None, (0.0, 0.4)),
    ("odd_gauss", lambda x: np.asarray(x) * np.exp(-np.asarray(x) ** 2), None,
     lambda k: 0.5 * SQPI * k * math.exp(-k * k / 4), (0.5, -1.1)),
    ("sech", lambda x: _sech(np.asarray(x)), lambda k: math.pi / math.cosh(math.pi * k / 2), None,
     (0.0, 0.9)),
)


@_timed(2, "fractional Laplacian duality")
def check_duality(alpha: float = 1.5):
    worst = 0.0
    per = {}
    for label, phi, even, odd, points in DUALITY_CORPUS:
        errs = []
        for x in points:
            ref = _fourier_side(even, odd, x, alpha)
            val = frac_laplacian_integral(phi, alpha, x)
            errs.append(abs(val - ref) / abs(ref))
        per[label] = max(errs)
        worst = max(worst, max(errs))
    return worst <= 1e-4, {"max_rel_err": worst, **per}


@_timed(3, "symbol convergence")
def check_symbols():
    spec = EquilibriumSpec(1, 1.5)
    eps = 2.0 ** -np.arange(3, 11)
    gaps = np.array([symbol_eps(spec, [1.0], e, [1.0], 1.0).gap for e in eps])
    rate = fit_rate(gaps, eps)
    target = min(spec.alpha - 1, 2 - spec.alpha) - 0.15
    mono = bool(np.all(np.diff(gaps) < 0))
    return mono and rate >= target, {"monotone": mono, "order": rate, "required": target,
                                     "gap_first": gaps[0], "gap_last": gaps[-1]}


@_timed(4, "perturbed equilibrium certification")
def check_feps():
    spec = EquilibriumSpec(1, 1.5)
    quad = build_velocity_quadrature(spec)
    worst_res, bounds_ok, worst_closed = 0.0, True, 0.0
    c = np.array([1.0])
    for kernel in (simple_kernel(), tempered_kernel()):
        for eps in (0.2, 0.1, 0.05):
            sol = solve_Feps(spec, quad, kernel, c, eps)
            worst_res = max(worst_res, sol.residual)
            lo, hi = sol.g_bounds()
            G = sol.G
            bounds_ok &= bool(np.all(G >= lo - 1e-13) and np.all(G <= hi + 1e-13))
            if kernel.name == "simple":
                closed = quad.M * (1 + sol.scale * (quad.directions @ c))
                worst_closed = max(worst_closed, float(np.max(np.abs(sol.values - closed))))
    ok = worst_res <= 1e-10 and bounds_ok and worst_closed <= 1e-10
    return ok, {"max_residual": worst_res, "bounds_hold": bounds_ok, "closed_form_err": worst_closed}


def random_profiles(quad, feps_values, n, rng):
    """Random densities ``F_eps * h`` with ``h`` positive and of mixed smoothness."""
    out = []
    s = quad.speeds
    for j in range(n):
        kind = j % 3
        if kind == 0:
            h = rng.uniform(0.0, 2.0, quad.n)
        elif kind == 1:
            a, b, w = rng.normal(size=3)
            h = 1.0 + 0.9 * np.tanh(a * np.sign(quad.nodes[:, 0]) + b * np.cos(w * np.log1p(s)))
        else:
            h = np.exp(rng.normal(scale=1.5, size=quad.n))
        out.append(feps_values * h)
    return out


@_timed(5, "coercivity inequality")
def check_coercivity(n_profiles: int = 100, seed: int = 20240601):
    spec = EquilibriumSpec(1, 1.5)
    quad = build_velocity_quadrature(spec)
    rng = np.random.default_rng(seed)
    trials = fails = 0
    min_margin = np.inf
    for kernel in (simple_kernel(), tempered_kernel()):
        for eps in (0.2, 0.1, 0.05):
            sol = solve_Feps(spec, quad, kernel, [1.0], eps)
            for f in random_profiles(quad, sol.values, n_profiles, rng):
                chk = coercivity_gap(VelocityProfile(f, quad), sol)
                trials += 1
                fails += not chk.holds
                min_margin = min(min_margin, (chk.lhs - chk.rhs) / max(chk.lhs, 1e-300))
    return fails == 0, {"trials": trials, "violations": fails, "min_rel_margin": float(min_margin)}


def reference_experiment(eps_list=(0.2, 0.1, 0.05, 0.025), dt=1e-3, n=512):
    """The default kinetic-vs-limit experiment; returns per-eps summaries."""
    spec = EquilibriumSpec(1, 1.5)
    quad = build_velocity_quadrature(spec)
    kernel = simple_kernel()
    grid = TorusGrid(2 * np.pi * 8, n)
    rho_in = 1 + 0.5 * np.cos(2 * np.pi * grid.x1d / grid.L)
    T = 0.5
    consts = limit_constants(spec, quad)
    u = drift_u(kernel, [1.0], quad)
    macro = macro_solve(consts, u, grid, rho_in, T, dt).final
    rows = []
    for eps in eps_list:
        run = kinetic_solve(spec, quad, kernel, [1.0], eps, grid, T, dt, rho_in=rho_in)
        d = run.diagnostics
        rows.append({"eps": eps, "error": rel_l2_error(run.final.rho, macro), "mass_drift": d.mass_drift,
                     "l2_monotone": d.l2_nonincreasing(),
                     "micro_time_l2": float(np.sqrt(np.trapezoid(np.square(d.micro_residual), d.t))),
                     "micro_sup": float(np.max(d.micro_residual)),
                     "micro_bound": float(micro_residual_bound(run))})
    return rows


@_timed(6, "kinetic to fractional limit")
def check_kinetic_limit():
    rows = reference_experiment()
    errors = [r["error"] for r in rows]
    dec = bool(np.all(np.diff(errors) < 0))
    drift = max(r["mass_drift"] for r in rows)
    mono = all(r["l2_monotone"] for r in rows)
    micro = [r["micro_time_l2"] for r in rows]
    bound = [r["micro_bound"] for r in rows]
    # bounded across the sweep: below the eps-uniform a-priori bound for every eps
    bounded = bool(np.all(np.isfinite(micro)) and all(m <= b for m, b in zip(micro, bound)))
    ok = dec and drift <= 1e-10 and mono and bounded
    return ok, {"errors": errors, "decreasing": dec, "max_mass_drift": drift, "l2_nonincreasing": mono,
                "micro_time_l2": micro, "micro_bound": bound}


def tail_slope(displacements, p_hi: float = 0.03, p_lo: float = 1e-3, n_points: int = 20) -> float:
    """Log-log slope of the empirical ``P(|X| > R)`` on log-spaced tail levels."""
    a = np.sort(np.abs(np.asarray(displacements).ravel()))
    probs = np.geomspace(p_hi, p_lo, n_points)
    R = np.quantile(a, 1.0 - probs)
    P = 1.0 - np.searchsorted(a, R, side="right") / len(a)
    return float(np.polyfit(np.log(R), np.log(P), 1)[0])


@_timed(7, "particle cross-check")
def check_particles(n_p: int = 100_000, eps: float = 0.05, seed: int = 7):
    spec = EquilibriumSpec(1, 1.5)
    quad = build_velocity_quadrature(spec)
    L, T = 2 * np.pi * 8, 0.5
    kernel = simple_kernel()
    rho = lambda x: 1 + 0.5 * np.cos(2 * np.pi * x / L)
    rng = np.random.default_rng(seed)
    ens = simulate(spec, kernel, [1.0], eps, n_p, T, rng, rho_in=rho, L=L)[-1]
    g64 = TorusGrid(L, 64)
    emp = empirical_density(ens, g64)
    consts = limit_constants(spec, quad)
    u = drift_u(kernel, [1.0], quad)
    macro = macro_solve(consts, u, g64, rho(g64.x1d), T, 1e-3).final
    ref = macro.rho / macro.mass
    l1 = float(np.sum(np.abs(emp.rho - ref)) * g64.dx)

    d = ens.displacements[:, 0]
    mean, se = float(d.mean()), float(d.std(ddof=1) / math.sqrt(n_p))
    drift_z = abs(mean - float(u[0]) * T) / se

    ens0 = simulate(spec, zero_kernel(), [0.0], eps, n_p, T, np.random.default_rng(seed + 1), L=L)[-1]
    slope = tail_slope(ens0.displacements)
    ok = l1 <= 0.05 and abs(slope + spec.alpha) <= 0.1 and drift_z <= 3.0
    return ok, {"l1_distance": l1, "tail_slope": slope, "mean_drift": mean, "expected_drift": float(u[0]) * T,
                "drift_z": drift_z}


@_timed(8, "damped test function diagnostics")
def check_chi():
    spec = EquilibriumSpec(1, 1.5)
    quad = build_velocity_quadrature(spec)
    A = constant_A(spec)
    phi = TrigTestFunction(2 * np.pi, [(1,)], [1.0], T=1.0)
    eps = 2.0 ** -np.arange(4, 11)
    ev = [chi_diagnostics(phi, spec, quad, e, t=0.25, A=A) for e in eps]
    orders = {name: fit_rate([getattr(x, name) for x in ev], eps) for name in ("dev_0", "dev_t", "dev_x")}
    frac_order = fit_rate([x.frac_gap for x in ev], eps)
    orders_ok = all(0.85 <= o <= 1.15 for o in orders.values())
    frac_ok = abs(frac_order - (2 - spec.alpha)) <= 0.15

    # weak form under joint (eps, dt) refinement
    kernel = simple_kernel()
    grid = TorusGrid(2 * np.pi * 8, 32)
    rho_in = 1 + 0.5 * np.cos(2 * np.pi * grid.x1d / grid.L)
    test = TrigTestFunction(grid.L, [(1,)], [1.0 + 0.5j], T=0.5)
    residuals = []
    for e, dt in ((0.2, 0.02), (0.1, 0.01), (0.05, 0.005), (0.025, 0.0025)):
        run = kinetic_solve(spec, quad, kernel, [1.0], e, grid, 0.5, dt, rho_in=rho_in, snapshot_every=1)
        residuals.append(weak_form_residual(run, test))
    weak_ok = bool(np.all(np.diff(residuals) < 0))
    return orders_ok and frac_ok and weak_ok, {**{f"{k}_order": v for k, v in orders.items()},
                                               "frac_gap_order": frac_order, "weak_residuals": residuals}


CHECKS = (check_constants, check_duality, check_symbols, check_feps, check_coercivity,
          check_kinetic_limit, check_particles, check_chi)


def run_all(selected=None, stream=None) -> list:
    """Run the checks (all, or the 1-based numbers in ``selected``), printing one line each."""
    results = []
    for i, check in enumerate(CHECKS, 1):
        if selected and i not in selected:
            continue
        res = check()
        if stream is not None:
            print(res.line(), file=stream, flush=True)
        results.append(res)
    return results
