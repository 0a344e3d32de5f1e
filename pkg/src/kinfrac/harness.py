"""Epsilon sweeps comparing the kinetic model with its fractional limit.

A sweep runs the kinetic solver for each ``eps`` of a strictly decreasing
list, solves the limit equation once with the same initial density and drift
``u(c)``, and records the relative L2 error of the densities at the comparison
time together with mass drift, micro residual and wall time.
"""
from __future__ import annotations

import csv
import json
import logging
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .collision import drift_u
from .config import RunConfig
from .equilibrium import EquilibriumSpec, VelocityQuadrature, build_velocity_quadrature
from .fractional import limit_constants
from .grid import TorusGrid
from .kernels import get_kernel
from .solvers import kinetic_solve, macro_solve, rel_l2_error

log = logging.getLogger(__name__)

REPORT_COLUMNS = ("epsilon", "rel_l2_error", "mass_drift", "micro_residual", "wall_time_s")


# ---------------------------------------------------------------------------
# building blocks from a configuration


def make_spec(cfg: RunConfig) -> EquilibriumSpec:
    return EquilibriumSpec(cfg.N, cfg.alpha)


def make_quadrature(cfg: RunConfig, spec: Optional[EquilibriumSpec] = None) -> VelocityQuadrature:
    spec = make_spec(cfg) if spec is None else spec
    return build_velocity_quadrature(spec, cfg.core_order, cfg.tail_order, v_max_resolved=cfg.v_max)


def make_grid(cfg: RunConfig) -> TorusGrid:
    return TorusGrid(cfg.L, cfg.n, cfg.N)


def initial_density(cfg: RunConfig):
    """``rho_in`` as a callable on points (``(..., N)``, or scalars in 1-D)."""
    a, m, L, N = cfg.init_amplitude, cfg.init_mode, cfg.L, cfg.N

    def first(x):
        x = np.asarray(x, dtype=float)
        return x[..., 0] if (N > 1 or (x.ndim and x.shape[-1] == 1)) else x

    if cfg.init == "uniform":
        return lambda x: np.ones_like(first(x))
    if cfg.init == "cosine":
        return lambda x: 1.0 + a * np.cos(2 * np.pi * m * first(x) / L)
    if cfg.init == "bump":
        width = L / 16

        def bump(x):
            x = np.asarray(x, dtype=float)
            if N == 1 and not (x.ndim and x.shape[-1] == 1):
                x = x[..., None]
            r2 = np.sum((x - L / 2) ** 2, axis=-1)
            return 1.0 + a * np.exp(-r2 / width ** 2)
        return bump
    raise ValueError(f"unknown initial density {cfg.init!r}")


def initial_field(cfg: RunConfig, grid: TorusGrid) -> np.ndarray:
    return initial_density(cfg)(grid.points)


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepConfig:
    """Base run plus the eps list (strictly decreasing) and comparison time."""

    base: RunConfig
    epsilons: tuple
    time: float
    output_dir: Optional[Path] = None
    seed: Optional[int] = None

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if not eps:
            raise ValueError("empty eps list")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps list must be strictly decreasing")
        pb = get_kernel(self.base.kernel).phi_bound(self.base.c)
        bad = [e for e in eps if e ** (self.base.alpha - 1.0) * pb >= 1.0]
        if bad:
            raise ValueError(f"eps values {bad} violate the contraction condition")
        if not 0 < self.time <= self.base.T:
            raise ValueError("comparison time must lie in (0, T]")
        self.epsilons = eps

    @classmethod
    def from_run_config(cls, cfg: RunConfig) -> "SweepConfig":
        t = cfg.sweep_time if cfg.sweep_time is not None else cfg.T
        out = Path(cfg.output) if cfg.output else None
        return cls(cfg, cfg.sweep_epsilons, t, out, cfg.seed)


@dataclass(frozen=True)
class ReportRow:
    epsilon: float
    rel_l2_error: float
    mass_drift: float
    micro_residual: float
    wall_time_s: float


@dataclass
class ConvergenceReport:
    rows: list
    fitted_rate: Optional[float]
    metadata: dict = field(default_factory=dict)
    partial: bool = False
    failures: dict = field(default_factory=dict)

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([r.epsilon for r in self.rows])

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.rel_l2_error for r in self.rows])

    def strictly_decreasing(self) -> bool:
        e = self.errors
        return bool(np.all(np.diff(e) < 0))


def fit_rate(errors: Sequence[float], epsilons: Sequence[float], curvature_threshold: float = 0.25) -> float:
    """Least-squares slope of ``log(error)`` against ``log(eps)``.

    With four or more points the slopes of the first and last segments are
    compared; if they differ by more than ``curvature_threshold`` the large-eps
    end is treated as pre-asymptotic and only the last three points are fitted.
    """
    e = np.asarray(errors, dtype=float)
    x = np.asarray(epsilons, dtype=float)
    if e.shape != x.shape or e.ndim != 1:
        raise ValueError("errors and epsilons must be 1-D arrays of equal length")
    if len(e) < 3:
        raise ValueError("at least three points are needed for a rate")
    if np.any(e <= 0) or np.any(x <= 0) or not np.all(np.isfinite(e)):
        raise ValueError("errors and epsilons must be positive and finite")
    le, lx = np.log(e), np.log(x)
    if len(np.unique(lx)) < 2:
        raise ValueError("epsilons are degenerate")
    if len(e) >= 4:
        s_first = (le[1] - le[0]) / (lx[1] - lx[0])
        s_last = (le[-1] - le[-2]) / (lx[-1] - lx[-2])
        if abs(s_first - s_last) > curvature_threshold:
            le, lx = le[-3:], lx[-3:]
    return float(np.polyfit(lx, le, 1)[0])


def _time_l2(series, times) -> float:
    s = np.asarray(series)
    return float(np.sqrt(np.trapezoid(s ** 2, times))) if len(s) > 1 else float(s[0])


def run_sweep(config: SweepConfig) -> ConvergenceReport:
    """Kinetic solve per eps against one macroscopic solve; see module docstring.

    ``micro_residual`` is the time-L2 norm ``(int_0^t ||r_eps||^2 ds)^(1/2)``.
    Solver failures for one eps are logged, recorded in ``failures`` and mark
    the report as partial.
    """
    cfg = config.base
    spec = make_spec(cfg)
    quad = make_quadrature(cfg, spec)
    grid = make_grid(cfg)
    kernel = get_kernel(cfg.kernel)
    c = np.asarray(cfg.c, dtype=float)
    rho_in = initial_field(cfg, grid)
    consts = limit_constants(spec, quad)
    u = drift_u(kernel, c, quad, check_tail=False)
    macro = macro_solve(consts, u, grid, rho_in, config.time, cfg.dt, snapshot_times=[config.time]).final

    rows, failures = [], {}
    for eps in config.epsilons:
        t0 = time.perf_counter()
        try:
            run = kinetic_solve(spec, quad, kernel, c, eps, grid, config.time, cfg.dt, rho_in=rho_in)
        except (ArithmeticError, ValueError) as exc:
            log.error("kinetic solve failed for eps=%g: %s", eps, exc)
            failures[eps] = str(exc)
            continue
        d = run.diagnostics
        err = rel_l2_error(run.final.rho, macro)
        rows.append(ReportRow(eps, err, d.mass_drift, _time_l2(d.micro_residual, d.t),
                              time.perf_counter() - t0))
        log.info("eps=%g rel_l2_error=%.3e", eps, err)
    rate = None
    if len(rows) >= 3:
        rate = fit_rate([r.rel_l2_error for r in rows], [r.epsilon for r in rows])
    meta = {
        "alpha": cfg.alpha, "N": cfg.N, "kernel": cfg.kernel, "c": list(cfg.c),
        "grid": {"L": cfg.L, "n": cfg.n}, "time": config.time, "dt": cfg.dt,
        "velocity_nodes": quad.n, "A": consts.A, "B": consts.B, "drift": [float(x) for x in u],
        "config": cfg.to_dict(), "fitted_rate": rate,
    }
    return ConvergenceReport(rows, rate, meta, partial=bool(failures), failures=failures)


# ---------------------------------------------------------------------------
# report files


def _versions() -> dict:
    return {"kinfrac": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def emit_report(report: ConvergenceReport, path) -> Path:
    """Write the report CSV and a JSON sidecar ``<path>.meta.json``.

    Floats are written with ``repr`` (shortest round-tripping form).  The sidecar holds metadata, the fitted rate,
    failures and package versions; it contains no timestamps.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(REPORT_COLUMNS)
            for r in report.rows:
                writer.writerow([repr(float(getattr(r, c))) for c in REPORT_COLUMNS])
        meta = {"metadata": report.metadata, "fitted_rate": report.fitted_rate,
                "partial": report.partial, "failures": {repr(k): v for k, v in report.failures.items()},
                "columns": list(REPORT_COLUMNS), "versions": _versions()}
        sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc
    return path


def read_report(path) -> ConvergenceReport:
    """Inverse of :func:`emit_report` (the sidecar is optional)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != REPORT_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = [ReportRow(*(float(x) for x in row)) for row in reader if row]
    meta_file = sidecar_path(path)
    meta = json.loads(meta_file.read_text()) if meta_file.exists() else {}
    return ConvergenceReport(rows, meta.get("fitted_rate"), meta.get("metadata", {}),
                             meta.get("partial", False), meta.get("failures", {}))
