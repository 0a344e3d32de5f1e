"""Command-line entry point: ``kinfrac <subcommand> [options]``.

Every subcommand reads an optional configuration file (``--config``), applies
``--set key=value`` overrides and subcommand flags, validates the result, and
only then computes.  Outputs are CSV files in the directory ``output.path``.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, format_config, load_config

log = logging.getLogger("kinfrac")


def _write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def _stdout_csv(header, rows):
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def _outdir(cfg: RunConfig) -> Path:
    return Path(cfg.output)


def _x_columns(N):
    return ["x"] if N == 1 else ["x1", "x2"]


def _field_rows(field, t):
    pts = field.grid.points.reshape(-1, field.grid.N)
    vals = field.rho.reshape(-1)
    return [(t, *p, r) for p, r in zip(pts, vals)]


# ---------------------------------------------------------------------------
# subcommands


def cmd_constants(cfg: RunConfig, args) -> int:
    from .harness import make_quadrature, make_spec
    from .fractional import limit_constants

    spec = make_spec(cfg)
    c = limit_constants(spec, make_quadrature(cfg, spec))
    header = ["N", "alpha", "gamma", "A", "B", "c_norm"]
    rows = [(cfg.N, cfg.alpha, c.gamma, c.A, c.B, c.c_norm)]
    _stdout_csv(header, rows)
    _write_csv(_outdir(cfg) / "constants.csv", header, rows)
    return 0


def cmd_equilibrium(cfg: RunConfig, args) -> int:
    from .feps import solve_Feps
    from .harness import make_quadrature, make_spec
    from .kernels import get_kernel

    spec = make_spec(cfg)
    quad = make_quadrature(cfg, spec)
    sol = solve_Feps(spec, quad, get_kernel(cfg.kernel), cfg.c, cfg.epsilon)
    vcols = [f"v{d + 1}" for d in range(spec.N)]
    rows = [(*v, wp, wm, m, f) for v, wp, wm, m, f in
            zip(quad.nodes, quad.weights_plain, quad.weights_M, quad.M, sol.values)]
    path = _write_csv(_outdir(cfg) / "equilibrium.csv", vcols + ["weight_plain", "weight_M", "M", "F_eps"], rows)
    lo, hi = sol.g_bounds()
    print(f"nodes={quad.n} gamma={spec.gamma!r} iterations={sol.iterations} residual={sol.residual:.3e} "
          f"F/M in [{sol.ratio_bounds[0]:.6f}, {sol.ratio_bounds[1]:.6f}] "
          f"certified [{lo:.6f}, {hi:.6f}] -> {path}")
    return 0


def cmd_symbol(cfg: RunConfig, args) -> int:
    from .harness import make_spec
    from .symbols import symbol_eps

    spec = make_spec(cfg)
    header = ["epsilon", "real", "imag", "limit_real", "limit_imag", "gap_real", "gap_imag"]
    rows = []
    for eps in cfg.symbol_epsilons:
        s = symbol_eps(spec, cfg.c, eps, cfg.symbol_k, cfg.symbol_p)
        rows.append((eps, s.real_part, s.imag_part, s.limit_real, s.limit_imag, s.gap_real, s.gap_imag))
    _stdout_csv(header, rows)
    _write_csv(_outdir(cfg) / "symbol.csv", header, rows)
    return 0


def _snapshot_times(cfg):
    return sorted(set(cfg.snapshot_times) | {0.0, cfg.T})


def cmd_solve_kinetic(cfg: RunConfig, args) -> int:
    from .harness import initial_field, make_grid, make_quadrature, make_spec
    from .kernels import get_kernel
    from .solvers import kinetic_solve

    spec = make_spec(cfg)
    quad = make_quadrature(cfg, spec)
    grid = make_grid(cfg)
    run = kinetic_solve(spec, quad, get_kernel(cfg.kernel), cfg.c, cfg.epsilon, grid, cfg.T, cfg.dt,
                        rho_in=initial_field(cfg, grid), snapshot_times=_snapshot_times(cfg))
    rows = [r for s in run.snapshots for r in _field_rows(s.rho, s.t)]
    out = _outdir(cfg)
    p1 = _write_csv(out / "kinetic_snapshots.csv", ["t", *_x_columns(cfg.N), "rho"], rows)
    out.mkdir(parents=True, exist_ok=True)
    p2 = run.diagnostics.to_csv(out / "kinetic_diagnostics.csv")
    d = run.diagnostics
    print(f"steps={len(d.t) - 1} mass_drift={d.mass_drift:.3e} l2_nonincreasing={d.l2_nonincreasing()} "
          f"min_f={min(d.min_f):.3e} -> {p1}, {p2}")
    return 0


def cmd_solve_macro(cfg: RunConfig, args) -> int:
    from .collision import drift_u
    from .fractional import limit_constants
    from .harness import initial_field, make_grid, make_quadrature, make_spec
    from .kernels import get_kernel
    from .solvers import macro_solve

    spec = make_spec(cfg)
    quad = make_quadrature(cfg, spec)
    grid = make_grid(cfg)
    u = drift_u(get_kernel(cfg.kernel), cfg.c, quad)
    run = macro_solve(limit_constants(spec, quad), u, grid, initial_field(cfg, grid), cfg.T, cfg.dt,
                      snapshot_times=_snapshot_times(cfg))
    rows = [r for s in run.snapshots for r in _field_rows(s, s.t)]
    p = _write_csv(_outdir(cfg) / "macro_snapshots.csv", ["t", *_x_columns(cfg.N), "rho"], rows)
    print(f"drift u={[float(x) for x in u]} snapshots={len(run.snapshots)} -> {p}")
    return 0


QUANTILES = (0.5, 0.75, 0.9, 0.95, 0.99, 0.999)


def cmd_particles(cfg: RunConfig, args) -> int:
    from .grid import TorusGrid
    from .harness import initial_density, make_quadrature, make_spec
    from .kernels import get_kernel
    from .particles import empirical_density, simulate

    spec = make_spec(cfg)
    kernel = get_kernel(cfg.kernel)
    quad = None if kernel.assumption_class == "B" else make_quadrature(cfg, spec)
    times = sorted(set(cfg.snapshot_times) | {cfg.T})
    rng = np.random.default_rng(cfg.seed)
    ensembles = simulate(spec, kernel, cfg.c, cfg.epsilon, cfg.n_particles, cfg.T, rng,
                         snapshot_times=times, rho_in=initial_density(cfg), L=cfg.L, quad=quad)
    n_hist = min(cfg.n, 64)
    grid = TorusGrid(cfg.L, n_hist, cfg.N)
    hist_rows, q_rows = [], []
    for ens in ensembles:
        hist_rows += _field_rows(empirical_density(ens, grid), ens.t)
        a = np.linalg.norm(ens.displacements, axis=-1)
        q_rows += [(ens.t, q, float(np.quantile(a, q))) for q in QUANTILES]
    out = _outdir(cfg)
    p1 = _write_csv(out / "particles_histogram.csv", ["t", *_x_columns(cfg.N), "density"], hist_rows)
    p2 = _write_csv(out / "particles_quantiles.csv", ["t", "q", "abs_displacement"], q_rows)
    print(f"n_p={cfg.n_particles} jumps={ensembles[-1].n_jumps} -> {p1}, {p2}")
    return 0


def cmd_sweep(cfg: RunConfig, args) -> int:
    from .harness import SweepConfig, emit_report, run_sweep

    report = run_sweep(SweepConfig.from_run_config(cfg))
    path = emit_report(report, _outdir(cfg) / "sweep_report.csv")
    for r in report.rows:
        print(f"eps={r.epsilon:g} rel_l2_error={r.rel_l2_error:.6e} mass_drift={r.mass_drift:.2e}")
    rate = "n/a" if report.fitted_rate is None else f"{report.fitted_rate:.3f}"
    print(f"fitted rate={rate} partial={report.partial} -> {path}")
    return 1 if report.partial else 0


def cmd_verify(cfg: RunConfig, args) -> int:
    from .acceptance import run_all

    selected = None
    if args.only:
        selected = {int(x) for x in args.only.split(",")}
    results = run_all(selected, stream=sys.stdout)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


COMMANDS = {
    "constants": (cmd_constants, "print A, B, c_norm and gamma as CSV"),
    "equilibrium": (cmd_equilibrium, "velocity quadrature with M and F_eps at the nodes"),
    "symbol": (cmd_symbol, "Fourier-Laplace symbol against its limit over an eps list"),
    "solve-kinetic": (cmd_solve_kinetic, "kinetic solve; density snapshots and diagnostics"),
    "solve-macro": (cmd_solve_macro, "fractional advection-diffusion solve; density snapshots"),
    "particles": (cmd_particles, "velocity-jump Monte Carlo; histograms and displacement quantiles"),
    "sweep": (cmd_sweep, "eps sweep of kinetic vs limit; convergence report"),
    "verify": (cmd_verify, "run the acceptance checks; nonzero exit on failure"),
}

# command-line flag -> config key
FLAG_KEYS = {
    "N": "N", "alpha": "alpha", "epsilon": "epsilon", "kernel": "kernel.name", "c": "c",
    "T": "time.T", "dt": "time.dt", "n_x": "grid.n", "L": "grid.L", "out": "output.path",
    "k": "symbol.k", "p": "symbol.p", "epsilons": "symbol.epsilons", "n_p": "particles.n_p",
    "times": "output.times", "seed": "seed",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kinfrac", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="configuration file (key = value)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
    common.add_argument("--out", help="output directory (output.path)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    common.add_argument("--N", type=str, help="space/velocity dimension, 1 or 2 (N)")
    common.add_argument("--alpha", type=str, help="tail exponent in (1, 2) (alpha)")
    common.add_argument("--epsilon", type=str, help="scaling parameter (epsilon)")
    common.add_argument("--kernel", type=str, help="turning kernel name (kernel.name)")
    common.add_argument("--c", type=str, help="bias vector, comma separated")
    common.add_argument("--T", type=str, help="final time (time.T)")
    common.add_argument("--dt", type=str, help="time step (time.dt)")
    common.add_argument("--n-x", dest="n_x", type=str, help="grid points per dimension, power of two (grid.n)")
    common.add_argument("--L", type=str, help="torus length (grid.L)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "symbol":
            sp.add_argument("--k", type=str, help="wave vector, comma separated")
            sp.add_argument("--p", type=str, help="Laplace variable (> 0)")
            sp.add_argument("--epsilons", type=str, help="comma-separated eps list")
        if name == "particles":
            sp.add_argument("--seed", type=str, required=True, help="RNG seed (required)")
            sp.add_argument("--n-p", dest="n_p", type=str, help="number of particles (particles.n_p)")
            sp.add_argument("--times", type=str, help="snapshot times, comma separated")
        if name in ("solve-kinetic", "solve-macro"):
            sp.add_argument("--times", type=str, help="snapshot times, comma separated")
        if name == "sweep":
            sp.add_argument("--seed", type=str, help="seed recorded in the report metadata (the sweep itself is deterministic)")
        if name == "verify":
            sp.add_argument("--only", type=str, help="comma-separated criterion numbers")
    return parser


def config_from_args(args) -> RunConfig:
    overrides = list(args.set)
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides.append(f"{key}={value}")
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"kinfrac {args.command}: configuration error: {exc}", file=sys.stderr)
        return 2
    log.debug("effective configuration:\n%s", format_config(cfg))
    fn = COMMANDS[args.command][0]
    try:
        return fn(cfg, args)
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"kinfrac {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
