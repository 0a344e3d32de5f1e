import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kinfrac import (MacroField, TorusGrid, drift_u, get_kernel, kinetic_solve, limit_constants, macro_solve,
                     micro_residual, rel_l2_error, simple_kernel, solve_Feps, tempered_kernel, zero_kernel)
from kinfrac.feps import ContractionError
from kinfrac.solvers import (RunDiagnostics, SolverDivergenceError, drift_field, first_moment_bound,
                             micro_residual_bound)


@pytest.fixture(scope="module")
def grid():
    return TorusGrid(2 * np.pi * 8, 64)


@pytest.fixture(scope="module")
def rho_in(grid):
    return 1 + 0.5 * np.cos(2 * np.pi * grid.x1d / grid.L)


@pytest.fixture(scope="module")
def consts(spec1, quad1):
    return limit_constants(spec1, quad1)


# ---------------------------------------------------------------- grid

def test_grid_validation():
    with pytest.raises(ValueError):
        TorusGrid(1.0, 100)
    with pytest.raises(ValueError):
        TorusGrid(-1.0, 64)
    with pytest.raises(ValueError):
        TorusGrid(1.0, 64, 3)


def test_parseval_weights(rng):
    for N in (1, 2):
        g = TorusGrid(3.0, 16, N)
        u = rng.normal(size=g.shape)
        assert np.sum(u ** 2) == pytest.approx(np.sum(g.parseval_weights * np.abs(g.rfft(u)) ** 2), rel=1e-12)


# ---------------------------------------------------------------- kinetic solver

def test_global_equilibrium_is_fixed(spec1, quad1, grid):
    run = kinetic_solve(spec1, quad1, zero_kernel(), [0.0], 0.1, grid, 1.0, 0.01, rho_in=np.ones(64))
    np.testing.assert_allclose(run.final.f, np.broadcast_to(quad1.M, (64, quad1.n)), rtol=1e-10, atol=1e-300)


@pytest.mark.parametrize("name", ["zero", "simple", "tempered"])
@pytest.mark.parametrize("eps", [0.2, 0.05])
def test_mass_and_entropy(name, eps, spec1, quad1, grid, rho_in):
    run = kinetic_solve(spec1, quad1, get_kernel(name), [1.0], eps, grid, 0.2, 0.01, rho_in=rho_in)
    d = run.diagnostics
    assert d.all_finite()
    assert d.mass_drift <= 1e-10
    assert d.l2_nonincreasing()
    assert max(d.first_moment) <= first_moment_bound(run) * (1 + 1e-10)


def test_kinetic_2d(spec2, quad2):
    g = TorusGrid(2 * np.pi * 4, 16, 2)
    X = g.points
    rho = 1 + 0.3 * np.cos(2 * np.pi * X[..., 0] / g.L) * np.cos(2 * np.pi * X[..., 1] / g.L)
    run = kinetic_solve(spec2, quad2, simple_kernel(), [0.5, 0.5], 0.1, g, 0.05, 0.01, rho_in=rho)
    assert run.diagnostics.mass_drift <= 1e-10
    assert run.diagnostics.l2_nonincreasing()


def test_snapshots(spec1, quad1, grid, rho_in):
    run = kinetic_solve(spec1, quad1, simple_kernel(), [1.0], 0.1, grid, 0.1, 0.01, rho_in=rho_in,
                        snapshot_times=[0.0, 0.05, 0.1])
    assert [s.t for s in run.snapshots] == pytest.approx([0.0, 0.05, 0.1])
    assert run.state_at(0.05).t == pytest.approx(0.05)
    with pytest.raises(KeyError):
        run.state_at(0.07)
    with pytest.raises(ValueError):
        kinetic_solve(spec1, quad1, simple_kernel(), [1.0], 0.1, grid, 0.1, 0.01, snapshot_times=[0.033])


def test_kinetic_input_validation(spec1, quad1, grid, spec2):
    with pytest.raises(ContractionError):
        kinetic_solve(spec1, quad1, simple_kernel(), [1.0], 1.5, grid, 0.1, 0.01)
    with pytest.raises(ValueError):
        kinetic_solve(spec1, quad1, simple_kernel(), [1.0], 0.1, grid, 0.1, 0.0)
    with pytest.raises(ValueError):
        kinetic_solve(spec1, quad1, simple_kernel(), [1.0], 0.1, grid, 0.1, 0.01, rho_in=np.ones(3))
    with pytest.raises(ValueError):
        kinetic_solve(spec2, quad1, simple_kernel(), [1.0], 0.1, grid, 0.1, 0.01)


def test_non_finite_input_rejected(spec1, quad1, grid):
    f_in = np.broadcast_to(quad1.M, (64, quad1.n)).copy()
    f_in[3, 5] = np.inf
    with pytest.raises(ValueError, match="finite"):
        kinetic_solve(spec1, quad1, simple_kernel(), [1.0], 0.1, grid, 0.05, 0.01, f_in=f_in)


def test_overflow_raises_and_dumps_state(spec1, quad1, grid, tmp_path):
    f_in = np.full((64, quad1.n), 1e305)
    with pytest.raises(SolverDivergenceError) as info:
        kinetic_solve(spec1, quad1, simple_kernel(), [1.0], 0.1, grid, 0.05, 0.01, f_in=f_in, dump_dir=tmp_path)
    dump = np.load(info.value.dump_path)
    assert dump["t"] == 0.0 and dump["f_hat"].shape == grid.spectral_shape + (quad1.n,)


def test_general_kernel_matches_rank_one(spec1, quad1, grid, rho_in):
    # tempered kernel (full-rank gain) through the fixed point and with c=0 against the zero kernel
    a = kinetic_solve(spec1, quad1, tempered_kernel(), [0.0], 0.1, grid, 0.1, 0.01, rho_in=rho_in)
    b = kinetic_solve(spec1, quad1, zero_kernel(), [0.0], 0.1, grid, 0.1, 0.01, rho_in=rho_in)
    np.testing.assert_allclose(a.final.f, b.final.f, rtol=1e-10, atol=1e-14)


def test_split_scheme_with_constant_field_agrees(spec1, quad1, grid, rho_in):
    kernel = tempered_kernel()
    c_field = lambda pts, t: np.ones(pts.shape[:-1] + (1,))
    a = kinetic_solve(spec1, quad1, kernel, None, 0.1, grid, 0.1, 0.005, rho_in=rho_in, c_field=c_field)
    b = kinetic_solve(spec1, quad1, kernel, [1.0], 0.1, grid, 0.1, 0.005, rho_in=rho_in)
    assert a.diagnostics.mass_drift <= 1e-10
    assert rel_l2_error(a.final.rho, b.final.rho) < 1e-3


def test_split_scheme_space_dependent_c(spec1, quad1, grid, rho_in):
    c_field = lambda pts, t: 1.0 + 0.2 * np.sin(2 * np.pi * pts / grid.L)
    run = kinetic_solve(spec1, quad1, tempered_kernel(), None, 0.1, grid, 0.1, 0.01, rho_in=rho_in,
                        c_field=c_field)
    assert run.diagnostics.mass_drift <= 1e-10
    assert run.diagnostics.all_finite()


# ---------------------------------------------------------------- macro solver

def test_macro_constants_are_steady(consts, grid):
    run = macro_solve(consts, [1.5], grid, np.ones(64), 1.0, 0.01)
    np.testing.assert_allclose(run.final.rho, 1.0, atol=1e-14)


def test_macro_exact_mode(consts, grid):
    k = 2 * np.pi * 3 / grid.L
    x = grid.x1d
    t = 0.7
    run = macro_solve(consts, [0.0], grid, 1 + np.cos(k * x), t, 0.01)
    exact = 1 + np.exp(-consts.A * k ** 1.5 * t) * np.cos(k * x)
    np.testing.assert_allclose(run.final.rho, exact, atol=10 * np.finfo(float).eps * 2)


def test_macro_galilean_shift(consts, grid):
    # shift by an integer number of cells so the translation is exact on the grid
    u = 4 * grid.dx
    t = 1.0
    rho0 = 1 + 0.5 * np.cos(2 * np.pi * grid.x1d / grid.L) + 0.2 * np.sin(6 * np.pi * grid.x1d / grid.L)
    moving = macro_solve(consts, [u], grid, rho0, t, 0.01).final.rho
    still = macro_solve(consts, [0.0], grid, rho0, t, 0.01).final.rho
    np.testing.assert_allclose(moving, np.roll(still, 4), atol=1e-13)


def test_macro_field_drift_against_constant(consts, grid, rho_in):
    a = macro_solve(consts, lambda p, t: np.full(p.shape, 1.5), grid, rho_in, 0.5, 0.005).final
    b = macro_solve(consts, [1.5], grid, rho_in, 0.5, 0.005).final
    assert rel_l2_error(a, b) < 1e-8
    assert a.mass == pytest.approx(b.mass, rel=1e-12)


def test_macro_cfl_guard(consts, grid, rho_in):
    with pytest.raises(ValueError, match="advection"):
        macro_solve(consts, lambda p, t: np.full(p.shape, 100.0), grid, rho_in, 0.5, 0.1)


def test_drift_field_linearity(quad1):
    u = drift_field(simple_kernel(), quad1, lambda p, t: 2.0 * np.ones(p.shape))
    np.testing.assert_allclose(u(np.zeros((4, 1)), 0.0), 3.0, rtol=1e-10)


# ---------------------------------------------------------------- metrics

def test_rel_l2_error(grid, rho_in):
    a = MacroField(rho_in, grid, 0.5)
    assert rel_l2_error(a, a) == 0.0
    assert rel_l2_error(MacroField(2 * rho_in, grid, 0.5), a) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        rel_l2_error(a, MacroField(rho_in, grid, 0.4))
    with pytest.raises(ValueError):
        rel_l2_error(a, MacroField(np.ones(32), TorusGrid(grid.L, 32), 0.5))


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(0.01, 100))
def test_rel_l2_homogeneous(scale):
    g = TorusGrid(1.0, 8)
    a = MacroField(np.arange(1.0, 9.0), g)
    assert rel_l2_error(MacroField(scale * a.rho, g), MacroField(scale * np.ones(8), g)) == \
        pytest.approx(rel_l2_error(a, MacroField(np.ones(8), g)), rel=1e-12)


def test_micro_residual_trivial_cases(spec1, quad1, grid, rho_in):
    sol = solve_Feps(spec1, quad1, simple_kernel(), [1.0], 0.1)
    run = kinetic_solve(spec1, quad1, simple_kernel(), [1.0], 0.1, grid, 0.0, 0.01,
                        f_in=rho_in[:, None] * sol.values)
    n1, _ = micro_residual(run.final, sol)
    assert n1 <= 1e-12
    sol0 = solve_Feps(spec1, quad1, zero_kernel(), [1.0], 0.1)
    run0 = kinetic_solve(spec1, quad1, zero_kernel(), [1.0], 0.1, grid, 0.0, 0.01, rho_in=np.ones(64))
    assert micro_residual(run0.final, sol0)[1] <= 1e-12


def test_micro_residual_bound_holds(spec1, quad1, grid, rho_in):
    for eps in (0.2, 0.1, 0.05):
        run = kinetic_solve(spec1, quad1, simple_kernel(), [1.0], eps, grid, 0.2, 0.01, rho_in=rho_in)
        d = run.diagnostics
        time_l2 = np.sqrt(np.trapezoid(np.square(d.micro_residual), d.t))
        assert time_l2 <= micro_residual_bound(run)


def test_diagnostics_csv(tmp_path):
    d = RunDiagnostics()
    d.append(t=0, mass=1, l2_weighted=2, micro_residual=0, first_moment=1.5, min_f=0.1)
    d.append(t=0.1, mass=1, l2_weighted=1.9, micro_residual=0.2, first_moment=1.5, min_f=0.1)
    data = np.loadtxt(d.to_csv(tmp_path / "d.csv"), delimiter=",", skiprows=1)
    assert data.shape == (2, 6)
    assert d.mass_drift == 0.0 and d.l2_nonincreasing()
