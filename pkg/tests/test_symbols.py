import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kinfrac import (EquilibriumSpec, TorusGrid, TrigTestFunction, chi_diagnostics, chi_eps, constant_A,
                     kinetic_solve, limit_constants, simple_kernel, symbol_eps, symbol_limit, weak_form_residual,
                     zero_kernel)
from kinfrac.harness import fit_rate
from kinfrac.symbols import SnapshotDensityError, symbol_eps_discrete, weak_form_terms


def test_symbol_k_zero(spec1):
    for eps in (0.3, 0.05):
        s = symbol_eps(spec1, [1.0], eps, [0.0], 2.0)
        assert s.real_part == pytest.approx(2.0 / (1 + eps ** 1.5 * 2.0), rel=1e-12)
        assert s.imag_part == pytest.approx(0.0, abs=1e-14)


def test_symbol_c_zero_has_no_imaginary_part(spec1, spec2):
    assert abs(symbol_eps(spec1, [0.0], 0.1, [1.0], 1.0).imag_part) <= 1e-12
    assert abs(symbol_eps(spec2, [0.0, 0.0], 0.1, [1.0, 0.5], 1.0).imag_part) <= 1e-12


def test_symbol_limit_values(spec1, quad1, spec2):
    c = limit_constants(spec1, quad1)
    assert symbol_limit(c, [1.0], [1.0], 1.0) == pytest.approx((2.3328649, 1.5), abs=1e-7)
    assert symbol_limit(c, [1.0], [0.0], 3.0) == (3.0, 0.0)
    s = symbol_eps(spec2, [1.0, 0.0], 0.1, [0.0, 1.0], 1.0)
    assert s.limit_imag == 0.0


def test_symbol_rejects_bad_input(spec1):
    with pytest.raises(ValueError):
        symbol_eps(spec1, [1.0], 0.1, [1.0], 0.0)
    with pytest.raises(ValueError):
        symbol_eps(spec1, [1.0], 0.1, [1.0, 2.0], 1.0)


def test_adaptive_matches_node_sum(spec1, quad1):
    for eps in (0.2, 0.1):
        s = symbol_eps(spec1, [0.7], eps, [1.3], 0.5)
        re, im = symbol_eps_discrete(quad1, [0.7], eps, [1.3], 0.5)
        assert s.real_part == pytest.approx(re, rel=1e-9)
        assert s.imag_part == pytest.approx(im, rel=1e-9)


def test_symbol_converges_to_limit(spec1):
    eps = 2.0 ** -np.arange(3, 11)
    ev = [symbol_eps(spec1, [1.0], e, [1.0], 1.0) for e in eps]
    gaps = np.array([e.gap for e in ev])
    assert np.all(np.diff(gaps) < 0)
    assert fit_rate(gaps, eps) >= min(spec1.alpha - 1, 2 - spec1.alpha) - 0.15
    assert ev[-1].real_part == pytest.approx(1 + constant_A(spec1), abs=0.05)
    assert ev[-1].imag_part == pytest.approx(1.5, abs=0.05)


def test_symbol_2d_converges(spec2):
    gaps = [symbol_eps(spec2, [0.5, 0.5], e, [1.0, 0.0], 1.0).gap for e in (0.1, 0.01, 0.001)]
    assert gaps[0] > gaps[1] > gaps[2]


@settings(max_examples=25, deadline=None)
@given(eps=st.floats(1e-3, 0.5), k=st.floats(-5, 5) | st.floats(-1e-200, 1e-200), p=st.floats(0.01, 10), c=st.floats(-1, 1))
def test_real_part_lower_bound(eps, k, p, c):
    spec = EquilibriumSpec(1, 1.5)
    s = symbol_eps(spec, [c], eps, [k], p)
    assert s.real_part >= p / (1 + eps ** 1.5 * p) * (1 - 1e-12)


# ---------------------------------------------------------------- chi_eps

def test_chi_eps_zero_eps():
    x = np.linspace(-1, 1, 5)
    np.testing.assert_allclose(chi_eps(np.sin, 0.0, x, 3.0), np.sin(x), rtol=1e-14)


def test_chi_eps_affine():
    x, v = np.linspace(-2, 2, 7), np.linspace(-50, 50, 7)
    out = chi_eps(lambda y: 2 + 3 * y, 0.1, x, v)
    np.testing.assert_allclose(out, 2 + 3 * x + 0.1 * 3 * v, rtol=1e-12, atol=1e-12)


def test_chi_eps_affine_2d():
    x = np.array([[0.5, -1.0]])
    v = np.array([[2.0, 3.0]])
    out = chi_eps(lambda y: 1 + y[..., 0] - 2 * y[..., 1], 0.2, x, v, N=2)
    np.testing.assert_allclose(out, 1 + 0.5 + 2 + 0.2 * (2 - 6), rtol=1e-13)


def test_chi_eps_plane_wave():
    k, eps = 1.3, 0.05
    x = np.linspace(0, 3, 4)[:, None]
    v = np.array([-2.0, 0.5, 4.0])[None, :]
    phi = lambda y: np.exp(1j * k * y)
    np.testing.assert_allclose(chi_eps(phi, eps, x, v), np.exp(1j * k * x) / (1 - 1j * eps * v * k), rtol=1e-12)


def test_trig_chi_defining_equation_and_bound():
    phi = TrigTestFunction(2 * np.pi, [(1,), (3,)], [1.0, 0.5 - 0.2j])
    x = np.linspace(0, 2 * np.pi, 17)[:, None]
    v = np.linspace(-100, 100, 21)[None, :]
    for eps in (0.3, 0.01):
        chi = phi.chi(x[..., None], v[..., None], eps)
        # analytic x-derivative of each mode
        ph = phi._phase(x)[:, None, :]
        vk = phi._vdotk(v[..., None])
        dchi = np.real(np.sum(1j * phi.wavevectors[:, 0] * ph * phi.amplitudes / (1 - 1j * eps * vk), -1))
        res = chi - eps * v * dchi - phi(x)[:, None]
        assert np.max(np.abs(res)) <= 1e-8
        assert np.max(np.abs(chi)) <= phi.sup_norm_bound() + 1e-12


def test_trig_chi_matches_quadrature():
    phi = TrigTestFunction(2 * np.pi, [(2,)], [1.0])
    x, v = np.array([0.3, 1.0]), np.array([0.5, -0.4])
    np.testing.assert_allclose(phi.chi(x, v, 0.1), chi_eps(lambda y: phi(y), 0.1, x, v), rtol=1e-10)


def test_trig_validation():
    with pytest.raises(ValueError):
        TrigTestFunction(1.0, [(1, 2)], [1.0])
    with pytest.raises(ValueError):
        TrigTestFunction(1.0, [(1,)], [1.0, 2.0])


def test_chi_diagnostics_constant(spec1, quad1):
    ev = chi_diagnostics(TrigTestFunction(2 * np.pi, [(0,)], [2.0]), spec1, quad1, 0.1)
    assert ev.dev_0 == ev.dev_t == ev.dev_x == 0.0
    np.testing.assert_allclose(ev.frac_term, 0.0, atol=1e-14)


def test_chi_diagnostics_rates(spec1, quad1):
    phi = TrigTestFunction(2 * np.pi, [(1,)], [1.0], T=1.0)
    eps = 2.0 ** -np.arange(5, 10)
    ev = [chi_diagnostics(phi, spec1, quad1, e, t=0.25) for e in eps]
    assert all(x.dev_0 >= 0 and np.all(np.isfinite(x.frac_term)) for x in ev)
    assert fit_rate([x.dev_0 for x in ev], eps) == pytest.approx(1.0, abs=0.15)
    assert fit_rate([x.frac_gap for x in ev], eps) == pytest.approx(2 - spec1.alpha, abs=0.15)


# ---------------------------------------------------------------- weak form

@pytest.fixture(scope="module")
def small_grid():
    return TorusGrid(2 * np.pi * 8, 32)


def test_weak_form_zero_trajectory(spec1, quad1, small_grid):
    run = kinetic_solve(spec1, quad1, simple_kernel(), [1.0], 0.1, small_grid, 0.5, 0.02,
                        rho_in=np.zeros(32), snapshot_every=1)
    phi = TrigTestFunction(small_grid.L, [(1,)], [1.0], T=0.5)
    assert weak_form_residual(run, phi, relative=False) == 0.0


def test_weak_form_equilibrium(spec1, quad1, small_grid):
    run = kinetic_solve(spec1, quad1, zero_kernel(), [0.0], 0.1, small_grid, 0.5, 0.01,
                        rho_in=np.ones(32), snapshot_every=1)
    phi = TrigTestFunction(small_grid.L, [(0,), (1,)], [1.0, 0.5], T=0.5)
    terms = weak_form_terms(run, phi)
    # only the mean mode carries mass: int f dt_phi + int f_in phi(0) reduces to a time-quadrature error
    assert abs(terms["total"]) <= 1e-3 * abs(terms["initial"])


def test_weak_form_decreases_under_refinement(spec1, quad1, small_grid):
    rho_in = 1 + 0.5 * np.cos(2 * np.pi * small_grid.x1d / small_grid.L)
    phi = TrigTestFunction(small_grid.L, [(1,)], [1.0 + 0.5j], T=0.5)
    res = []
    for eps, dt in ((0.2, 0.02), (0.1, 0.01), (0.05, 0.005)):
        run = kinetic_solve(spec1, quad1, simple_kernel(), [1.0], eps, small_grid, 0.5, dt, rho_in=rho_in,
                            snapshot_every=1)
        res.append(weak_form_residual(run, phi))
    assert res[0] > res[1] > res[2]


def test_weak_form_requires_snapshots(spec1, quad1, small_grid):
    run = kinetic_solve(spec1, quad1, simple_kernel(), [1.0], 0.1, small_grid, 0.5, 0.02)
    with pytest.raises(SnapshotDensityError):
        weak_form_residual(run, TrigTestFunction(small_grid.L, [(1,)], [1.0], T=0.5))
