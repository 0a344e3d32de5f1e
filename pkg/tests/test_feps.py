import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kinfrac import ContractionError, feps_derivative_bounds, get_kernel, simple_kernel, solve_Feps, zero_kernel
from kinfrac.collision import CollisionOperator
from kinfrac.feps import feps_field

CONTRACTIVE = ("zero", "simple", "tempered", "incoming")


def test_zero_kernel_gives_M(spec1, quad1):
    sol = solve_Feps(spec1, quad1, zero_kernel(), [1.0], 0.1)
    np.testing.assert_array_equal(sol.values, quad1.M * sol.G)
    np.testing.assert_allclose(sol.values, quad1.M, rtol=1e-15)
    assert sol.iterations == 1


@pytest.mark.parametrize("eps", [0.3, 0.1, 0.01])
def test_simple_kernel_closed_form(eps, spec1, quad1, spec2, quad2):
    for spec, quad, c in ((spec1, quad1, np.array([1.0])), (spec2, quad2, np.array([0.6, 0.2]))):
        sol = solve_Feps(spec, quad, simple_kernel(), c, eps)
        closed = quad.M * (1 + eps ** (spec.alpha - 1) * (quad.directions @ c))
        np.testing.assert_allclose(sol.values, closed, rtol=1e-12, atol=1e-300)
        assert sol.residual < 1e-12


@pytest.mark.parametrize("name", CONTRACTIVE)
@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
def test_solution_invariants(name, eps, spec1, quad1):
    kernel = get_kernel(name)
    c = np.array([1.0])
    sol = solve_Feps(spec1, quad1, kernel, c, eps)
    lo, hi = sol.g_bounds()
    assert np.all(sol.G >= lo - 1e-14) and np.all(sol.G <= hi + 1e-14)
    assert abs(sol.values @ quad1.weights_plain - 1) <= 1e-10
    op = CollisionOperator(quad1, kernel, c, eps)
    assert np.sum(quad1.weights_plain * np.abs(op(sol.values))) <= 1e-12
    # relative deviation from M is of size eps^(alpha-1)
    s, pb = sol.scale, kernel.phi_bound(c)
    mu3 = 2 * pb / (1 - s * pb)
    assert np.max(np.abs(sol.G - 1)) <= s * mu3 + 1e-14


def test_contraction_violation(spec1, quad1):
    with pytest.raises(ContractionError):
        solve_Feps(spec1, quad1, simple_kernel(), [1.0], 1.5)
    with pytest.raises(ValueError):
        solve_Feps(spec1, quad1, simple_kernel(), [1.0], 0.1, tol=0.0)


@settings(max_examples=15, deadline=None)
@given(c=st.floats(-1.4, 1.4), eps=st.floats(0.02, 0.2))
def test_field_matches_pointwise(c, eps):
    from kinfrac import EquilibriumSpec, build_velocity_quadrature
    spec = EquilibriumSpec(1, 1.5)
    quad = build_velocity_quadrature(spec, 16, 16)
    k = get_kernel("tempered")
    F = feps_field(quad, k, np.array([[c]]), eps)[0]
    np.testing.assert_allclose(F, solve_Feps(spec, quad, k, [c], eps).values, rtol=1e-12)


def test_derivative_bounds_constant_c(spec1, quad1):
    dt, dx = feps_derivative_bounds(spec1, quad1, get_kernel("tempered"), lambda x, t: np.array([1.0]), 0.1)
    assert dt <= 1e-8 and dx <= 1e-8


def test_derivative_bounds_scale_like_eps_power(spec1):
    from kinfrac import build_velocity_quadrature
    quad = build_velocity_quadrature(spec1, 32, 32)
    kernel = get_kernel("tempered")
    cf = lambda x, t: np.array([1.0 + 0.1 * np.sin(x[0]) * (1 + t)])
    eps = np.array([0.1, 0.05, 0.025])
    b = np.array([feps_derivative_bounds(spec1, quad, kernel, cf, e) for e in eps])
    for j in range(2):
        slope = np.polyfit(np.log(eps), np.log(b[:, j]), 1)[0]
        assert slope == pytest.approx(spec1.alpha - 1, abs=0.05)
    b_half = np.array(feps_derivative_bounds(spec1, quad, kernel, cf, 0.1, fd_step=5e-5))
    np.testing.assert_allclose(b_half, b[0], rtol=1e-2)


def test_derivative_bounds_reject_unclassified_kernel(spec1, quad1):
    with pytest.raises(ValueError):
        feps_derivative_bounds(spec1, quad1, get_kernel("incoming"), lambda x, t: np.array([1.0]), 0.1)
