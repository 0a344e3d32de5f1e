import math

import numpy as np
import pytest
from scipy import stats

from kinfrac import (EquilibriumSpec, TorusGrid, empirical_density, sample_from_M, sample_post_jump, simulate,
                     simple_kernel, tempered_kernel, zero_kernel)
from kinfrac.feps import ContractionError
from kinfrac.particles import ParticleEnsemble, jump_rate, sample_positions
from kinfrac.acceptance import tail_slope

N_DRAWS = 1_000_000


@pytest.fixture(scope="module")
def draws(spec1):
    return sample_from_M(spec1, np.random.default_rng(2024), N_DRAWS)[:, 0]


def within_3_sigma(sample, expected):
    return abs(sample.mean() - expected) <= 3 * sample.std(ddof=1) / math.sqrt(len(sample))


def test_core_probability(draws, spec1):
    inside = (np.abs(draws) <= 1).astype(float)
    assert 2 * spec1.gamma == pytest.approx(0.6)
    assert within_3_sigma(inside, 0.6)


def test_mean_speed_and_symmetry(draws, spec1):
    # |v| has infinite variance; use the quadrature-free closed form with a truncated comparison
    R = 1e4
    trunc = np.minimum(np.abs(draws), R)
    expected = 2 * spec1.gamma * (0.5 + (1 - R ** (1 - spec1.alpha)) / (spec1.alpha - 1)) + \
        R * 2 * spec1.gamma / spec1.alpha * R ** -spec1.alpha
    assert within_3_sigma(trunc, expected)
    # the untruncated mean converges slowly (infinite variance) towards int |v| M dv = 1.5
    assert np.mean(np.abs(draws)) == pytest.approx(spec1.first_moment, rel=0.05)
    assert within_3_sigma(np.sign(draws), 0.0)


def test_2d_samples_isotropic(spec2):
    v = sample_from_M(spec2, np.random.default_rng(1), 200_000)
    assert v.shape == (200_000, 2)
    inside = (np.linalg.norm(v, axis=1) <= 1).astype(float)
    assert within_3_sigma(inside, spec2.core_mass)
    for d in range(2):
        assert within_3_sigma(np.sign(v[:, d]), 0.0)


def test_single_draw_shape(spec1, spec2):
    assert sample_from_M(spec1, np.random.default_rng(0)).shape == (1,)
    assert sample_from_M(spec2, np.random.default_rng(0)).shape == (2,)


def test_post_jump_zero_kernel_is_M(spec1):
    rng_a, rng_b = np.random.default_rng(5), np.random.default_rng(5)
    v_prev = np.ones((1000, 1))
    a = sample_post_jump(spec1, zero_kernel(), [1.0], 0.1, v_prev, rng_a)
    b = sample_from_M(spec1, rng_b, 1000)
    # with zero bias every proposal is accepted; the acceptance uniform is drawn after the proposal
    np.testing.assert_array_equal(a, b)


def test_post_jump_tilt_and_acceptance(spec1):
    eps = 0.1
    s = eps ** 0.5
    v, acc = sample_post_jump(spec1, simple_kernel(), [1.0], eps, np.zeros((400_000, 1)),
                              np.random.default_rng(3), return_stats=True)
    assert within_3_sigma(np.sign(v[:, 0]), s)  # int (v/|v|)^2 M dv = 1
    assert acc >= (1 - s) / (1 + s)
    assert acc == pytest.approx(1 / (1 + s), abs=5e-3)


def test_post_jump_contraction(spec1):
    with pytest.raises(ContractionError):
        sample_post_jump(spec1, simple_kernel(), [1.0], 2.0, np.zeros((3, 1)), np.random.default_rng(0))


def test_jump_rate(spec1, quad1):
    v = np.array([[0.5], [-3.0]])
    np.testing.assert_array_equal(jump_rate(spec1, simple_kernel(), [1.0], 0.1, v), 1.0)
    r = jump_rate(spec1, tempered_kernel(), [1.0], 0.1, v, quad1)
    assert np.all(r > 0) and not np.allclose(r, 1.0)
    with pytest.raises(ValueError):
        jump_rate(spec1, tempered_kernel(), [1.0], 0.1, v)


def test_sample_positions(rng):
    L = 10.0
    x = sample_positions(lambda y: 1 + 0.9 * np.cos(2 * np.pi * y / L), L, 1, 100_000, rng)
    assert np.all((0 <= x) & (x < L))
    assert within_3_sigma(np.cos(2 * np.pi * x[:, 0] / L), 0.45)
    with pytest.raises(ValueError):
        sample_positions(lambda y: -np.ones_like(y), L, 1, 10, rng, rho_max=1.0)


def test_simulation_deterministic(spec1):
    runs = [simulate(spec1, simple_kernel(), [1.0], 0.1, 2000, 0.3, np.random.default_rng(11),
                     snapshot_times=[0.1, 0.3]) for _ in range(2)]
    for a, b in zip(*runs):
        np.testing.assert_array_equal(a.positions, b.positions)
        np.testing.assert_array_equal(a.velocities, b.velocities)
        assert a.n_jumps == b.n_jumps


def test_simulation_conserves_particles(spec1):
    ens = simulate(spec1, zero_kernel(), [0.0], 0.1, 3000, 0.2, np.random.default_rng(2),
                   snapshot_times=[0.0, 0.1, 0.2])
    assert [e.n_p for e in ens] == [3000] * 3
    np.testing.assert_array_equal(ens[0].displacements, 0.0)
    assert all(np.all(np.isfinite(e.positions)) for e in ens)


def test_velocity_marginal_stays_M(spec1):
    eps = 0.1
    T = 6 * eps ** spec1.alpha  # six expected jumps
    v = simulate(spec1, zero_kernel(), [0.0], eps, 50_000, T, np.random.default_rng(8))[-1].velocities[:, 0]
    edges = np.array([0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0, 10.0, 100.0, np.inf])
    counts = np.histogram(np.abs(v), edges)[0]
    cdf = lambda r: np.where(r <= 1, 2 * spec1.gamma * r, 1 - 2 * spec1.gamma / spec1.alpha * np.power(
        np.maximum(r, 1.0), -spec1.alpha))
    probs = np.diff(np.where(np.isinf(edges), 1.0, cdf(np.where(np.isinf(edges), 1.0, edges))))
    probs[-1] = 1 - cdf(100.0)
    assert stats.chisquare(counts, probs * len(v)).pvalue > 0.05


def test_biased_drift(spec1):
    eps, T, n = 0.05, 0.5, 50_000
    ens = simulate(spec1, simple_kernel(), [1.0], eps, n, T, np.random.default_rng(21))[-1]
    d = ens.displacements[:, 0]
    assert abs(d.mean() - 1.5 * T) <= 3 * d.std(ddof=1) / math.sqrt(n)


def test_levy_tail(spec1):
    ens = simulate(spec1, zero_kernel(), [0.0], 0.05, 50_000, 0.5, np.random.default_rng(4))[-1]
    assert tail_slope(ens.displacements) == pytest.approx(-spec1.alpha, abs=0.1)


def test_simulate_validation(spec1):
    with pytest.raises(ValueError):
        simulate(spec1, simple_kernel(), [1.0, 0.0], 0.1, 10, 0.1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        simulate(spec1, simple_kernel(), [1.0], 0.1, 0, 0.1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        simulate(spec1, simple_kernel(), [1.0], 0.1, 10, 0.1, np.random.default_rng(0), snapshot_times=[0.5])


# ---------------------------------------------------------------- histograms

def ensemble(pos):
    pos = np.asarray(pos, dtype=float)
    return ParticleEnsemble(pos, np.zeros_like(pos), 0.0, np.zeros_like(pos))


def test_histogram_single_cell():
    g = TorusGrid(8.0, 8)
    rho = empirical_density(ensemble(np.full((50, 1), 3.1)), g).rho
    expected = np.zeros(8)
    expected[3] = 1 / g.dx
    np.testing.assert_allclose(rho, expected)


def test_histogram_mass_and_wrap():
    g = TorusGrid(8.0, 16)
    pos = np.random.default_rng(0).normal(scale=20, size=(1000, 1))
    f = empirical_density(ensemble(pos), g, mass=2.5)
    assert f.mass == pytest.approx(2.5, rel=1e-14)


def test_histogram_uniform_within_bands():
    g = TorusGrid(1.0, 16)
    n = 160_000
    pos = np.random.default_rng(9).random((n, 1))
    counts = empirical_density(ensemble(pos), g).rho * g.dx * n
    p = 1 / 16
    assert np.all(np.abs(counts - n * p) <= 3 * math.sqrt(n * p * (1 - p)))


def test_histogram_errors():
    with pytest.raises(ValueError):
        empirical_density(ensemble(np.zeros((0, 1))), TorusGrid(1.0, 4))
    with pytest.raises(ValueError):
        empirical_density(ensemble(np.zeros((3, 2))), TorusGrid(1.0, 4))
