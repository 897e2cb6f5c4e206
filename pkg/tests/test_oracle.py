import math

import numpy as np
import pytest
from scipy.optimize import brentq

from csgld.errors import InvalidGridError, InvalidInputError, InvalidStateError
from csgld.oracle import (
    QuadratureGrid, energy_barrier, flattened_density, mean_field, region_masses, stability_check, tail_mass,
    theta_star,
)
from csgld.partition import EnergyPartition
from csgld.target import gaussian_mixture, benchmark_mixture, subsampled_regression
from csgld.theta import ThetaEstimate

from conftest import random_simplex

# Regression fixture: theta_star for the benchmark mixture, m=50, u1=2, delta_u=1
# (trapezoid on 200001 points refined by the boundary crossings; stable to 1e-9
# under doubling the grid).
STAR50_HEAD = [0.60229671, 0.30110456, 0.06759163, 0.01973559, 0.0062112, 0.00202986]


def test_theta_star_fixture(star50):
    assert np.allclose(star50.values[:6], STAR50_HEAD, rtol=0, atol=5e-9)
    assert math.fsum(star50.values) == pytest.approx(1.0, abs=1e-12)


def test_theta_star_converges_under_refinement(mixture, p50, grid, star50):
    fine = theta_star(mixture, p50, grid.refined())
    assert np.abs(fine.values - star50.values).max() < 1e-8


def test_theta_star_decays_geometrically(star50):
    v = star50.values[1:20]
    ratios = v[1:] / v[:-1]
    # roughly geometric; the ratio dips where the inter-mode interval runs out (barrier top ~13.44)
    assert np.all(ratios < 1) and np.all(ratios > 0.1)
    assert np.median(ratios) == pytest.approx(0.34, abs=0.03)
    assert np.all(np.diff(np.log(v)) < 0)


def test_theta_star_against_closed_form_gaussian():
    # standard Gaussian: U(x) = x^2/2 + c, so region masses are differences of chi-square CDFs
    t = gaussian_mixture([1.0], [0.0], [1.0])
    c = 0.5 * math.log(2 * math.pi)
    p = EnergyPartition(4, c + 0.5, 1.0)
    star = theta_star(t, p).values
    edges = [0.0] + [2 * (b - c) for b in p.boundaries] + [math.inf]
    chi2 = lambda s: math.erf(math.sqrt(s / 2)) if math.isfinite(s) else 1.0
    exact = [chi2(hi) - chi2(lo) for lo, hi in zip(edges[:-1], edges[1:])]
    assert np.allclose(star, exact, rtol=0, atol=1e-8)


def test_single_region_and_two_regions(mixture):
    assert theta_star(mixture, EnergyPartition(1, 0.0, 1.0)).values.tolist() == [1.0]
    two = theta_star(mixture, EnergyPartition(2, 3.0, 1.0)).values
    assert two.sum() == pytest.approx(1.0, abs=1e-15) and 0 < two[1] < two[0]


def test_empty_regions_are_reported(mixture):
    with pytest.raises(InvalidStateError, match="regions \\[1, 2\\]"):
        theta_star(mixture, EnergyPartition(50, 0.0, 1.0))


def test_grid_must_cover_the_target(mixture, p50):
    with pytest.raises(InvalidGridError):
        theta_star(mixture, p50, QuadratureGrid(-8.0, 8.0))
    with pytest.raises(InvalidInputError):
        QuadratureGrid(1.0, 0.0)
    with pytest.raises(InvalidInputError):
        QuadratureGrid(0.0, 1.0, 10)


def test_tail_mass_of_regression_posterior():
    t = subsampled_regression(dimension=1)
    assert tail_mass(t, -5, 5) < 1e-10
    with pytest.raises(InvalidInputError):
        tail_mass(subsampled_regression(dimension=2), -5, 5)


def test_flattening_with_zero_zeta_or_uniform_theta_is_pi(mixture, p50, star50, grid):
    for theta, zeta in [(star50, 0.0), (ThetaEstimate.uniform(50), 0.75)]:
        f = flattened_density(mixture, p50, theta, zeta, grid)
        assert np.allclose(f.energy, f.original_energy, rtol=0, atol=1e-9)


def test_original_barrier_is_about_twelve(mixture, p50, star50, grid):
    f = flattened_density(mixture, p50, star50, 0.75, grid)
    assert energy_barrier(f.x, f.original_energy, -6, 4) == pytest.approx(12.0104, abs=1e-3)


def test_flattened_barrier_is_much_lower(mixture, p50, star50, grid):
    f = flattened_density(mixture, p50, star50, 0.75, grid)
    flat = energy_barrier(f.x, f.energy, -6, 4)
    assert flat < 3.0  # the acceptance suite pins the tighter target
    f1 = flattened_density(mixture, p50, star50, 1.0, grid)
    assert energy_barrier(f1.x, f1.energy, -6, 4) < flat


def test_energy_barrier_validation():
    x = np.linspace(-1, 1, 11)
    with pytest.raises(InvalidInputError):
        energy_barrier(x, x ** 2, -6, 4)


def test_mean_field_sums_to_zero(mixture, p10):
    rng = np.random.default_rng(0)
    for _ in range(20):
        theta = random_simplex(rng, 10)
        assert abs(mean_field(mixture, p10, theta, 0.75).sum()) < 1e-10


def test_mean_field_at_zero_zeta_is_closed_form(mixture, p10, star10):
    rng = np.random.default_rng(1)
    for _ in range(20):
        theta = random_simplex(rng, 10)
        assert np.allclose(mean_field(mixture, p10, theta, 0.0), star10.values - theta, rtol=0, atol=1e-8)


def test_mean_field_vanishes_at_theta_star_for_piecewise_psi(mixture, p50, star50):
    for zeta in (0.75, 1.0):
        h = mean_field(mixture, p50, star50, zeta, psi_mode="piecewise")
        assert np.abs(h).max() < 1e-12


def test_mean_field_at_theta_star_with_interpolated_psi_is_a_discretisation_effect(mixture, star50, grid):
    # the residual shrinks as the bandwidth shrinks
    norms = []
    for du in (1.0, 0.5, 0.25):
        p = EnergyPartition(int(50 / du), 2.0, du)
        star = theta_star(mixture, p, grid)
        norms.append(np.abs(mean_field(mixture, p, star, 1.0, grid)).sum())
    assert norms[0] > norms[1] > norms[2]


def test_symmetric_two_region_mean_field_is_zero():
    t = gaussian_mixture([0.5, 0.5], [-3.0, 3.0], [1.0, 1.0])
    g = QuadratureGrid(-15, 15, 100_001)
    u_med = brentq(lambda u: theta_star(t, EnergyPartition(2, u, 1.0), g).values[0] - 0.5, 1.7, 6.0, xtol=1e-13)
    p = EnergyPartition(2, u_med, 1.0)
    assert np.abs(mean_field(t, p, [0.5, 0.5], 0.75, g)).max() < 1e-9


def test_stability_at_zero_zeta_has_unit_ratio(mixture, p10):
    rep = stability_check(mixture, p10, 0.0, trials=100, rng=0)
    assert np.allclose(rep.r, -1.0, rtol=0, atol=1e-6)
    assert rep.fraction_negative == 1.0


def test_stability_report_contents(mixture, p10, star10):
    rep = stability_check(mixture, p10, 0.75, trials=30, rng=3)
    assert rep.thetas.shape == (30, 10) and np.allclose(rep.thetas.sum(axis=1), 1)
    assert np.array_equal(rep.theta_star, star10.values)
    assert rep.failures.shape[0] == int(np.sum(rep.s >= 0))
    with pytest.raises(InvalidInputError):
        stability_check(mixture, p10, 0.75, trials=0)


def test_piecewise_stability_is_exact(mixture, p10):
    # with a piecewise-constant Psi the drift is (theta_star - theta) / Z, so s < 0 always
    rep = stability_check(mixture, p10, 0.75, trials=100, rng=0, psi_mode="piecewise")
    assert rep.fraction_negative == 1.0


def test_region_masses_with_weight(mixture, p10, grid):
    plain = region_masses(mixture, p10, grid)
    doubled = region_masses(mixture, p10, grid, lambda u: np.full_like(u, math.log(2.0)))
    assert np.allclose(doubled, 2 * plain, rtol=1e-14)
