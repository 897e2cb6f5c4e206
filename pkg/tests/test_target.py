import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from csgld.errors import InvalidInputError
from csgld.target import (
    energies, energy, energy_minimum, gaussian_mixture, grad_energy, minibatch_eval, mixture_tail_mass,
    benchmark_mixture, posterior_mean, stochastic_gradient, subsampled_regression,
)

from conftest import U_AT_4, U_AT_MINUS_6


def test_energy_at_modes(quiet_mixture):
    # independently: -log(0.4 phi(10) + 0.6 phi(0)) with phi the standard normal pdf
    phi = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    assert energy(quiet_mixture, [4.0]) == pytest.approx(-math.log(0.4 * phi(10) + 0.6 * phi(0)), abs=1e-13)
    assert energy(quiet_mixture, [4.0]) == pytest.approx(U_AT_4, abs=1e-12)
    assert energy(quiet_mixture, [-6.0]) == pytest.approx(U_AT_MINUS_6, abs=1e-12)


def test_energy_is_finite_far_out(quiet_mixture):
    u = energy(quiet_mixture, [1e3])
    assert math.isfinite(u) and u > 4e5


def test_energy_rejects_non_finite(quiet_mixture):
    with pytest.raises(InvalidInputError):
        energy(quiet_mixture, [math.nan])
    with pytest.raises(InvalidInputError):
        energy(quiet_mixture, [1.0, 2.0])


def test_minimizer_is_a_minimum(quiet_mixture):
    umin = energy_minimum(quiet_mixture)
    assert umin == pytest.approx(U_AT_4, abs=1e-6)
    for delta in np.linspace(-0.5, 0.5, 21):
        assert energy(quiet_mixture, [4.0 + delta]) >= umin - 1e-12


def test_temperature_scales_energy():
    a = benchmark_mixture(0.0, temperature=1.0)
    b = benchmark_mixture(0.0, temperature=2.5)
    assert energy(b, [0.3]) == pytest.approx(2.5 * energy(a, [0.3]), rel=1e-14)


@given(st.floats(-15, 15))
def test_mixture_gradient_matches_finite_differences(x):
    t = benchmark_mixture(0.0)
    h = 1e-5
    fd = (energy(t, [x + h]) - energy(t, [x - h])) / (2 * h)
    g = grad_energy(t, [x])[0]
    assert g == pytest.approx(fd, rel=1e-4, abs=1e-6)


def test_regression_gradient_matches_finite_differences():
    t = subsampled_regression(dataset_size=40, batch_size=40, dimension=3)
    rng = np.random.default_rng(1)
    for _ in range(10):
        x = rng.standard_normal(3)
        g = stochastic_gradient(t, x, rng).grad
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1e-5
            fd = (energy(t, x + e) - energy(t, x - e)) / 2e-5
            assert g[i] == pytest.approx(fd, rel=1e-4)


def test_noise_free_mixture_oracle_is_exact(quiet_mixture):
    ev = stochastic_gradient(quiet_mixture, [4.0], np.random.default_rng(0))
    assert np.array_equal(ev.grad, grad_energy(quiet_mixture, [4.0]))
    assert ev.energy_scaled == ev.energy_stochastic == energy(quiet_mixture, [4.0])


def test_noisy_mixture_oracle_is_seeded(mixture):
    a = stochastic_gradient(mixture, [0.0], np.random.default_rng(7)).grad
    b = stochastic_gradient(mixture, [0.0], np.random.default_rng(7)).grad
    assert np.array_equal(a, b)
    assert not np.array_equal(a, grad_energy(mixture, [0.0]))


def test_noisy_mixture_noise_has_configured_std(mixture):
    rng = np.random.default_rng(3)
    g0 = grad_energy(mixture, [1.0])[0]
    draws = np.array([stochastic_gradient(mixture, [1.0], rng).grad[0] - g0 for _ in range(20000)])
    assert abs(draws.mean()) < 0.005
    assert draws.std() == pytest.approx(0.1, rel=0.03)


def test_full_batch_regression_energy_is_exact():
    t = subsampled_regression(dataset_size=30, batch_size=30, dimension=2)
    x = np.array([0.3, -0.2])
    ev = stochastic_gradient(t, x, np.random.default_rng(0))
    assert ev.energy_scaled == pytest.approx(energy(t, x), rel=1e-14)


def test_minibatch_energy_is_unbiased_exhaustively():
    t = subsampled_regression(dataset_size=8, batch_size=2, dimension=2, data_seed=5)
    x = np.array([0.7, -1.1])
    batches = list(itertools.combinations(range(8), 2))
    assert len(batches) == 28
    mean_energy = math.fsum(minibatch_eval(t, x, list(b)).energy_scaled for b in batches) / len(batches)
    assert mean_energy == pytest.approx(energy(t, x), abs=1e-12)
    mean_grad = sum(t.scale * minibatch_eval(t, x, list(b)).grad for b in batches) / len(batches)
    assert np.allclose(mean_grad, grad_energy(t, x), atol=1e-12)


def test_minibatch_sampler_draws_distinct_indices():
    t = subsampled_regression(dataset_size=8, batch_size=4, dimension=1)
    rng = np.random.default_rng(0)
    seen = set()
    for _ in range(2000):
        idx = rng.choice(8, size=4, replace=False)
        assert len(set(idx.tolist())) == 4
        seen.add(tuple(sorted(idx.tolist())))
    assert len(seen) == math.comb(8, 4)
    assert t.scale == 2.0


def test_target_validation():
    with pytest.raises(InvalidInputError):
        gaussian_mixture([0.5, 0.5], [0.0, 1.0], [1.0, -1.0])
    with pytest.raises(InvalidInputError):
        subsampled_regression(dataset_size=5, batch_size=6)
    with pytest.raises(InvalidInputError):
        benchmark_mixture(gradient_noise_sigma=-1.0)
    with pytest.raises(InvalidInputError):
        benchmark_mixture(temperature=0.0)


def test_posterior_mean_and_tails(quiet_mixture):
    assert posterior_mean(quiet_mixture)[0] == pytest.approx(0.0, abs=1e-15)
    assert mixture_tail_mass(quiet_mixture, -20, 20) < 1e-10
    assert mixture_tail_mass(quiet_mixture, -6, 4) == pytest.approx(0.5, abs=1e-12)


def test_regression_posterior_mean_minimises_energy():
    t = subsampled_regression(dataset_size=200, batch_size=20, dimension=2)
    m = posterior_mean(t)
    assert np.allclose(grad_energy(t, m), 0.0, atol=1e-9)


def test_vectorised_energies_match_scalar(quiet_mixture):
    xs = np.linspace(-10, 10, 17)
    assert np.array_equal(energies(quiet_mixture, xs), [energy(quiet_mixture, [x]) for x in xs])
