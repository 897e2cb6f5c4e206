"""Energy functions and their stochastic oracles.

Two desk-scale targets are built in:

* ``gaussian-mixture``: an isotropic Gaussian mixture with exact energies and
  optional additive Gaussian noise on the gradient (``N = n = 1``).
* ``subsampled-regression``: synthetic Bayesian linear regression whose energy
  is a sum over ``N`` data points, estimated from uniform mini-batches of size
  ``n`` drawn without replacement.

Throughout, ``pi(x) ~ exp(-U(x) / temperature)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInputError

MIXTURE = "gaussian-mixture"
REGRESSION = "subsampled-regression"
KINDS = (MIXTURE, REGRESSION)

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class TargetSpec:
    """A target distribution together with the data needed to evaluate it.

    Build instances with :func:`gaussian_mixture`, :func:`benchmark_mixture` or
    :func:`subsampled_regression` rather than by hand.
    """

    kind: str
    dimension: int
    temperature: float = 1.0
    dataset_size: int = 1
    batch_size: int = 1
    gradient_noise_sigma: float = 0.0
    # gaussian-mixture
    weights: Optional[np.ndarray] = None
    means: Optional[np.ndarray] = None
    sds: Optional[np.ndarray] = None
    # subsampled-regression
    features: Optional[np.ndarray] = None
    responses: Optional[np.ndarray] = None
    noise_sd: float = 1.0
    prior_precision: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown target kind {self.kind!r}")
        if self.dimension < 1:
            raise InvalidInputError("dimension must be positive")
        if not self.temperature > 0:
            raise InvalidInputError("temperature must be positive")
        if not 0 < self.batch_size <= self.dataset_size:
            raise InvalidInputError("need 0 < batch_size <= dataset_size")
        if not self.gradient_noise_sigma >= 0:
            raise InvalidInputError("gradient_noise_sigma must be nonnegative")

    @property
    def scale(self) -> float:
        """The mini-batch scaling factor N/n."""
        return self.dataset_size / self.batch_size


@dataclass(frozen=True, eq=False)
class GradientEval:
    """Output of one stochastic oracle call.

    ``grad`` is the mini-batch gradient of the stochastic energy, *not* yet
    multiplied by N/n; ``energy_scaled`` already is.
    """

    grad: np.ndarray
    energy_stochastic: float
    energy_scaled: float


def gaussian_mixture(weights, means, sds, temperature=1.0, gradient_noise_sigma=0.0):
    """Isotropic Gaussian mixture target.

    ``means`` may be a 1-D sequence (one scalar mean per component, giving a
    1-D target) or a ``(K, d)`` array.
    """
    weights = np.asarray(weights, dtype=float)
    means = np.asarray(means, dtype=float)
    if means.ndim == 1:
        means = means[:, None]
    sds = np.broadcast_to(np.asarray(sds, dtype=float), weights.shape).copy()
    if weights.ndim != 1 or means.shape[0] != weights.shape[0]:
        raise InvalidInputError("weights and means disagree on the component count")
    if np.any(weights <= 0) or np.any(sds <= 0):
        raise InvalidInputError("mixture weights and sds must be positive")
    weights = weights / weights.sum()
    return TargetSpec(
        kind=MIXTURE,
        dimension=means.shape[1],
        temperature=float(temperature),
        gradient_noise_sigma=float(gradient_noise_sigma),
        weights=weights,
        means=means,
        sds=sds,
    )


def benchmark_mixture(gradient_noise_sigma=0.1, temperature=1.0):
    """The bimodal benchmark 0.4 N(-6, 1) + 0.6 N(4, 1).

    The default gradient noise std of 0.1 corresponds to injected noise with
    variance 0.01.
    """
    return gaussian_mixture(
        [0.4, 0.6], [-6.0, 4.0], [1.0, 1.0],
        temperature=temperature, gradient_noise_sigma=gradient_noise_sigma,
    )


def subsampled_regression(
    dataset_size=1000,
    batch_size=50,
    dimension=2,
    noise_sd=1.0,
    prior_precision=1.0,
    temperature=1.0,
    gradient_noise_sigma=0.0,
    data_seed=0,
):
    """Synthetic Bayesian linear regression ``y = w . z + noise``.

    Features and the true weight vector are standard normal draws from a
    generator seeded with ``data_seed``; the prior on ``w`` is
    ``N(0, I / prior_precision)``.
    """
    rng = np.random.default_rng(data_seed)
    w_true = rng.standard_normal(dimension)
    z = rng.standard_normal((dataset_size, dimension))
    y = z @ w_true + noise_sd * rng.standard_normal(dataset_size)
    return TargetSpec(
        kind=REGRESSION,
        dimension=dimension,
        temperature=float(temperature),
        dataset_size=int(dataset_size),
        batch_size=int(batch_size),
        gradient_noise_sigma=float(gradient_noise_sigma),
        features=z,
        responses=y,
        noise_sd=float(noise_sd),
        prior_precision=float(prior_precision),
    )


def _check_point(target, x):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != target.dimension:
        raise InvalidInputError(f"expected a point of length {target.dimension}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("x must be finite")
    return x


def _logsumexp(a, axis=-1):
    mx = a.max(axis=axis, keepdims=True)
    return (np.log(np.exp(a - mx).sum(axis=axis, keepdims=True)) + mx).squeeze(axis)


def mixture_log_consts(target):
    """Per-component log weight plus Gaussian normaliser."""
    return np.log(target.weights) - 0.5 * target.dimension * (_LOG_2PI + np.log(target.sds ** 2))


def _mixture_log_terms(target, xs):
    # xs: (M, d) -> per-component log densities (M, K)
    sq = ((xs[:, None, :] - target.means[None, :, :]) ** 2).sum(axis=-1)
    return mixture_log_consts(target) - 0.5 * sq / target.sds ** 2


def energies(target: TargetSpec, xs) -> np.ndarray:
    """Full-data energy at each row of ``xs`` (shape ``(M, d)``, or ``(M,)`` for d = 1)."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1 and target.dimension == 1:
        xs = xs[:, None]
    if target.kind == MIXTURE:
        return -target.temperature * _logsumexp(_mixture_log_terms(target, xs), axis=1)
    resid = target.responses[None, :] - xs @ target.features.T
    data = 0.5 * (resid ** 2).sum(axis=1) / target.noise_sd ** 2
    return data + 0.5 * target.prior_precision * (xs ** 2).sum(axis=1)


def energy(target: TargetSpec, x) -> float:
    """Full-data energy U(x).

    For the mixture this is ``-temperature * log pi(x)`` evaluated in the log
    domain, so it stays finite far from both modes.
    """
    x = _check_point(target, x)
    return float(energies(target, x[None, :])[0])


def grad_energy(target: TargetSpec, x) -> np.ndarray:
    """Exact gradient of U at ``x``."""
    x = _check_point(target, x)
    if target.kind == MIXTURE:
        logs = _mixture_log_terms(target, x[None, :])[0]
        resp = np.exp(logs - _logsumexp(logs))
        pulls = (x[None, :] - target.means) / (target.sds ** 2)[:, None]
        return target.temperature * (resp[:, None] * pulls).sum(axis=0)
    z, y = target.features, target.responses
    return z.T @ (z @ x - y) / target.noise_sd ** 2 + target.prior_precision * x


def minibatch_eval(target: TargetSpec, x, idx) -> GradientEval:
    """Deterministic regression oracle on the mini-batch given by ``idx``.

    The prior term is split evenly over mini-batches, so that
    ``E[(N/n) * energy_stochastic] = U(x)`` under uniform sampling.
    """
    if target.kind != REGRESSION:
        raise InvalidInputError("mini-batches only exist for the regression target")
    x = _check_point(target, x)
    idx = np.asarray(idx)
    z, y = target.features[idx], target.responses[idx]
    frac = len(idx) / target.dataset_size
    resid = z @ x - y
    s2 = target.noise_sd ** 2
    e = 0.5 * float(resid @ resid) / s2 + frac * 0.5 * target.prior_precision * float(x @ x)
    g = z.T @ resid / s2 + frac * target.prior_precision * x
    return GradientEval(grad=g, energy_stochastic=e, energy_scaled=target.dataset_size / len(idx) * e)


def stochastic_gradient(target: TargetSpec, x, rng: np.random.Generator) -> GradientEval:
    """One call of the stochastic oracle.

    RNG draw order: the mini-batch indices (regression only), then the
    additive gradient noise (only when ``gradient_noise_sigma > 0``).
    """
    x = _check_point(target, x)
    if target.kind == MIXTURE:
        u = energy(target, x)
        ev = GradientEval(grad=grad_energy(target, x), energy_stochastic=u, energy_scaled=u)
    elif target.batch_size == target.dataset_size:
        ev = minibatch_eval(target, x, np.arange(target.dataset_size))
    else:
        idx = rng.choice(target.dataset_size, size=target.batch_size, replace=False)
        ev = minibatch_eval(target, x, idx)
    if target.gradient_noise_sigma > 0:
        noise = target.gradient_noise_sigma * rng.standard_normal(target.dimension)
        ev = GradientEval(ev.grad + noise, ev.energy_stochastic, ev.energy_scaled)
    return ev


def posterior_mean(target: TargetSpec) -> np.ndarray:
    """Exact mean of pi.

    Tempering leaves the mean unchanged for both built-in targets (the mixture
    density does not depend on the temperature; the regression posterior is
    Gaussian).
    """
    if target.kind == MIXTURE:
        return target.weights @ target.means
    z, y = target.features, target.responses
    s2 = target.noise_sd ** 2
    prec = z.T @ z / s2 + target.prior_precision * np.eye(target.dimension)
    return np.linalg.solve(prec, z.T @ y / s2)


def energy_minimum(target: TargetSpec) -> float:
    """Global minimum of U (closed form for regression, refined search for the mixture)."""
    if target.kind == REGRESSION:
        return energy(target, posterior_mean(target))
    from scipy.optimize import minimize

    best = min(
        (minimize(lambda v: energy(target, v), mu, jac=lambda v: grad_energy(target, v)) for mu in target.means),
        key=lambda r: r.fun,
    )
    return float(best.fun)


def mixture_tail_mass(target: TargetSpec, lo: float, hi: float) -> float:
    """Mass of a 1-D mixture outside ``[lo, hi]``."""
    if target.kind != MIXTURE or target.dimension != 1:
        raise InvalidInputError("tail mass is only available for 1-D mixtures")
    mu, sd = target.means[:, 0], target.sds
    below = 0.5 * np.array([math.erfc((m - lo) / (s * math.sqrt(2))) for m, s in zip(mu, sd)])
    above = 0.5 * np.array([math.erfc((hi - m) / (s * math.sqrt(2))) for m, s in zip(mu, sd)])
    return float(target.weights @ (below + above))
