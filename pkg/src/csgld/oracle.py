"""Quadrature ground truth for 1-D targets.

Integrals over subregions are computed with the composite trapezoid rule on
a uniform grid refined by the points where U crosses a partition boundary,
so every sub-interval lies inside a single region and the indicator never
cuts a trapezoid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidGridError, InvalidInputError, InvalidStateError
from .partition import EnergyPartition, indices_of, log_psi
from .target import MIXTURE, REGRESSION, TargetSpec, energies, mixture_tail_mass, posterior_mean
from .theta import ThetaEstimate

TAIL_TOLERANCE = 1e-10
PSI_MODES = ("interpolated", "piecewise")


@dataclass(frozen=True)
class QuadratureGrid:
    lo: float = -20.0
    hi: float = 20.0
    points: int = 200_001

    def __post_init__(self):
        if not self.hi > self.lo:
            raise InvalidInputError("grid needs lo < hi")
        if self.points < 1000:
            raise InvalidInputError("grid needs at least 1000 points")

    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.points)

    def refined(self) -> "QuadratureGrid":
        """Grid with halved spacing (nests the current nodes)."""
        return QuadratureGrid(self.lo, self.hi, 2 * self.points - 1)


def tail_mass(target: TargetSpec, lo: float, hi: float) -> float:
    """Mass of pi outside ``[lo, hi]`` for a 1-D target."""
    if target.dimension != 1:
        raise InvalidInputError("the quadrature oracle handles 1-D targets only")
    if target.kind == MIXTURE:
        return mixture_tail_mass(target, lo, hi)
    # the tempered regression posterior is Gaussian
    z = target.features[:, 0]
    prec = (z @ z / target.noise_sd ** 2 + target.prior_precision) / target.temperature
    mean, sd = float(posterior_mean(target)[0]), 1.0 / math.sqrt(prec)
    return 0.5 * math.erfc((mean - lo) / (sd * math.sqrt(2))) + 0.5 * math.erfc((hi - mean) / (sd * math.sqrt(2)))


@dataclass(frozen=True, eq=False)
class _RegionQuadrature:
    nodes: np.ndarray      # refined abscissae
    energy: np.ndarray     # U at the nodes
    labels: np.ndarray     # region (1-based) of each interval
    widths: np.ndarray
    m: int
    u_min: float = field(default=0.0)

    def integrate(self, values: np.ndarray, interval_factor=None) -> np.ndarray:
        """Per-region trapezoid integrals of a function sampled at ``nodes``.

        ``interval_factor`` multiplies each interval's trapezoid; it carries
        factors that are constant per region (and jump at the boundaries).
        """
        pieces = 0.5 * (values[:-1] + values[1:]) * self.widths
        if interval_factor is not None:
            pieces = pieces * interval_factor
        return np.bincount(self.labels - 1, weights=pieces, minlength=self.m)


@lru_cache(maxsize=32)
def _region_quadrature(target: TargetSpec, p: EnergyPartition, grid: QuadratureGrid) -> _RegionQuadrature:
    mass_out = tail_mass(target, grid.lo, grid.hi)
    if not mass_out < TAIL_TOLERANCE:
        raise InvalidGridError(f"grid [{grid.lo}, {grid.hi}] misses target mass {mass_out:.3g}")
    x = grid.nodes()
    u = energies(target, x)
    j = indices_of(p, u)
    bounds = p.boundaries
    crossings = []
    for c in np.nonzero(j[1:] != j[:-1])[0]:
        lo_idx, hi_idx = sorted((j[c], j[c + 1]))
        for b in range(lo_idx, hi_idx):
            level = bounds[b - 1]
            f = lambda t, level=level: float(energies(target, np.array([t]))[0]) - level
            crossings.append(brentq(f, x[c], x[c + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    if crossings:
        x = np.union1d(x, np.asarray(crossings))
        u = energies(target, x)
    mids = energies(target, 0.5 * (x[:-1] + x[1:]))
    return _RegionQuadrature(
        nodes=x, energy=u, labels=indices_of(p, mids), widths=np.diff(x), m=p.m, u_min=float(u.min()),
    )


def region_masses(target, p, grid, log_weight=None) -> np.ndarray:
    """Unnormalised per-region integrals of ``exp(-(U - U_min)/tau + log_weight(U))``."""
    q = _region_quadrature(target, p, grid)
    logs = -(q.energy - q.u_min) / target.temperature
    if log_weight is not None:
        logs = logs + log_weight(q.energy)
    return q.integrate(np.exp(logs))


def theta_star(target: TargetSpec, p: EnergyPartition, grid: QuadratureGrid = QuadratureGrid()) -> ThetaEstimate:
    """Probability of each subregion under pi."""
    masses = region_masses(target, p, grid)
    if np.any(masses <= 0):
        empty = (np.nonzero(masses <= 0)[0] + 1).tolist()
        raise InvalidStateError(f"regions {empty} carry no mass on the grid; check u1 and the grid range")
    return ThetaEstimate(masses / masses.sum())


def _log_flattening(p, theta, zeta, psi_mode):
    if psi_mode not in PSI_MODES:
        raise InvalidInputError(f"psi_mode must be one of {PSI_MODES}")
    if psi_mode == "piecewise":
        log_t = np.log(np.asarray(getattr(theta, "values", theta), dtype=float))
        return lambda u: -zeta * log_t[indices_of(p, u) - 1]
    return lambda u: -zeta * log_psi(p, theta, u)


def _flattened_integrals(q, target, p, theta, zeta, psi_mode):
    """Per-region integrals of ``exp(-(U - U_min)/tau) / Psi(U)**zeta``.

    Returned as ``(integrals, shift)`` with the true integrals equal to
    ``integrals * exp(shift)``. The interpolated Psi is continuous, so it is
    applied at the nodes; the piecewise-constant Psi jumps at the boundaries,
    where the refined grid has nodes, so it is applied per interval.
    """
    base = -(q.energy - q.u_min) / target.temperature
    if psi_mode == "piecewise":
        log_w = -zeta * np.log(np.asarray(getattr(theta, "values", theta), dtype=float))
        shift = float(log_w.max())
        return q.integrate(np.exp(base), np.exp(log_w - shift)[q.labels - 1]), shift
    logs = base + _log_flattening(p, theta, zeta, psi_mode)(q.energy)
    shift = float(logs.max())
    return q.integrate(np.exp(logs - shift)), shift


@dataclass(frozen=True, eq=False)
class FlattenedDensity:
    x: np.ndarray
    density: np.ndarray
    energy: np.ndarray            # -tau * log(density)
    original_energy: np.ndarray   # -tau * log(pi), pi normalised on the same grid


def flattened_density(target, p, theta, zeta, grid=QuadratureGrid(), psi_mode="interpolated") -> FlattenedDensity:
    """``pi(x) / Psi(U(x))**zeta`` normalised on the grid nodes."""
    flatten = _log_flattening(p, theta, zeta, psi_mode)
    q = _region_quadrature(target, p, grid)
    base = -(q.energy - q.u_min) / target.temperature
    log_norm_pi = math.log(q.integrate(np.exp(base)).sum())
    unit, shift = _flattened_integrals(q, target, p, theta, zeta, psi_mode)
    log_norm = math.log(unit.sum()) + shift
    x = grid.nodes()
    u = energies(target, x)
    base_x = -(u - q.u_min) / target.temperature
    log_dens = base_x + flatten(u) - log_norm
    return FlattenedDensity(
        x=x,
        density=np.exp(log_dens),
        energy=-target.temperature * log_dens,
        original_energy=-target.temperature * (base_x - log_norm_pi),
    )


def energy_barrier(x, energy, left: float, right: float, radius: float = 0.5) -> float:
    """Highest energy between two modes minus the lower of the two mode-neighbourhood minima."""
    x, energy = np.asarray(x), np.asarray(energy)
    between = (x >= left) & (x <= right)
    near_left = np.abs(x - left) <= radius
    near_right = np.abs(x - right) <= radius
    if not (between.any() and near_left.any() and near_right.any()):
        raise InvalidInputError("grid does not cover the requested modes")
    return float(energy[between].max() - min(energy[near_left].min(), energy[near_right].min()))


def mean_field(target, p, theta, zeta, grid=QuadratureGrid(), psi_mode="interpolated") -> np.ndarray:
    """``h(theta) = E[theta(J)**zeta * (e_J - theta)]`` under the flattened density.

    Uses the exact index J (full-data energy) and the continuous-time
    invariant measure.
    """
    values = np.asarray(getattr(theta, "values", theta), dtype=float)
    _log_flattening(p, theta, zeta, psi_mode)  # validates psi_mode
    q = _region_quadrature(target, p, grid)
    masses = _flattened_integrals(q, target, p, theta, zeta, psi_mode)[0]
    masses = masses / masses.sum()
    visit = values ** zeta * masses
    return visit - values * visit.sum()


@dataclass
class StabilityReport:
    zeta: float
    s: np.ndarray           # <h(theta), theta - theta_star> per trial
    r: np.ndarray           # s / |theta - theta_star|^2
    thetas: np.ndarray
    theta_star: np.ndarray

    @property
    def max_s(self) -> float:
        return float(self.s.max())

    @property
    def max_r(self) -> float:
        return float(self.r.max())

    @property
    def fraction_negative(self) -> float:
        return float(np.mean(self.s < 0))

    @property
    def failures(self) -> np.ndarray:
        """Trial thetas where the inner product is not negative."""
        return self.thetas[self.s >= 0]


def stability_check(target, p, zeta, grid=QuadratureGrid(), trials=100, rng=None,
                    psi_mode="interpolated", floor=1e-12) -> StabilityReport:
    """Evaluate the drift inner product at uniformly random simplex points."""
    if trials < 1:
        raise InvalidInputError("trials must be positive")
    rng = np.random.default_rng(rng)
    star = theta_star(target, p, grid).values
    thetas = np.maximum(rng.dirichlet(np.ones(p.m), size=trials), floor)
    thetas /= thetas.sum(axis=1, keepdims=True)
    s = np.empty(trials)
    r = np.empty(trials)
    for t, th in enumerate(thetas):
        diff = th - star
        s[t] = float(mean_field(target, p, th, zeta, grid, psi_mode) @ diff)
        r[t] = s[t] / float(diff @ diff)
    return StabilityReport(zeta=zeta, s=s, r=r, thetas=thetas, theta_star=star)
