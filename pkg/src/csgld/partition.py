"""Energy-space partition, subregion indices and the interpolated weight curve.

Subregions are indexed 1..m. Region ``i`` holds the energies
``u_{i-1} < U <= u_i`` with ``u_0 = -inf`` and ``u_m = +inf``; the finite
boundaries are ``u_i = u1 + (i - 1) * delta_u`` for ``i = 1..m-1``.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidInputError, InvalidStateError


@dataclass(frozen=True)
class EnergyPartition:
    m: int
    u1: float
    delta_u: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise InvalidInputError("m must be a positive integer")
        if not self.delta_u > 0:
            raise InvalidInputError("delta_u must be positive")
        if not math.isfinite(self.u1):
            raise InvalidInputError("u1 must be finite")

    @cached_property
    def boundaries(self) -> tuple:
        """The finite boundaries u_1 < ... < u_{m-1}."""
        return tuple(self.u1 + i * self.delta_u for i in range(self.m - 1))

    @cached_property
    def _boundary_array(self) -> np.ndarray:
        return np.asarray(self.boundaries, dtype=float)

    def lower(self, i: int) -> float:
        """Lower boundary u_{i-1} of region ``i`` (``-inf`` for region 1)."""
        return -math.inf if i == 1 else self.boundaries[i - 2]

    def upper(self, i: int) -> float:
        """Upper boundary u_i of region ``i`` (``+inf`` for region m)."""
        return math.inf if i == self.m else self.boundaries[i - 1]


def _theta_values(theta) -> np.ndarray:
    values = getattr(theta, "values", theta)
    values = np.asarray(values, dtype=float)
    if np.any(~(values > 0)):
        raise InvalidStateError("theta must be strictly positive")
    return values


def index_of(p: EnergyPartition, energy: float) -> int:
    """Region index J with ``u_{J-1} < energy <= u_J``."""
    if not math.isfinite(energy):
        raise InvalidInputError(f"energy must be finite, got {energy}")
    return bisect.bisect_left(p.boundaries, energy) + 1


def indices_of(p: EnergyPartition, energies) -> np.ndarray:
    """Vectorised :func:`index_of` (no finiteness check)."""
    return np.searchsorted(p._boundary_array, np.asarray(energies, dtype=float), side="left") + 1


def stochastic_index(p: EnergyPartition, ev) -> int:
    """Biased index computed from the scaled mini-batch energy (N/n) * U~(x)."""
    return index_of(p, ev.energy_scaled)


def log_psi(p: EnergyPartition, theta, u) -> np.ndarray:
    """Vectorised log of the interpolated weight curve.

    Within region ``i`` the log weight moves linearly from log theta(i-1) at
    ``u_{i-1}`` to log theta(i) at ``u_i``. Region 1 is flat at theta(1). Region
    m interpolates over one bandwidth past ``u_{m-1}`` and is flat at
    theta(m) beyond that.
    """
    log_t = np.log(_theta_values(theta))
    u = np.asarray(u, dtype=float)
    j = indices_of(p, u)
    prev = np.maximum(j - 1, 1)
    lower = np.where(j > 1, p.u1 + (j - 2) * p.delta_u, u)
    frac = np.clip((u - lower) / p.delta_u, 0.0, 1.0)
    return log_t[prev - 1] + (log_t[j - 1] - log_t[prev - 1]) * frac


def psi(p: EnergyPartition, theta, u: float) -> float:
    """Interpolated weight curve evaluated at energy ``u``."""
    if not math.isfinite(u):
        raise InvalidInputError("u must be finite")
    return float(np.exp(log_psi(p, theta, u)))


def grad_multiplier(p: EnergyPartition, theta, j: int, zeta: float, tau: float) -> float:
    """The factor ``1 + zeta * tau * (log theta(j) - log theta(max(j-1, 1))) / delta_u``.

    Negative values push the sampler uphill in energy.
    """
    if int(j) != j or not 1 <= j <= p.m:
        raise InvalidInputError(f"region index {j} outside 1..{p.m}")
    values = _theta_values(theta)
    prev = max(j - 1, 1)
    return 1.0 + zeta * tau * (math.log(values[j - 1]) - math.log(values[prev - 1])) / p.delta_u
