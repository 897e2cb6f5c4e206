"""Stochastic-approximation estimate of the subregion probabilities."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidStateError

DEFAULT_FLOOR = 1e-12


@dataclass(eq=False)
class ThetaEstimate:
    """A point of the open probability simplex.

    ``clamps`` counts how many updates had to clamp a component to the
    positivity floor and renormalise.
    """

    values: np.ndarray
    clamps: int = field(default=0)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 1:
            raise InvalidStateError("theta must be a non-empty vector")
        if np.any(~(self.values > 0)):
            raise InvalidStateError("theta components must be strictly positive")

    @classmethod
    def uniform(cls, m: int) -> "ThetaEstimate":
        return cls(np.full(m, 1.0 / m))

    @property
    def m(self) -> int:
        return self.values.size

    def copy(self) -> "ThetaEstimate":
        return ThetaEstimate(self.values.copy(), self.clamps)

    def __getitem__(self, j: int) -> float:
        """1-based component access."""
        return float(self.values[j - 1])


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``omega_k = A / (k**alpha + B)``."""

    A: float = 1.0
    alpha: float = 0.6
    B: float = 100.0

    def __post_init__(self):
        if self.A < 0:
            raise InvalidInputError("A must be nonnegative")
        if not 0.5 < self.alpha <= 1.0:
            raise InvalidInputError("alpha must lie in (0.5, 1]")
        if self.B < 0:
            raise InvalidInputError("B must be nonnegative")


def step_size(s: StepSchedule, k: int) -> float:
    if k < 1:
        raise InvalidInputError("step index starts at 1")
    return s.A / (k ** s.alpha + s.B)


def _check_update_args(theta, j_tilde, omega):
    if int(j_tilde) != j_tilde or not 1 <= j_tilde <= theta.m:
        raise InvalidInputError(f"region index {j_tilde} outside 1..{theta.m}")
    if not 0 <= omega < 1:
        raise InvalidInputError("omega must lie in [0, 1)")


def _enforce_floor(values, clamps, floor):
    if values.min() >= floor:
        return ThetaEstimate(values, clamps)
    values = np.maximum(values, floor)
    return ThetaEstimate(values / values.sum(), clamps + 1)


def random_field(theta: ThetaEstimate, j_tilde: int, zeta: float) -> np.ndarray:
    """Increment direction ``theta(j)**zeta * (e_j - theta)``; sums to zero on the simplex."""
    h = -theta.values * theta[j_tilde] ** zeta
    h[j_tilde - 1] += theta[j_tilde] ** zeta
    return h


def sa_update(theta: ThetaEstimate, j_tilde: int, omega: float, zeta: float,
              floor: float = DEFAULT_FLOOR) -> ThetaEstimate:
    """One stochastic-approximation step ``theta + omega * random_field``.

    The update is a convex combination of ``theta`` and the vertex ``e_j``, so
    it stays on the simplex whenever ``omega * theta(j)**zeta < 1``. A zero
    step returns ``theta`` unchanged (no floor is applied).
    """
    _check_update_args(theta, j_tilde, omega)
    if omega == 0:
        return theta.copy()
    gain = omega * theta[j_tilde] ** zeta
    values = theta.values - gain * theta.values
    values[j_tilde - 1] += gain
    return _enforce_floor(values, theta.clamps, floor)


def sa_update_regularized(theta: ThetaEstimate, j_tilde: int, omega: float, zeta: float,
                          rho: float, floor: float = DEFAULT_FLOOR) -> ThetaEstimate:
    """Update with a prior-count regulariser.

    Components ``i >= j_tilde`` get the extra gain ``omega**2 * rho``. That
    breaks the sum-to-one identity by ``O(omega**2)`` when ``j_tilde > 1``;
    the result is renormalised. With ``rho = 0`` this is exactly
    :func:`sa_update`.
    """
    if rho < 0:
        raise InvalidInputError("rho must be nonnegative")
    if rho == 0:
        return sa_update(theta, j_tilde, omega, zeta, floor)
    _check_update_args(theta, j_tilde, omega)
    if omega == 0:
        return theta.copy()
    t = theta.values
    gain = np.full(t.size, omega * theta[j_tilde] ** zeta)
    gain[j_tilde - 1:] += omega * omega * rho
    indicator = np.zeros(t.size)
    indicator[j_tilde - 1] = 1.0
    values = t + gain * (indicator - t)
    total = values.sum()
    if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-15):
        values = values / total
    return _enforce_floor(values, theta.clamps, floor)
