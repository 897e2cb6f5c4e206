"""Averaging and importance-weighted averaging estimators."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


def _neumaier(total, comp, value):
    t = total + value
    if abs(total) >= abs(value):
        comp += (total - t) + value
    else:
        comp += (value - t) + total
    return t, comp


@dataclass
class WeightedAccumulator:
    """Running ratio ``sum(w_i * f_i) / sum(w_i)`` with compensated sums.

    Each weight must be the theta**zeta value of the estimate that was
    current when the sample was produced; weights are never revised later.
    """

    weighted_sum: float = 0.0
    weight_sum: float = 0.0
    count: int = 0
    _ws_comp: float = 0.0
    _w_comp: float = 0.0

    def add(self, f_value: float, weight: float) -> "WeightedAccumulator":
        if not weight > 0 or not math.isfinite(weight):
            raise InvalidInputError(f"importance weight must be positive and finite, got {weight}")
        self.weighted_sum, self._ws_comp = _neumaier(self.weighted_sum, self._ws_comp, weight * f_value)
        self.weight_sum, self._w_comp = _neumaier(self.weight_sum, self._w_comp, weight)
        self.count += 1
        return self

    @property
    def total_weighted(self) -> float:
        return self.weighted_sum + self._ws_comp

    @property
    def total_weight(self) -> float:
        return self.weight_sum + self._w_comp

    @property
    def estimate(self) -> float:
        if self.count == 0:
            return math.nan
        return self.total_weighted / self.total_weight

    def merge(self, other: "WeightedAccumulator") -> "WeightedAccumulator":
        """Pool two chains by summing fields."""
        out = WeightedAccumulator()
        for acc in (self, other):
            out.weighted_sum, out._ws_comp = _neumaier(out.weighted_sum, out._ws_comp, acc.weighted_sum)
            out._ws_comp += acc._ws_comp
            out.weight_sum, out._w_comp = _neumaier(out.weight_sum, out._w_comp, acc.weight_sum)
            out._w_comp += acc._w_comp
            out.count += acc.count
        return out


def accumulate(acc: WeightedAccumulator, f_value: float, theta_weight: float) -> WeightedAccumulator:
    """Add one sample to ``acc`` in place and return it."""
    return acc.add(f_value, theta_weight)


def plain_average(values) -> float:
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise InvalidInputError("cannot average an empty sequence")
    return math.fsum(values) / values.size


def z_theta_star(theta_star, zeta: float) -> float:
    """Normaliser ``sum_i theta(i)**(1 - zeta)`` of the flattened target."""
    values = np.asarray(getattr(theta_star, "values", theta_star), dtype=float)
    return math.fsum(values ** (1.0 - zeta))
