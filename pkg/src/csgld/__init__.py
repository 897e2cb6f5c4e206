"""Contour stochastic gradient Langevin dynamics and its baselines.

The public surface is split by concern:

* :mod:`csgld.target` -- energies and stochastic oracles,
* :mod:`csgld.partition` -- the energy-space partition and the interpolated Psi,
* :mod:`csgld.theta` -- stochastic-approximation updates of the region weights,
* :mod:`csgld.dynamics` -- SGLD / CSGLD / KSGLD / SGHMC / CSGHMC kernels,
* :mod:`csgld.estimators` -- plain and importance-weighted averages,
* :mod:`csgld.oracle` -- quadrature ground truth for 1-D targets,
* :mod:`csgld.config`, :mod:`csgld.runner`, :mod:`csgld.cli` -- the experiment harness.
"""
from .dynamics import ChainState, KernelConfig, RunRecord, csgld_iterate, csgld_step, sgld_step
from .errors import ConfigError, DivergenceError, InvalidGridError, InvalidInputError, InvalidStateError
from .partition import EnergyPartition, grad_multiplier, index_of, psi
from .target import TargetSpec, benchmark_mixture, energy, gaussian_mixture, stochastic_gradient, subsampled_regression
from .theta import StepSchedule, ThetaEstimate, sa_update, sa_update_regularized, step_size

__version__ = "0.1.0"

__all__ = [
    "ChainState", "ConfigError", "DivergenceError", "EnergyPartition", "InvalidGridError", "InvalidInputError",
    "InvalidStateError", "KernelConfig", "RunRecord", "StepSchedule", "TargetSpec", "ThetaEstimate",
    "benchmark_mixture", "csgld_iterate", "csgld_step", "energy", "gaussian_mixture", "grad_multiplier", "index_of",
    "psi", "sa_update", "sa_update_regularized", "sgld_step", "step_size", "stochastic_gradient",
    "subsampled_regression",
]
