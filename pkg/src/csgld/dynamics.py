"""Sampling kernels: SGLD, CSGLD, KSGLD, SGHMC and CSGHMC.

All kernels move with the scaled stochastic gradient ``(N/n) * grad U~``.
The contour variants multiply it by the factor from
:func:`csgld.partition.grad_multiplier`; KSGLD is CSGLD with theta frozen.

RNG draw order per iteration is fixed so runs are reproducible: the Langevin
noise for the move, then the oracle draws at the new position (mini-batch
indices, then gradient noise).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import partition as part
from .errors import DivergenceError, InvalidInputError
from .estimators import WeightedAccumulator
from .partition import EnergyPartition
from .target import GradientEval, TargetSpec, stochastic_gradient
from .theta import DEFAULT_FLOOR, StepSchedule, ThetaEstimate, sa_update, sa_update_regularized, step_size

KINDS = ("sgld", "csgld", "ksgld", "sghmc", "csghmc")
MOMENTUM_KINDS = ("sghmc", "csghmc")
CONTOUR_KINDS = ("csgld", "ksgld", "csghmc")


@dataclass(frozen=True)
class KernelConfig:
    kind: str = "csgld"
    epsilon: float = 0.1
    zeta: float = 0.75
    momentum: float = 0.0
    lr_decay: float = 1.0
    lr_decay_every: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown kernel kind {self.kind!r}")
        if self.epsilon < 0:
            raise InvalidInputError("epsilon must be nonnegative")
        if self.zeta < 0:
            raise InvalidInputError("zeta must be nonnegative")
        if not 0 <= self.momentum < 1:
            raise InvalidInputError("momentum must lie in [0, 1)")
        if not 0 < self.lr_decay <= 1:
            raise InvalidInputError("lr_decay must lie in (0, 1]")
        if self.lr_decay_every < 1:
            raise InvalidInputError("lr_decay_every must be positive")

    def learning_rate(self, k: int) -> float:
        """Learning rate used by iteration ``k`` (1-based); geometric decay per block."""
        if self.lr_decay == 1.0:
            return self.epsilon
        return self.epsilon * self.lr_decay ** ((k - 1) // self.lr_decay_every)


@dataclass(eq=False)
class ChainState:
    x: np.ndarray
    v: Optional[np.ndarray] = None
    k: int = 0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(-1)
        if self.v is not None:
            self.v = np.asarray(self.v, dtype=float).reshape(-1)

    @classmethod
    def start(cls, x0, kernel: KernelConfig) -> "ChainState":
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        v0 = np.zeros_like(x0) if kernel.kind in MOMENTUM_KINDS else None
        return cls(x0, v0, 0)


@dataclass(frozen=True, eq=False)
class RunRecord:
    """Trajectory row for step ``k``.

    ``multiplier`` is computed from the estimate after the step-``k`` update
    and applies to the move out of ``x``. ``running_estimate`` covers the
    post-burn-in samples seen so far (NaN during burn-in).
    """

    step: int
    x: np.ndarray
    energy_scaled: float
    j_tilde: int
    multiplier: float
    theta_j: float
    weight: float
    running_estimate: float
    theta: Optional[np.ndarray] = None


def _checked(x, v, k):
    if not np.all(np.isfinite(x)) or (v is not None and not np.all(np.isfinite(v))):
        raise DivergenceError(k)


def _langevin(state, target, cfg, rng, ev, mult):
    k = state.k + 1
    eps = cfg.learning_rate(k)
    e = rng.standard_normal(target.dimension)
    x = state.x - (eps * target.scale * mult) * ev.grad + math.sqrt(2.0 * target.temperature * eps) * e
    _checked(x, None, k)
    return ChainState(x, None, k)


def _hamiltonian(state, target, cfg, rng, ev, mult):
    # v' = beta v - eps (N/n) mult grad + sqrt(2 tau eps (1 - beta)) e ;  x' = x + v'
    if state.v is None:
        raise InvalidInputError("momentum kernels need a chain state with momentum")
    k = state.k + 1
    eps = cfg.learning_rate(k)
    beta = cfg.momentum
    e = rng.standard_normal(target.dimension)
    v = beta * state.v - (eps * target.scale * mult) * ev.grad \
        + math.sqrt(2.0 * target.temperature * eps * (1.0 - beta)) * e
    x = state.x + v
    _checked(x, v, k)
    return ChainState(x, v, k)


def _oracle(state, target, rng, ev):
    return ev if ev is not None else stochastic_gradient(target, state.x, rng)


def _finite_oracle(target, x, rng, k):
    # a finite but huge x can still overflow the energy; that is divergence too
    with np.errstate(over="ignore", invalid="ignore"):
        ev = stochastic_gradient(target, x, rng)
    if not (math.isfinite(ev.energy_scaled) and np.all(np.isfinite(ev.grad))):
        raise DivergenceError(k)
    return ev


def sgld_step(state: ChainState, target: TargetSpec, cfg: KernelConfig, rng,
              ev: Optional[GradientEval] = None) -> ChainState:
    """Plain SGLD move. ``ev`` may carry a precomputed oracle call at ``state.x``."""
    return _langevin(state, target, cfg, rng, _oracle(state, target, rng, ev), 1.0)


def csgld_step(state: ChainState, theta: ThetaEstimate, p: EnergyPartition, target: TargetSpec,
               cfg: KernelConfig, rng, ev: Optional[GradientEval] = None):
    """Contour SGLD move; returns ``(new_state, j_tilde, multiplier)``."""
    ev = _oracle(state, target, rng, ev)
    j = part.stochastic_index(p, ev)
    mult = part.grad_multiplier(p, theta, j, cfg.zeta, target.temperature)
    return _langevin(state, target, cfg, rng, ev, mult), j, mult


def ksgld_step(state: ChainState, theta_star: ThetaEstimate, p: EnergyPartition, target: TargetSpec,
               cfg: KernelConfig, rng, ev: Optional[GradientEval] = None) -> ChainState:
    """CSGLD move with theta held at a known value."""
    return csgld_step(state, theta_star, p, target, cfg, rng, ev)[0]


def sghmc_step(state: ChainState, target: TargetSpec, cfg: KernelConfig, rng,
               ev: Optional[GradientEval] = None) -> ChainState:
    return _hamiltonian(state, target, cfg, rng, _oracle(state, target, rng, ev), 1.0)


def csghmc_step(state: ChainState, theta: ThetaEstimate, p: EnergyPartition, target: TargetSpec,
                cfg: KernelConfig, rng, ev: Optional[GradientEval] = None):
    """Momentum variant of :func:`csgld_step`; returns ``(new_state, j_tilde, multiplier)``."""
    ev = _oracle(state, target, rng, ev)
    j = part.stochastic_index(p, ev)
    mult = part.grad_multiplier(p, theta, j, cfg.zeta, target.temperature)
    return _hamiltonian(state, target, cfg, rng, ev, mult), j, mult


def _first_coordinate(x):
    return float(x[0])


def csgld_iterate(
    initial: ChainState,
    theta0: ThetaEstimate,
    steps: int,
    target: TargetSpec,
    p: EnergyPartition,
    kernel: KernelConfig,
    schedule: StepSchedule,
    rng,
    sink: Optional[Callable[[RunRecord], None]] = None,
    thinning: int = 1,
    rho: float = 0.0,
    floor: float = DEFAULT_FLOOR,
    burn_in: int = 0,
    observable: Callable = _first_coordinate,
):
    """Run any kernel for ``steps`` iterations; returns ``(final_state, final_theta)``.

    Each iteration samples ``x_{k+1}`` with ``theta_k`` and the index of
    ``x_k``, evaluates the oracle at ``x_{k+1}`` (the same mini-batch later
    drives the next move), then updates theta with that index and
    ``omega_{k+1}``. A non-finite position, energy or gradient raises
    :class:`DivergenceError` with the step index. Non-contour kernels skip the
    multiplier and the update;
    ``ksgld`` keeps ``theta0`` frozen. ``sink`` receives a record every
    ``thinning`` steps.
    """
    if steps < 1 or thinning < 1:
        raise InvalidInputError("steps and thinning must be positive")
    contour = kernel.kind in CONTOUR_KINDS
    adapt = kernel.kind in ("csgld", "csghmc")
    move = _hamiltonian if kernel.kind in MOMENTUM_KINDS else _langevin
    tau, zeta = target.temperature, kernel.zeta

    if initial.v is None and kernel.kind in MOMENTUM_KINDS:
        initial = replace(initial, v=np.zeros_like(initial.x))
    state, theta = initial, theta0.copy()
    acc = WeightedAccumulator()
    ev = _finite_oracle(target, state.x, rng, state.k)
    j = part.stochastic_index(p, ev)
    for k in range(state.k + 1, state.k + steps + 1):
        mult = part.grad_multiplier(p, theta, j, zeta, tau) if contour else 1.0
        state = move(state, target, kernel, rng, ev, mult)
        ev = _finite_oracle(target, state.x, rng, k)
        j = part.stochastic_index(p, ev)
        if adapt:
            omega = step_size(schedule, k)
            if rho > 0:
                theta = sa_update_regularized(theta, j, omega, zeta, rho, floor)
            else:
                theta = sa_update(theta, j, omega, zeta, floor)
        weight = theta[j] ** zeta if contour else 1.0
        if k > burn_in:
            acc.add(observable(state.x), weight)
        if sink is not None and k % thinning == 0:
            sink(RunRecord(
                step=k,
                x=state.x.copy(),
                energy_scaled=ev.energy_scaled,
                j_tilde=j,
                multiplier=part.grad_multiplier(p, theta, j, zeta, tau) if contour else 1.0,
                theta_j=theta[j],
                weight=weight,
                running_estimate=acc.estimate,
                theta=theta.values.copy(),
            ))
    return state, theta
