"""Single-chain driver shared by the harness.

``run_chain`` returns the same :class:`ChainResult` whichever backend runs
the chain: the compiled loop in :mod:`csgld._fastmix` (1-D mixtures) or the
reference :func:`csgld.dynamics.csgld_iterate` (everything else).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _fastmix as fm
from .dynamics import ChainState, KernelConfig, RunRecord, csgld_iterate
from .errors import DivergenceError
from .estimators import _neumaier
from .partition import EnergyPartition
from .target import MIXTURE, TargetSpec, mixture_log_consts
from .theta import DEFAULT_FLOOR, StepSchedule, ThetaEstimate

RECORD_COLUMNS = ("step", "x", "energy_scaled", "j_tilde", "multiplier", "theta_j", "importance_weight",
                  "running_estimate")
_CHUNK = 1 << 16


@dataclass(eq=False)
class ChainResult:
    kind: str
    steps: int
    records: np.ndarray        # (rows, 8), columns as RECORD_COLUMNS
    theta_trace: np.ndarray    # (rows, m), theta after the update at each recorded step
    final_x: np.ndarray
    final_theta: np.ndarray
    estimate: float            # post-burn-in (weighted) average of x[0]
    count: int                 # post-burn-in sample count
    marks: np.ndarray          # (n_marks, 4): step, cumulative sum w*f, cumulative sum w, count
    visits: np.ndarray         # post-burn-in visits per region
    min_multiplier: float
    first_negative_step: int   # -1 when the multiplier never went negative
    clamps: int
    diverged_step: Optional[int] = None

    def window_estimate(self, lo_step: int, hi_step: int) -> float:
        """Estimate over steps ``lo_step+1 .. hi_step``; both must be mark steps (0 allowed for lo)."""
        steps = self.marks[:, 0]

        def cum(step):
            if step == 0:
                return 0.0, 0.0
            row = self.marks[np.searchsorted(steps, step)]
            if row[0] != step:
                raise KeyError(step)
            return row[1], row[2]

        s_hi, w_hi = cum(hi_step)
        s_lo, w_lo = cum(lo_step)
        return (s_hi - s_lo) / (w_hi - w_lo)


def fast_path_available(target: TargetSpec) -> bool:
    return target.kind == MIXTURE and target.dimension == 1


def run_chain(
    target: TargetSpec,
    p: EnergyPartition,
    kernel: KernelConfig,
    schedule: StepSchedule,
    theta0: ThetaEstimate,
    x0,
    steps: int,
    rng: np.random.Generator,
    thinning: int = 1,
    rho: float = 0.0,
    floor: float = DEFAULT_FLOOR,
    burn_in: int = 0,
    marks=(),
    fast: Optional[bool] = None,
) -> ChainResult:
    """Run one chain. ``fast=None`` picks the compiled loop when it applies."""
    marks = np.unique(np.asarray(marks, dtype=np.int64))
    marks = marks[(marks >= 1) & (marks <= steps)]
    if fast is None:
        fast = fast_path_available(target)
    runner = _run_fast if fast else _run_reference
    return runner(target, p, kernel, schedule, theta0, np.asarray(x0, dtype=float).reshape(-1), steps, rng,
                  thinning, rho, floor, burn_in, marks)


def _run_fast(target, p, kernel, schedule, theta0, x0, steps, rng, thinning, rho, floor, burn_in, marks):
    if not fast_path_available(target):
        raise ValueError("the compiled loop only handles 1-D Gaussian mixtures")
    logw = mixture_log_consts(target)
    mu = np.ascontiguousarray(target.means[:, 0])
    var = target.sds ** 2
    tau, sigma = target.temperature, target.gradient_noise_sigma
    bounds = np.asarray(p.boundaries, dtype=float)
    theta = theta0.values.copy()
    fp = np.array([tau, sigma, kernel.epsilon, kernel.lr_decay, kernel.lr_decay_every, kernel.zeta,
                   kernel.momentum, p.delta_u, schedule.A, schedule.alpha, schedule.B, rho, floor,
                   thinning, burn_in], dtype=float)
    fstate = np.zeros(fm.N_FSTATE)
    istate = np.zeros(fm.N_ISTATE, dtype=np.int64)
    x = float(x0[0])
    u, g = fm.initial_eval(x, logw, mu, var, tau)
    if sigma > 0:
        g = g + sigma * rng.standard_normal(1)[0]
    fstate[fm.X], fstate[fm.GRAD], fstate[fm.MINMULT] = x, g, math.inf
    istate[fm.J] = fm.region_index(u, bounds)
    istate[fm.FIRSTNEG] = -1
    istate[fm.CLAMPS] = theta0.clamps
    rows = steps // thinning
    rec = np.zeros((rows, fm.N_RCOL))
    trace = np.zeros((rows, p.m))
    mark_out = np.zeros((marks.size, 4))
    visits = np.zeros(p.m, dtype=np.int64)
    per_step = 2 if sigma > 0 else 1
    kind = fm.KIND_CODES[kernel.kind]
    done = 0
    while done < steps:
        n = min(_CHUNK, steps - done)
        normals = rng.standard_normal(n * per_step)
        fm.advance(done, n, normals, kind, logw, mu, var, fp, bounds, theta,
                   fstate, istate, marks, mark_out, visits, rec, trace)
        if istate[fm.DIVERGED]:
            break
        done += n
    nrec = int(istate[fm.NREC])
    count = int(istate[fm.COUNT])
    w_total = fstate[fm.W] + fstate[fm.WC]
    return ChainResult(
        kind=kernel.kind,
        steps=steps,
        records=rec[:nrec],
        theta_trace=trace[:nrec],
        final_x=np.array([fstate[fm.X]]),
        final_theta=theta,
        estimate=(fstate[fm.WS] + fstate[fm.WSC]) / w_total if count else math.nan,
        count=count,
        marks=mark_out[: int(istate[fm.NMARK])],
        visits=visits,
        min_multiplier=float(fstate[fm.MINMULT]),
        first_negative_step=int(istate[fm.FIRSTNEG]),
        clamps=int(istate[fm.CLAMPS]),
        diverged_step=int(istate[fm.DIVERGED]) or None,
    )


class _Recorder:
    """Sink that sees every step and keeps what the harness needs."""

    def __init__(self, m, thinning, burn_in, marks):
        self.thinning, self.burn_in = thinning, burn_in
        self.marks = list(marks)
        self.mark_rows = []
        self.rows, self.trace = [], []
        self.visits = np.zeros(m, dtype=np.int64)
        self.cws = self.cwsc = self.cw = self.cwc = 0.0
        self.ccount = 0
        self.min_mult = math.inf
        self.first_neg = -1
        self.last = None

    def __call__(self, rec: RunRecord):
        k, f, w = rec.step, float(rec.x[0]), rec.weight
        self.cws, self.cwsc = _neumaier(self.cws, self.cwsc, w * f)
        self.cw, self.cwc = _neumaier(self.cw, self.cwc, w)
        self.ccount += 1
        if k > self.burn_in:
            self.visits[rec.j_tilde - 1] += 1
        self.min_mult = min(self.min_mult, rec.multiplier)
        if rec.multiplier < 0 and self.first_neg < 0:
            self.first_neg = k
        while self.marks and self.marks[0] == k:
            self.marks.pop(0)
            self.mark_rows.append((k, self.cws + self.cwsc, self.cw + self.cwc, self.ccount))
        if k % self.thinning == 0:
            self.rows.append((k, f, rec.energy_scaled, rec.j_tilde, rec.multiplier, rec.theta_j, w,
                              rec.running_estimate))
            self.trace.append(rec.theta)
        self.last = rec


def _run_reference(target, p, kernel, schedule, theta0, x0, steps, rng, thinning, rho, floor, burn_in, marks):
    rec = _Recorder(p.m, thinning, burn_in, marks.tolist())
    state = ChainState.start(x0, kernel)
    diverged = None
    theta = theta0
    try:
        state, theta = csgld_iterate(state, theta0, steps, target, p, kernel, schedule, rng, sink=rec,
                                     thinning=1, rho=rho, floor=floor, burn_in=burn_in)
        final_x, final_theta, clamps = state.x, theta.values, theta.clamps
    except DivergenceError as err:
        diverged = err.step
        final_x = rec.last.x if rec.last is not None else x0
        final_theta = rec.last.theta if rec.last is not None else theta0.values
        clamps = theta.clamps
    estimate = rec.last.running_estimate if rec.last is not None else math.nan
    return ChainResult(
        kind=kernel.kind,
        steps=steps,
        records=np.array(rec.rows, dtype=float).reshape(-1, len(RECORD_COLUMNS)),
        theta_trace=np.array(rec.trace, dtype=float).reshape(-1, p.m),
        final_x=np.asarray(final_x),
        final_theta=np.asarray(final_theta),
        estimate=estimate,
        count=max(0, min(rec.ccount, steps) - burn_in),
        marks=np.array(rec.mark_rows, dtype=float).reshape(-1, 4),
        visits=rec.visits,
        min_multiplier=rec.min_mult,
        first_negative_step=rec.first_neg,
        clamps=clamps,
        diverged_step=diverged,
    )
