"""Experiment orchestration: seeded chain sweeps, CSV output and reports.

Every output is a CSV file with a one-line header. Floats are written with
``repr`` so a (config, seed) pair determines every output byte.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import config as cfgmod
from .chain import RECORD_COLUMNS, ChainResult, run_chain
from .config import RunConfig
from .errors import ConfigError
from .estimators import z_theta_star
from .oracle import energy_barrier, flattened_density, stability_check, theta_star
from .target import MIXTURE, posterior_mean
from .theta import ThetaEstimate

SUMMARY_COLUMNS = (
    "seed", "method", "steps", "burn_in", "samples", "estimate", "true_mean", "abs_error",
    "theta_l1", "theta_l1_covered", "theta_l2", "min_multiplier", "first_negative_step", "clamps",
    "diverged", "divergence_step",
)
THETA_PREFIX_COLUMNS = ("step", "l1_error", "l2_error")
VISITS_COLUMNS = ("region", "lower", "upper", "visits", "theta_final", "theta_star", "covered")
COMPARE_COLUMNS = ("method", "step", "mean_abs_error", "seeds")
COMPARE_FINAL_COLUMNS = ("method", "seed", "estimate", "abs_error")
FLAT_COLUMNS = ("seed", "covered_regions", "min_visits", "max_visits", "ratio", "cv")
N_CHECKPOINTS = 20
CHECKPOINT_START = 1000


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, columns: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path: Path) -> List[Dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# oracle helpers


def oracle_applies(cfg: RunConfig) -> bool:
    return cfg.target.dimension == 1


def oracle_theta(cfg: RunConfig) -> Optional[np.ndarray]:
    """Quadrature theta-star for 1-D targets, ``None`` otherwise."""
    if not oracle_applies(cfg):
        return None
    return theta_star(cfg.target, cfg.partition, cfg.oracle.grid).values


def covered_regions(star: np.ndarray, coverage: float) -> np.ndarray:
    """Boolean mask of the fewest regions whose theta-star mass reaches ``coverage``."""
    order = np.argsort(-star, kind="stable")
    cum = np.cumsum(star[order])
    n = int(np.searchsorted(cum, coverage * cum[-1] * (1 - 1e-12))) + 1
    mask = np.zeros(star.size, dtype=bool)
    mask[order[:min(n, star.size)]] = True
    return mask


def checkpoints(steps: int) -> np.ndarray:
    """Log-spaced checkpoints from 10^3 (or ``steps`` if smaller) to ``steps``."""
    start = min(CHECKPOINT_START, steps)
    pts = np.unique(np.round(np.geomspace(start, steps, N_CHECKPOINTS)).astype(np.int64))
    pts[-1] = steps
    return pts


def _window_start(cfg: RunConfig, step: int) -> int:
    return int(math.floor(cfg.burn_in_fraction * step))


def _marks(cfg: RunConfig) -> np.ndarray:
    pts = checkpoints(cfg.steps)
    return np.unique(np.concatenate([pts, [_window_start(cfg, c) for c in pts]]))


# ---------------------------------------------------------------------------
# chains


def _initial_theta(cfg: RunConfig, star: Optional[np.ndarray]) -> ThetaEstimate:
    if cfg.kernel.kind == "ksgld":
        if star is None:
            raise ConfigError("ksgld needs the quadrature theta-star, available for 1-D targets only",
                              key="kernel.kind")
        return ThetaEstimate(star.copy())
    return ThetaEstimate.uniform(cfg.partition.m)


def run_seed(cfg: RunConfig, seed: int, star: Optional[np.ndarray] = None) -> ChainResult:
    """One chain for ``seed``; the seed alone determines its RNG stream."""
    return run_chain(
        cfg.target, cfg.partition, cfg.kernel, cfg.schedule, _initial_theta(cfg, star), cfg.x0, cfg.steps,
        cfg.make_rng(seed), thinning=cfg.thinning, rho=cfg.rho, floor=cfg.floor, burn_in=cfg.burn_in,
        marks=_marks(cfg),
    )


def _run_seeds(cfg: RunConfig, star) -> List[ChainResult]:
    if cfg.workers == 1 or len(cfg.seeds) == 1:
        return [run_seed(cfg, s, star) for s in cfg.seeds]
    with ProcessPoolExecutor(max_workers=min(cfg.workers, len(cfg.seeds))) as pool:
        return list(pool.map(run_seed, [cfg] * len(cfg.seeds), cfg.seeds, [star] * len(cfg.seeds)))


# ---------------------------------------------------------------------------
# run


@dataclass
class RunSummary:
    output_dir: Path
    rows: List[dict]
    results: Dict[int, ChainResult] = field(repr=False, default_factory=dict)
    theta_star: Optional[np.ndarray] = None

    @property
    def diverged(self) -> bool:
        return any(r["diverged"] for r in self.rows)


def true_mean(cfg: RunConfig) -> float:
    return float(posterior_mean(cfg.target)[0])


def _summary_row(cfg, seed, res: ChainResult, star, covered):
    mean = true_mean(cfg)
    row = dict(
        seed=seed, method=cfg.kernel.kind, steps=cfg.steps, burn_in=cfg.burn_in, samples=res.count,
        estimate=res.estimate, true_mean=mean, abs_error=abs(res.estimate - mean),
        theta_l1=None, theta_l1_covered=None, theta_l2=None,
        min_multiplier=res.min_multiplier, first_negative_step=res.first_negative_step, clamps=res.clamps,
        diverged=res.diverged_step is not None, divergence_step=res.diverged_step,
    )
    if star is not None and cfg.kernel.kind != "sgld" and cfg.kernel.kind != "sghmc":
        diff = res.final_theta - star
        row.update(theta_l1=float(np.abs(diff).sum()), theta_l1_covered=float(np.abs(diff[covered]).sum()),
                   theta_l2=float(np.sqrt(diff @ diff)))
    return row


def write_config_echo(cfg: RunConfig, out: Path) -> None:
    resolved = [
        f"# resolved: partition.u1 = {cfg.partition.u1!r}",
        f"# resolved: run.steps = {cfg.steps}",
        f"# resolved: run.seeds = {', '.join(str(s) for s in cfg.seeds)}",
        f"# resolved: run.output_dir = {cfg.output_dir}",
    ]
    text = cfg.text if cfg.text.endswith("\n") or not cfg.text else cfg.text + "\n"
    (out / "config.txt").write_text(text + "\n".join(resolved) + "\n")


def run(cfg: RunConfig, star: Optional[np.ndarray] = None) -> RunSummary:
    """Run one chain per seed and write the per-seed and summary CSVs.

    Files in ``cfg.output_dir``: ``trajectory_seed<S>.csv`` (thinned
    records), ``theta_seed<S>.csv`` (theta trace with L1/L2 error against the
    oracle), ``visits_seed<S>.csv`` (post-burn-in region counts),
    ``summary.csv`` and the config echo ``config.txt``.
    """
    if star is None:
        star = oracle_theta(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_config_echo(cfg, out)
    results = _run_seeds(cfg, star)
    covered = covered_regions(star, cfg.coverage) if star is not None else None
    rows = []
    bounds = (-math.inf,) + cfg.partition.boundaries + (math.inf,)
    for seed, res in zip(cfg.seeds, results):
        write_csv(out / f"trajectory_seed{seed}.csv", RECORD_COLUMNS,
                  ([int(r[0]), r[1], r[2], int(r[3]), r[4], r[5], r[6], r[7]] for r in res.records))
        theta_rows = []
        for step, th in zip(res.records[:, 0], res.theta_trace):
            if star is not None:
                d = th - star
                l1, l2 = float(np.abs(d).sum()), float(np.sqrt(d @ d))
            else:
                l1 = l2 = None
            theta_rows.append([int(step), l1, l2, *th.tolist()])
        write_csv(out / f"theta_seed{seed}.csv",
                  THETA_PREFIX_COLUMNS + tuple(f"theta_{i}" for i in range(1, cfg.partition.m + 1)), theta_rows)
        write_csv(out / f"visits_seed{seed}.csv", VISITS_COLUMNS, (
            [i + 1, bounds[i], bounds[i + 1], int(res.visits[i]), res.final_theta[i],
             None if star is None else star[i], None if covered is None else bool(covered[i])]
            for i in range(cfg.partition.m)))
        rows.append(_summary_row(cfg, seed, res, star, covered))
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, ([r[c] for c in SUMMARY_COLUMNS] for r in rows))
    return RunSummary(out, rows, dict(zip(cfg.seeds, results)), star)


# ---------------------------------------------------------------------------
# compare


@dataclass
class CompareResult:
    output_dir: Path
    curve: List[tuple]          # (method, step, mean_abs_error, seeds)
    final: List[tuple]          # (method, seed, estimate, abs_error)
    diverged: bool = False

    def final_errors(self, method: str) -> Dict[int, float]:
        return {seed: err for m, seed, _, err in self.final if m == method}

    def final_estimates(self, method: str) -> Dict[int, float]:
        return {seed: est for m, seed, est, _ in self.final if m == method}


def method_configs(cfg: RunConfig) -> List[RunConfig]:
    """One config per method in ``cfg.methods`` sharing everything else."""
    return [cfg.with_overrides(kind=m) for m in cfg.methods]


def compare(configs: Sequence[RunConfig], output_dir=None, star: Optional[np.ndarray] = None) -> CompareResult:
    """Error curves of the posterior-mean estimate for several methods.

    For checkpoint ``c`` the estimate uses steps ``floor(f*c)+1 .. c`` where
    ``f`` is the burn-in fraction (plain average for SGLD/SGHMC, weighted
    average for the contour methods); step 0 reports the starting point.
    Writes ``compare.csv`` (one row per method and checkpoint) and
    ``compare_final.csv`` (per-seed final estimates).
    """
    if not configs:
        raise ConfigError("compare needs at least one method")
    base = configs[0]
    for c in configs[1:]:
        if (c.target_params != base.target_params or c.partition != base.partition or c.seeds != base.seeds
                or c.steps != base.steps or c.x0 != base.x0):
            raise ConfigError("compared configs must share target, partition, seeds, steps and x0")
    out = Path(output_dir if output_dir is not None else base.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_config_echo(base, out)
    if star is None and any(c.kernel.kind == "ksgld" for c in configs):
        star = oracle_theta(base)
    mean = true_mean(base)
    pts = checkpoints(base.steps)
    curve, final, diverged = [], [], False
    for cfg in configs:
        results = _run_seeds(cfg, star)
        errs = np.zeros((len(results), pts.size))
        for s, (seed, res) in enumerate(zip(cfg.seeds, results)):
            diverged |= res.diverged_step is not None
            for c, step in enumerate(pts):
                try:
                    errs[s, c] = abs(res.window_estimate(_window_start(cfg, int(step)), int(step)) - mean)
                except (KeyError, IndexError):
                    errs[s, c] = math.nan
            final.append((cfg.kernel.kind, seed, res.estimate, abs(res.estimate - mean)))
        curve.append((cfg.kernel.kind, 0, abs(cfg.x0[0] - mean), len(results)))
        curve.extend((cfg.kernel.kind, int(step), float(errs[:, c].mean()), len(results))
                     for c, step in enumerate(pts))
    write_csv(out / "compare.csv", COMPARE_COLUMNS, curve)
    write_csv(out / "compare_final.csv", COMPARE_FINAL_COLUMNS, final)
    return CompareResult(out, curve, final, diverged)


# ---------------------------------------------------------------------------
# flat histogram


@dataclass
class FlatHistogramReport:
    counts: Dict[int, np.ndarray]      # seed -> visits per region
    covered: np.ndarray
    per_seed: Dict[int, tuple]         # seed -> (min, max, ratio, cv)

    @property
    def pooled(self) -> tuple:
        return _flatness(sum(self.counts.values()), self.covered)

    @property
    def worst_ratio(self) -> float:
        return max(v[2] for v in self.per_seed.values())


def _flatness(counts, covered):
    sel = np.asarray(counts, dtype=float)[covered]
    lo, hi = float(sel.min()), float(sel.max())
    ratio = hi / lo if lo > 0 else math.inf
    cv = float(sel.std() / sel.mean()) if sel.mean() > 0 else math.nan
    return lo, hi, ratio, cv


def flat_histogram_report(counts: Dict[int, np.ndarray], star: Optional[np.ndarray] = None,
                          coverage: float = 0.99) -> FlatHistogramReport:
    """Visit-count flatness over the regions covering ``coverage`` of theta-star.

    Without ``star`` every region counts as covered.
    """
    counts = {s: np.asarray(c) for s, c in counts.items()}
    m = next(iter(counts.values())).size
    covered = covered_regions(star, coverage) if star is not None else np.ones(m, dtype=bool)
    return FlatHistogramReport(counts, covered, {s: _flatness(c, covered) for s, c in counts.items()})


def flat_histogram_from_dir(run_dir) -> FlatHistogramReport:
    """Rebuild the report from the ``visits_seed*.csv`` files of a run and write ``flat_hist.csv``."""
    run_dir = Path(run_dir)
    files = sorted(run_dir.glob("visits_seed*.csv"), key=lambda p: int(p.stem[len("visits_seed"):]))
    if not files:
        raise FileNotFoundError(f"no visits_seed*.csv files in {run_dir}")
    counts, covered = {}, None
    for f in files:
        rows = read_csv(f)
        counts[int(f.stem[len("visits_seed"):])] = np.array([int(r["visits"]) for r in rows])
        if rows[0]["covered"] != "":
            covered = np.array([r["covered"] == "1" for r in rows])
    m = next(iter(counts.values())).size
    if covered is None:
        covered = np.ones(m, dtype=bool)
    report = FlatHistogramReport(counts, covered, {s: _flatness(c, covered) for s, c in counts.items()})
    rows = [(s, int(covered.sum()), *report.per_seed[s]) for s in counts]
    rows.append(("pooled", int(covered.sum()), *report.pooled))
    write_csv(run_dir / "flat_hist.csv", FLAT_COLUMNS, rows)
    return report


# ---------------------------------------------------------------------------
# oracle outputs


@dataclass
class OracleSummary:
    theta_star: np.ndarray
    barrier_original: Optional[float]
    barrier_flattened: Optional[float]
    stability: dict                    # zeta -> StabilityReport
    values: Dict[str, float]


def oracle_report(cfg: RunConfig, output_dir=None) -> OracleSummary:
    """Write theta-star, the flattened-energy profile and stability checks.

    Files: ``theta_star.csv``, ``energy_profile.csv``, ``stability.csv`` and
    ``oracle_summary.csv`` (``key,value`` rows).
    """
    if not oracle_applies(cfg):
        raise ConfigError("the quadrature oracle handles 1-D targets only", key="target.kind")
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_config_echo(cfg, out)
    p, grid, zeta = cfg.partition, cfg.oracle.grid, cfg.kernel.zeta
    star = theta_star(cfg.target, p, grid)
    covered = covered_regions(star.values, cfg.coverage)
    bounds = (-math.inf,) + p.boundaries + (math.inf,)
    write_csv(out / "theta_star.csv", ("region", "lower", "upper", "theta_star", "covered"),
              ([i + 1, bounds[i], bounds[i + 1], star.values[i], bool(covered[i])] for i in range(p.m)))
    flat = flattened_density(cfg.target, p, star, zeta, grid)
    stride = cfg.oracle.profile_stride
    write_csv(out / "energy_profile.csv", ("x", "original_energy", "flattened_energy"),
              zip(flat.x[::stride], flat.original_energy[::stride], flat.energy[::stride]))
    values = {"zeta": zeta, "z_theta_star": z_theta_star(star.values, zeta), "m": p.m, "u1": p.u1,
              "delta_u": p.delta_u}
    b_orig = b_flat = None
    if cfg.target.kind == MIXTURE and cfg.target.means.shape[0] >= 2:
        left, right = float(cfg.target.means[:, 0].min()), float(cfg.target.means[:, 0].max())
        b_orig = energy_barrier(flat.x, flat.original_energy, left, right)
        b_flat = energy_barrier(flat.x, flat.energy, left, right)
        values.update(barrier_original=b_orig, barrier_flattened=b_flat)
    stab = {}
    rows = []
    for z in sorted({0.0, zeta}):
        rep = stability_check(cfg.target, p, z, grid, trials=cfg.oracle.trials, rng=cfg.oracle.stability_seed,
                              psi_mode=cfg.oracle.psi_mode, floor=cfg.floor)
        stab[z] = rep
        rows.extend((z, t, rep.s[t], rep.r[t]) for t in range(rep.s.size))
        values[f"stability_fraction_negative_zeta{z:g}"] = rep.fraction_negative
        values[f"stability_max_s_zeta{z:g}"] = rep.max_s
        values[f"stability_max_r_zeta{z:g}"] = rep.max_r
    write_csv(out / "stability.csv", ("zeta", "trial", "inner_product", "ratio"), rows)
    write_csv(out / "oracle_summary.csv", ("key", "value"), values.items())
    return OracleSummary(star.values, b_orig, b_flat, stab, values)


def load_config(path) -> RunConfig:
    return cfgmod.load(path)
