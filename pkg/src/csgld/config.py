"""Run configuration: a flat ``key = value`` text format.

One setting per line, ``#`` starts a comment, keys are dotted
(``section.name``; ``-`` and ``_`` are interchangeable). Unknown keys,
duplicate keys and malformed values are errors that carry the line number.
Every key and its default is listed in :data:`KEYS`; ``csgld run --help``
and the README reproduce the table.

Lists are comma separated. ``run.seeds`` also accepts an inclusive range
``a..b``. ``partition.u1 = auto`` puts the first boundary one ``delta_u``
above the largest multiple of ``delta_u`` not exceeding the minimum energy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .dynamics import KernelConfig
from .errors import ConfigError
from .oracle import PSI_MODES, QuadratureGrid
from .partition import EnergyPartition
from .target import MIXTURE, REGRESSION, TargetSpec, energy_minimum, gaussian_mixture, subsampled_regression
from .theta import DEFAULT_FLOOR, StepSchedule

RNG_ALGORITHMS = ("pcg64", "philox")


def _floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _int(text):
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


def _seeds(text):
    text = text.strip()
    if ".." in text:
        lo, hi = (int(t) for t in text.split(".."))
        if hi < lo:
            raise ValueError("empty seed range")
        return tuple(range(lo, hi + 1))
    return tuple(int(t) for t in text.split(",") if t.strip())


def _u1(text):
    return "auto" if text.strip() == "auto" else float(text)


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


def _words(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


# key -> (parser, default, help)
KEYS: Dict[str, Tuple[Callable, object, str]] = {
    "target.kind": (_choice(MIXTURE, REGRESSION), MIXTURE, "target family"),
    "target.temperature": (float, 1.0, "tau"),
    "target.gradient_noise_sigma": (float, 0.1, "std of additive Gaussian gradient noise"),
    "target.weights": (_floats, (0.4, 0.6), "mixture weights"),
    "target.means": (_floats, (-6.0, 4.0), "1-D mixture component means"),
    "target.sds": (_floats, (1.0, 1.0), "mixture component standard deviations"),
    "target.dimension": (_int, 2, "regression dimension"),
    "target.dataset_size": (_int, 1000, "regression N"),
    "target.batch_size": (_int, 50, "regression mini-batch size n"),
    "target.noise_sd": (float, 1.0, "regression observation noise std"),
    "target.prior_precision": (float, 1.0, "regression prior precision"),
    "target.data_seed": (_int, 0, "seed of the synthetic regression data"),
    "partition.m": (_int, 50, "number of subregions"),
    "partition.u1": (_u1, 2.0, "first boundary (number or 'auto')"),
    "partition.delta_u": (float, 1.0, "boundary spacing"),
    "kernel.kind": (_choice("sgld", "csgld", "ksgld", "sghmc", "csghmc"), "csgld", "sampler"),
    "kernel.epsilon": (float, 0.1, "learning rate"),
    "kernel.zeta": (float, 0.75, "flattening exponent"),
    "kernel.momentum": (float, 0.0, "momentum coefficient beta (momentum kernels)"),
    "kernel.lr_decay": (float, 1.0, "geometric learning-rate decay factor"),
    "kernel.lr_decay_every": (_int, 1, "steps between learning-rate decays"),
    "schedule.a": (float, 1.0, "step-size numerator A"),
    "schedule.alpha": (float, 0.6, "step-size exponent alpha"),
    "schedule.b": (float, 100.0, "step-size offset B"),
    "theta.rho": (float, 0.0, "prior-count regularizer"),
    "theta.floor": (float, DEFAULT_FLOOR, "positivity floor for theta"),
    "run.steps": (_int, 1_000_000, "iterations per chain"),
    "run.thinning": (_int, 100, "trajectory thinning"),
    "run.burn_in_fraction": (float, 0.1, "fraction of steps excluded from the estimators"),
    "run.seeds": (_seeds, tuple(range(5)), "chain seeds (list or a..b)"),
    "run.output_dir": (str, "runs/out", "output directory"),
    "run.x0": (_floats, (0.0,), "initial position (one value is broadcast)"),
    "run.rng": (_choice(*RNG_ALGORITHMS), "pcg64", "bit generator"),
    "run.workers": (_int, 1, "chains run concurrently"),
    "compare.methods": (_words, ("sgld", "csgld", "ksgld"), "methods in the comparison study"),
    "oracle.lo": (float, -20.0, "quadrature lower limit"),
    "oracle.hi": (float, 20.0, "quadrature upper limit"),
    "oracle.points": (_int, 200_001, "quadrature grid points"),
    "oracle.trials": (_int, 100, "random simplex points for the stability check"),
    "oracle.stability_seed": (_int, 0, "seed for the stability check"),
    "oracle.psi_mode": (_choice(*PSI_MODES), "interpolated", "Psi used by the stability check"),
    "oracle.profile_stride": (_int, 100, "grid stride of the flattened-energy profile"),
    "report.coverage": (float, 0.99, "theta-star mass defining the covered regions"),
}


def _normalise(key: str) -> str:
    return key.strip().lower().replace("-", "_")


@dataclass(frozen=True)
class OracleConfig:
    grid: QuadratureGrid = QuadratureGrid()
    trials: int = 100
    stability_seed: int = 0
    psi_mode: str = "interpolated"
    profile_stride: int = 100


@dataclass(frozen=True, eq=False)
class RunConfig:
    target: TargetSpec
    partition: EnergyPartition
    kernel: KernelConfig
    schedule: StepSchedule
    rho: float = 0.0
    floor: float = DEFAULT_FLOOR
    steps: int = 1_000_000
    thinning: int = 100
    burn_in_fraction: float = 0.1
    seeds: Tuple[int, ...] = tuple(range(5))
    output_dir: Path = Path("runs/out")
    x0: Tuple[float, ...] = (0.0,)
    rng: str = "pcg64"
    workers: int = 1
    methods: Tuple[str, ...] = ("sgld", "csgld", "ksgld")
    oracle: OracleConfig = OracleConfig()
    coverage: float = 0.99
    target_params: Dict[str, object] = field(default_factory=dict)
    text: str = ""

    def __post_init__(self):
        if self.steps < 1 or self.thinning < 1:
            raise ConfigError("steps and thinning must be positive", key="run.steps")
        if self.steps < self.thinning:
            raise ConfigError("steps must be at least thinning", key="run.thinning")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be nonempty and distinct", key="run.seeds")
        if not 0 <= self.burn_in_fraction < 1:
            raise ConfigError("burn_in_fraction must lie in [0, 1)", key="run.burn_in_fraction")
        if self.rho < 0:
            raise ConfigError("rho must be nonnegative", key="theta.rho")
        if not 0 < self.floor < 1 / self.partition.m:
            raise ConfigError("floor must lie in (0, 1/m)", key="theta.floor")
        if self.rng not in RNG_ALGORITHMS:
            raise ConfigError(f"rng must be one of {RNG_ALGORITHMS}", key="run.rng")
        if self.workers < 1:
            raise ConfigError("workers must be positive", key="run.workers")
        if not 0 < self.coverage <= 1:
            raise ConfigError("coverage must lie in (0, 1]", key="report.coverage")
        if len(self.x0) != self.target.dimension:
            raise ConfigError(f"x0 needs {self.target.dimension} values", key="run.x0")

    @property
    def burn_in(self) -> int:
        return int(math.floor(self.burn_in_fraction * self.steps))

    def make_rng(self, seed: int) -> np.random.Generator:
        """The documented generator: ``Generator(PCG64(seed))`` or ``Generator(Philox(seed))``."""
        bitgen = np.random.PCG64 if self.rng == "pcg64" else np.random.Philox
        return np.random.Generator(bitgen(seed))

    def with_overrides(self, steps=None, seeds=None, output_dir=None, kind=None) -> "RunConfig":
        changes = {}
        if steps is not None:
            changes["steps"] = int(steps)
            changes["thinning"] = min(self.thinning, int(steps))
        if seeds is not None:
            changes["seeds"] = tuple(seeds)
        if output_dir is not None:
            changes["output_dir"] = Path(output_dir)
        if kind is not None:
            changes["kernel"] = replace(self.kernel, kind=kind)
        return replace(self, **changes)


def parse_text(text: str) -> Dict[str, Tuple[object, int]]:
    """Parse config text into ``{key: (value, line)}`` for the keys present."""
    out: Dict[str, Tuple[object, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        key = _normalise(key)
        if key not in KEYS:
            raise ConfigError("unknown key", line=lineno, key=key)
        if key in out:
            raise ConfigError(f"duplicate key (first set on line {out[key][1]})", line=lineno, key=key)
        if not value:
            raise ConfigError("missing value", line=lineno, key=key)
        try:
            out[key] = (KEYS[key][0](value), lineno)
        except ValueError as err:
            raise ConfigError(f"bad value {value!r}: {err}", line=lineno, key=key) from None
    return out


def auto_u1(target: TargetSpec, delta_u: float) -> float:
    """First boundary one ``delta_u`` above the grid point at or below the minimum energy."""
    return (math.floor(energy_minimum(target) / delta_u) + 1) * delta_u


def from_text(text: str) -> RunConfig:
    parsed = parse_text(text)

    def get(key):
        return parsed[key][0] if key in parsed else KEYS[key][1]

    def build(keys, factory):
        # re-raise construction errors against the first offending key present
        try:
            return factory()
        except (ValueError, TypeError) as err:
            present = [k for k in keys if k in parsed]
            line = parsed[present[0]][1] if present else None
            raise ConfigError(str(err), line=line, key=present[0] if present else None) from None

    kind = get("target.kind")
    if kind == MIXTURE:
        tkeys = ["target.weights", "target.means", "target.sds", "target.temperature", "target.gradient_noise_sigma"]
        target = build(tkeys, lambda: gaussian_mixture(
            get("target.weights"), get("target.means"), get("target.sds"),
            temperature=get("target.temperature"), gradient_noise_sigma=get("target.gradient_noise_sigma")))
    else:
        tkeys = ["target.dataset_size", "target.batch_size", "target.dimension", "target.noise_sd",
                 "target.prior_precision", "target.temperature", "target.gradient_noise_sigma", "target.data_seed"]
        target = build(tkeys, lambda: subsampled_regression(
            dataset_size=get("target.dataset_size"), batch_size=get("target.batch_size"),
            dimension=get("target.dimension"), noise_sd=get("target.noise_sd"),
            prior_precision=get("target.prior_precision"), temperature=get("target.temperature"),
            gradient_noise_sigma=get("target.gradient_noise_sigma"), data_seed=get("target.data_seed")))
    target_params = {k: get(k) for k in ["target.kind"] + tkeys}

    u1 = get("partition.u1")
    if u1 == "auto":
        u1 = auto_u1(target, get("partition.delta_u"))
    pkeys = ["partition.m", "partition.u1", "partition.delta_u"]
    partition = build(pkeys, lambda: EnergyPartition(get("partition.m"), u1, get("partition.delta_u")))
    kkeys = [k for k in KEYS if k.startswith("kernel.")]
    kernel = build(kkeys, lambda: KernelConfig(
        kind=get("kernel.kind"), epsilon=get("kernel.epsilon"), zeta=get("kernel.zeta"),
        momentum=get("kernel.momentum"), lr_decay=get("kernel.lr_decay"),
        lr_decay_every=get("kernel.lr_decay_every")))
    skeys = ["schedule.a", "schedule.alpha", "schedule.b"]
    schedule = build(skeys, lambda: StepSchedule(get("schedule.a"), get("schedule.alpha"), get("schedule.b")))
    okeys = [k for k in KEYS if k.startswith("oracle.")]
    oracle = build(okeys, lambda: OracleConfig(
        grid=QuadratureGrid(get("oracle.lo"), get("oracle.hi"), get("oracle.points")),
        trials=get("oracle.trials"), stability_seed=get("oracle.stability_seed"),
        psi_mode=get("oracle.psi_mode"), profile_stride=get("oracle.profile_stride")))
    methods = get("compare.methods")
    bad = [m for m in methods if m not in ("sgld", "csgld", "ksgld", "sghmc", "csghmc")]
    if bad:
        raise ConfigError(f"unknown methods {bad}", line=parsed.get("compare.methods", (None, None))[1],
                          key="compare.methods")
    x0 = get("run.x0")
    if len(x0) == 1:
        x0 = x0 * target.dimension

    def run_config():
        return RunConfig(
            target=target, partition=partition, kernel=kernel, schedule=schedule,
            rho=get("theta.rho"), floor=get("theta.floor"), steps=get("run.steps"), thinning=get("run.thinning"),
            burn_in_fraction=get("run.burn_in_fraction"), seeds=get("run.seeds"),
            output_dir=Path(get("run.output_dir")), x0=tuple(x0), rng=get("run.rng"), workers=get("run.workers"),
            methods=methods, oracle=oracle, coverage=get("report.coverage"), target_params=target_params,
            text=text,
        )

    try:
        return run_config()
    except ConfigError as err:
        if err.key is not None and err.key in parsed and err.line is None:
            raise ConfigError(str(err).split(": ", 1)[-1], line=parsed[err.key][1], key=err.key) from None
        raise


def load(path) -> RunConfig:
    return from_text(Path(path).read_text())


def describe_keys() -> str:
    """The key table as text (used by the CLI help)."""
    rows = []
    for key, (_, default, help_) in KEYS.items():
        if isinstance(default, tuple):
            default = ", ".join(str(d) for d in default)
        rows.append(f"  {key:<28} {help_} (default: {default})")
    return "\n".join(rows)
