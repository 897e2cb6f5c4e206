"""Command-line entry point: ``csgld run|compare|oracle|flat-hist``.

Exit codes: 0 success, 1 a chain diverged, 2 configuration or input error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import config as cfgmod
from . import runner
from .errors import ConfigError, InvalidGridError, InvalidInputError, InvalidStateError

EXIT_DIVERGED = 1
EXIT_BAD_INPUT = 2


def _seed_list(text):
    return cfgmod._seeds(text)


def _add_overrides(sp):
    sp.add_argument("config", type=Path, help="configuration file (key = value lines)")
    sp.add_argument("--seed-override", type=_seed_list, default=None, metavar="SEEDS",
                    help="replace run.seeds (comma list or a..b)")
    sp.add_argument("--steps-override", type=int, default=None, metavar="N", help="replace run.steps")
    sp.add_argument("--output-dir", type=Path, default=None, help="replace run.output_dir")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csgld",
        description="Contour SGLD experiments.",
        epilog="configuration keys:\n" + cfgmod.describe_keys(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_overrides(sub.add_parser("run", help="run one chain per seed and write CSVs"))
    _add_overrides(sub.add_parser("compare", help="error curves for the methods in compare.methods"))
    _add_overrides(sub.add_parser("oracle", help="quadrature theta-star, energy profile and stability"))
    fh = sub.add_parser("flat-hist", help="visit-count flatness of a finished run")
    fh.add_argument("run_dir", type=Path)
    return parser


def _load(args) -> cfgmod.RunConfig:
    cfg = cfgmod.load(args.config)
    return cfg.with_overrides(steps=args.steps_override, seeds=args.seed_override, output_dir=args.output_dir)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "flat-hist":
            rep = runner.flat_histogram_from_dir(args.run_dir)
            lo, hi, ratio, cv = rep.pooled
            print(f"covered regions: {int(rep.covered.sum())}; pooled max/min = {ratio:.4g}, cv = {cv:.4g}; "
                  f"worst seed ratio = {rep.worst_ratio:.4g}")
            return 0
        cfg = _load(args)
        if args.command == "run":
            summary = runner.run(cfg)
            for row in summary.rows:
                status = f"DIVERGED at step {row['divergence_step']}" if row["diverged"] else "ok"
                print(f"seed {row['seed']}: estimate {row['estimate']:.6g}, |error| {row['abs_error']:.4g}, "
                      f"theta L1 {row['theta_l1'] if row['theta_l1'] is not None else 'n/a'}  [{status}]")
            print(f"wrote {summary.output_dir}")
            return EXIT_DIVERGED if summary.diverged else 0
        if args.command == "compare":
            res = runner.compare(runner.method_configs(cfg))
            for method in cfg.methods:
                errs = res.final_errors(method)
                print(f"{method}: mean final |error| {sum(errs.values()) / len(errs):.4g}")
            print(f"wrote {res.output_dir}")
            return EXIT_DIVERGED if res.diverged else 0
        rep = runner.oracle_report(cfg)
        for key, value in rep.values.items():
            print(f"{key} = {value}")
        return 0
    except (ConfigError, InvalidInputError, InvalidStateError, InvalidGridError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
