"""Run the full benchmark-mixture study: theta recovery, flat histogram,
estimator comparison and the quadrature oracle.

Usage::

    python scripts/run_mixture_study.py [--output-root runs] [--steps N] [--full]

``--full`` uses the 10^7-step preset for the theta-recovery run.
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

import numpy as np

from csgld import runner
from csgld.config import load

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--output-root", type=Path, default=Path("runs"))
    ap.add_argument("--steps", type=int, default=None, help="override run.steps everywhere")
    ap.add_argument("--full", action="store_true", help="use the 10^7-step theta-recovery preset")
    args = ap.parse_args(argv)
    root = args.output_root

    def cfg(name):
        return load(CONFIGS / name).with_overrides(steps=args.steps, output_dir=root / name.split(".")[0])

    t0 = time.perf_counter()
    main_cfg = cfg("mixture_full.conf" if args.full else "mixture.conf")
    s = runner.run(main_cfg)
    l1 = [r["theta_l1_covered"] for r in s.rows]
    print(f"theta recovery ({main_cfg.steps} steps): covered L1 per seed {np.round(l1, 4).tolist()}, "
          f"mean {np.mean(l1):.4f}")
    print(f"  weighted estimates: {np.round([r['estimate'] for r in s.rows], 4).tolist()}")

    s1 = runner.run(cfg("mixture_zeta1.conf"))
    rep = runner.flat_histogram_from_dir(s1.output_dir)
    print(f"flat histogram (zeta=1): worst per-seed max/min {rep.worst_ratio:.3f}, pooled {rep.pooled[2]:.3f}")

    cmp_cfg = cfg("mixture_compare.conf")
    res = runner.compare(runner.method_configs(cmp_cfg), output_dir=root / "compare")
    for m in cmp_cfg.methods:
        errs = res.final_errors(m)
        print(f"compare {m}: final |error| mean {np.mean(list(errs.values())):.4f}, "
              f"per seed {np.round([errs[s] for s in cmp_cfg.seeds], 3).tolist()}")

    orc = runner.oracle_report(cfg("mixture_m10.conf"), output_dir=root / "oracle_m10")
    print(f"stability (m=10): fraction negative {orc.values['stability_fraction_negative_zeta0.75']:.2f}")
    orc50 = runner.oracle_report(main_cfg, output_dir=root / "oracle_m50")
    print(f"barrier: original {orc50.barrier_original:.3f}, flattened {orc50.barrier_flattened:.3f}")
    print(f"done in {time.perf_counter() - t0:.1f} s; outputs under {root}")


if __name__ == "__main__":
    main()
