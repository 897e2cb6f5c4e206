"""Fit the decay rate of the theta error from the ``theta_seed*.csv`` files of a run.

The stochastic-approximation theory predicts ``E|theta_k - theta*|^2 = O(omega_k)``,
i.e. an L2 error slope of about ``-alpha/2`` in log-log coordinates.

Usage::

    python scripts/theta_decay.py runs/mixture [--from-step 10000]
"""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from csgld.runner import read_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("run_dir", type=Path)
    ap.add_argument("--from-step", type=int, default=10_000)
    args = ap.parse_args(argv)
    files = sorted(args.run_dir.glob("theta_seed*.csv"))
    if not files:
        raise SystemExit(f"no theta_seed*.csv in {args.run_dir}")
    curves = []
    for f in files:
        rows = read_csv(f)
        if rows[0]["l2_error"] == "":
            raise SystemExit(f"{f} has no oracle errors (not a contour run on a 1-D target)")
        step = np.array([int(r["step"]) for r in rows])
        l2 = np.array([float(r["l2_error"]) for r in rows])
        curves.append((step, l2))
        keep = step >= args.from_step
        slope = np.polyfit(np.log(step[keep]), np.log(l2[keep]), 1)[0]
        print(f"{f.name}: final L2 {l2[-1]:.4g}, log-log slope {slope:.3f}")
    step = curves[0][0]
    rms = np.sqrt(np.mean([c[1] ** 2 for c in curves], axis=0))
    keep = step >= args.from_step
    slope = np.polyfit(np.log(step[keep]), np.log(rms[keep]), 1)[0]
    print(f"pooled RMS L2: final {rms[-1]:.4g}, log-log slope {slope:.3f}")


if __name__ == "__main__":
    main()
