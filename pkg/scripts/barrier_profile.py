"""Flattened-energy barrier between the mixture modes as a function of
zeta and the first partition boundary u1.

Usage::

    python scripts/barrier_profile.py [--out barrier_profile.csv]
"""
from __future__ import annotations

import argparse

from csgld.oracle import QuadratureGrid, energy_barrier, flattened_density, theta_star
from csgld.partition import EnergyPartition
from csgld.runner import write_csv
from csgld.target import benchmark_mixture


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="barrier_profile.csv")
    ap.add_argument("--m", type=int, default=50)
    ap.add_argument("--delta-u", type=float, default=1.0)
    args = ap.parse_args(argv)
    target, grid = benchmark_mixture(), QuadratureGrid()
    rows = []
    for u1 in (1.5, 2.0, 2.5, 3.0):
        p = EnergyPartition(args.m, u1, args.delta_u)
        star = theta_star(target, p, grid)
        for zeta in (0.0, 0.25, 0.5, 0.75, 1.0):
            for mode in ("interpolated", "piecewise"):
                flat = flattened_density(target, p, star, zeta, grid, psi_mode=mode)
                b = energy_barrier(flat.x, flat.energy, -6.0, 4.0)
                rows.append((u1, args.delta_u, zeta, mode, b))
                print(f"u1={u1:<4} zeta={zeta:<5} {mode:<12} barrier={b:.4f}")
    write_csv(args.out, ("u1", "delta_u", "zeta", "psi_mode", "barrier"), rows)


if __name__ == "__main__":
    main()
