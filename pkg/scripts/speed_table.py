#!/usr/bin/env python3
"""Iteration-count and decomposition-cost comparison of SVT and GIRAF.

Reproduces the convergence-table protocol: for each grid/filter pair, run
SVT for 50 iterations to fix the reference solution, then count how many
iterations each solver needs to reach MSE < 1e-4 against it, recording the
per-iteration decomposition cost (SVD for SVT, eigen-decomposition for
GIRAF).  Writes bench.csv under --out.

    python scripts/speed_table.py --out runs/speed --grids 65x65,129x129
"""

import argparse
import sys

from slrecon.cli import cmd_bench, parse_extents


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grids", default="65x65,129x129")
    ap.add_argument("--filters", default="15x15")
    ap.add_argument("--accel", type=float, default=1.5)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--out", default="runs/speed")
    ns = ap.parse_args()
    params = dict(
        grids=[list(parse_extents(g)) for g in ns.grids.split(",")],
        filters=[list(parse_extents(f)) for f in ns.filters.split(",")],
        lambda0=[3, 3],
        accel=ns.accel,
        seed=ns.seed,
        oversample=8,
        svt_iters=50,
        giraf_iters=10,
        svt_threshold=3e-2,
        lam=1e8,
        operator="exact",
        cg_tol=1e-10,
        cg_max=400,
        mse_tol=1e-4,
        out=ns.out,
    )
    return cmd_bench(params)


if __name__ == "__main__":
    sys.exit(main())
