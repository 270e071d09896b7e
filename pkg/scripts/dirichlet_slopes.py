#!/usr/bin/env python3
"""Distribution of Dirichlet log-log slopes over random seeds.

Each seed gives one point z in the unit box; the exhaustive minimum of
|qz - p| over |q| <= Q is fitted against Q on a geometric grid.

    python scripts/dirichlet_slopes.py --seeds 20 --qmin 4 --qmax 10 --step 1
"""
import argparse
import math

import numpy as np

from sl2approx.exponents import dirichlet_profile, fit_slope
from sl2approx.field import ring
from sl2approx.inputs import RandomSource


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=1)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--prefix", default="slopes")
    ap.add_argument("--qmin", type=float, default=4, help="log2 of the smallest Q")
    ap.add_argument("--qmax", type=float, default=10, help="log2 of the largest Q")
    ap.add_argument("--step", type=float, default=1.0, help="grid step in log2 Q")
    args = ap.parse_args()
    R = ring(args.d)
    exps = np.arange(args.qmin, args.qmax + 1e-9, args.step)
    Qs = [2.0 ** e for e in exps]
    slopes = []
    for i in range(args.seeds):
        z = RandomSource(f"{args.prefix}:{i}").at(256)
        prof = dirichlet_profile(z, Qs, R)
        s = fit_slope([math.log(r.Q) for r in prof], [math.log(r.err) for r in prof])
        slopes.append(s)
        print(f"seed {i:3d}  slope {s:+.3f}")
    a = np.array(slopes)
    print(f"min {a.min():+.3f}  median {np.median(a):+.3f}  max {a.max():+.3f}  "
          f"share <= -0.9: {np.mean(a <= -0.9):.2f}")


if __name__ == "__main__":
    main()
