#!/usr/bin/env python3
"""Empirical exponents for random slopes, one line per seed.

    python scripts/exponent_sweep.py --target rational --seeds 10 --depth 60
"""
import argparse
import warnings

from sl2approx.exponents import exponent_report
from sl2approx.field import ring
from sl2approx.inputs import RandomSource, parse_complex, parse_krational
from sl2approx.matrices import TargetSpec
from sl2approx.orbit import sweep_irrational, sweep_origin, sweep_rational


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=1)
    ap.add_argument("--target", choices=["origin", "rational", "irrational"], default="origin")
    ap.add_argument("--y", default="1/(1+i)", help="K-rational slope for the rational target")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--depth", type=int, default=60)
    args = ap.parse_args()
    R = ring(args.d)
    one = parse_complex("1", R)
    for i in range(args.seeds):
        z = (RandomSource(f"sweep:z:{i}"), one)
        if args.target == "origin":
            sw = sweep_origin(z, R, args.depth)
        elif args.target == "rational":
            sw = sweep_rational(z, TargetSpec.rational(*parse_krational(args.y, R), one), R, args.depth)
        else:
            sw = sweep_irrational(z, (RandomSource(f"sweep:y:{i}"), one), R, args.depth, args.depth // 2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = exponent_report(sw.records())
        print(f"seed {i:3d}  records {len(sw.results):3d}  mu {rep.mu_emp:.3f}  mu_hat {rep.mu_hat_emp:.3f}  "
              f"checks {'ok' if sw.all_checks_pass else 'FAILED'}")


if __name__ == "__main__":
    main()
