#!/usr/bin/env python3
"""Conformality probe sweep for shear maps x -> x + (C(x_n), 0, .., 0).

For C with slope c at the base height the horospherical ratio along the
special point family tends to sqrt(1 + c^2) as t -> -inf; c = 0 keeps
the ratio at 1 (the conformal case).
"""

import argparse
import math

from heintze.maps import PiecewiseLinear, Shear, conformal_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--slopes", default="0,0.5,1,2")
    ap.add_argument("--t", default="-2,-4,-6,-8")
    ap.add_argument("--n", type=int, default=2)
    args = ap.parse_args()

    slopes = [float(s) for s in args.slopes.split(",")]
    t_vals = [float(t) for t in args.t.split(",")]
    header = "c \\ t " + "".join(f"{t:>12.1f}" for t in t_vals)
    print(header + f"{'limit':>12}")
    for c in slopes:
        spec = Shear(args.n, PiecewiseLinear.linear(c))
        ratios = conformal_probe(spec, args.n, t_vals)
        cells = "".join(f"{r:>12.6f}" for r in ratios)
        print(f"{c:<6g}{cells}{math.sqrt(1 + c * c):>12.6f}")


if __name__ == "__main__":
    main()
