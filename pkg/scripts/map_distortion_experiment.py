#!/usr/bin/env python3
"""Random Jordan-family maps: empirical distortion vs theoretical bound.

Samples maps F(x) = (a_0 I + a_1 N + ...) x + v + (C(x_n), 0, ..)^T on
(R^n, D_{J_n}), measures min/max of dist(Fx, Fy)/dist(x, y) over random
pairs, and checks the extremes against the shear x polynomial bound
product.  Zero violations expected.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from heintze.linalg import jordan_block
from heintze.maps import (
    JordanFamilyMap,
    PiecewiseLinear,
    empirical_bilip,
    jordan_family_bound,
)
from heintze.metric import BoundarySpace


def random_pwl(rng, max_slope):
    k = int(rng.integers(1, 6))
    ys = np.unique(np.sort(rng.uniform(-4, 4, k)))
    if len(ys) < 2:
        return PiecewiseLinear.constant(float(rng.uniform(-2, 2)))
    slopes = rng.uniform(-max_slope, max_slope, len(ys) - 1)
    v0 = float(rng.uniform(-2, 2))
    vals = np.concatenate([[v0], v0 + np.cumsum(slopes * np.diff(ys))])
    return PiecewiseLinear(tuple(zip(ys.tolist(), vals.tolist())))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--maps", type=int, default=100)
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-slope", type=float, default=2.0)
    ap.add_argument("--out", default="out_maps/distortion.csv")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    spaces = {n: BoundarySpace(jordan_block(1.0, n)) for n in (2, 3, 4)}
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    violations = 0
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "bound", "min_ratio", "max_ratio", "inside"])
        for i in range(args.maps):
            n = (2, 3, 4)[i % 3]
            a0 = float(rng.uniform(0.4, 2.0))
            if rng.random() < 0.5:
                a0 = -a0
            spec = JordanFamilyMap(
                n,
                (a0,) + tuple(rng.uniform(-1.5, 1.5, n - 2)),
                tuple(rng.uniform(-3, 3, n)),
                random_pwl(rng, args.max_slope),
            )
            bound = jordan_family_bound(spec)
            mn, mx = empirical_bilip(spec, spaces[n], samples=args.samples,
                                     seed=int(rng.integers(0, 2**31)))
            inside = 1.0 / bound <= mn and mx <= bound
            violations += 0 if inside else 1
            w.writerow([n, bound, mn, mx, inside])
    print(f"seed = {args.seed}; {args.maps} maps, {violations} violations; "
          f"wrote {args.out}")


if __name__ == "__main__":
    main()
