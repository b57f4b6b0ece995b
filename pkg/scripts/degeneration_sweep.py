"""Optimized horizontal loop lengths from 0 to z for growing n.

Reports the warm-start and optimized lengths, their ratio to the n = 1 value
and the observed decay exponent.  Nothing here asserts a rate.
"""

import argparse
import math

import numpy as np

from htype_lab.curvature import growth_exponent
from htype_lab.geodesic_opt import degeneration_sweep
from htype_lab.group import ProductGroup
from htype_lab.metrics import FinslerSpec, RiemannianSpec, WeightLaw, shrinking_capacity


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[1, 2, 4, 8, 16, 32])
    ap.add_argument("--nodes", type=int, default=129)
    ap.add_argument("--finsler-p", type=float, default=None,
                    help="use the block p-norm metric instead of inverse_power(1)")
    args = ap.parse_args()
    if args.finsler_p:
        spec = FinslerSpec(args.finsler_p, np.eye(1))
    else:
        spec = RiemannianSpec(WeightLaw.inverse_power(1), np.eye(1))
    N = max(shrinking_capacity(spec, n) for n in args.n)
    g = ProductGroup.from_name("heisenberg", N)
    rows = degeneration_sweep(spec, g, [1.0], args.n, math.sqrt(6.0), args.nodes)
    print(f"N = {N}")
    print(f"{'n':>4} {'warm':>10} {'optimized':>10} {'ratio':>8} {'residual':>10} {'iters':>6} conv")
    for r in rows:
        print(f"{r.n:>4} {r.warm_length:>10.5f} {r.optimized_length:>10.5f} "
              f"{r.optimized_length / rows[0].optimized_length:>8.4f} {r.constraint_residual:>10.2e} "
              f"{r.iterations:>6} {r.converged}")
    ns = [r.n for r in rows]
    print(f"observed exponents: warm {growth_exponent(ns, [r.warm_length for r in rows]):.3f}, "
          f"optimized {growth_exponent(ns, [r.optimized_length for r in rows]):.3f}")


if __name__ == "__main__":
    main()
