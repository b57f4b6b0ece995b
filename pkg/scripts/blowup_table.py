"""Curvature blow-up and obstruction growth across weight laws.

Prints n, a_n, K(P_n), K(Q_n) and the obstruction norm, then the fitted
log-log slopes, for a few strictly weak laws.
"""

import argparse

import numpy as np

from htype_lab.curvature import curvature_sweep, growth_exponent
from htype_lab.group import ProductGroup
from htype_lab.metrics import RiemannianSpec, WeightLaw

LAWS = {
    "inverse_power(1)": WeightLaw.inverse_power(1),
    "inverse_power(0.5)": WeightLaw.inverse_power(0.5),
    "exponential(0.9)": WeightLaw.exponential(0.9),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--algebra", default="quaternionic")
    ap.add_argument("--n-max", type=int, default=32)
    args = ap.parse_args()
    g = ProductGroup.from_name(args.algebra, args.n_max)
    z = np.eye(g.dim_w)[0]
    ns = list(range(1, args.n_max + 1))
    for label, law in LAWS.items():
        spec = RiemannianSpec.for_group(g, law)
        rows = curvature_sweep(spec, g, z, z, ns)
        print(f"# {label}")
        print(f"{'n':>4} {'a_n':>12} {'K_P':>14} {'K_Q':>14} {'obstruction':>14}")
        for r in rows[:: max(1, len(rows) // 8)]:
            print(f"{r['n']:>4} {r['a_n']:>12.5g} {r['K_P']:>14.6g} {r['K_Q']:>14.6g} {r['obstruction']:>14.6g}")
        slopes = [growth_exponent(ns, [abs(r[k]) for r in rows]) for k in ("K_P", "K_Q", "obstruction")]
        print("slopes (log|value| vs log n): K_P {:.3f}, K_Q {:.3f}, obstruction {:.3f}\n".format(*slopes))


if __name__ == "__main__":
    main()
