#!/usr/bin/env python3
"""Drift/zero-order solve at increasing collocation resolution: iteration
counts, residual and a priori ratio per level."""
import argparse
import time

from fracball.kernels import ProblemParams
from fracball.quadrature import ScalarField, VectorField
from fracball.solver import CoefficientBundle, SolverSpec, apriori_ratio, solve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--b", type=float, nargs=2, default=[0.3, 0.0])
    ap.add_argument("--c", type=float, default=0.2)
    ap.add_argument("--levels", type=int, nargs="+", default=[3, 4, 5])
    args = ap.parse_args()
    p = ProblemParams(n=2, s=0.75, r=0.5, p=1.0)
    coeffs = CoefficientBundle(VectorField.constant(args.b), ScalarField.constant(args.c, 2),
                               tuple(map(str, args.b)), str(args.c))
    f = ScalarField.constant(1.0, 2)
    print("levels nodes iterations residual apriori seconds")
    for lv in args.levels:
        spec = SolverSpec(radial_levels=lv)
        t0 = time.perf_counter()
        sol = solve(f, coeffs, p, spec)
        ratio = apriori_ratio(sol, f, p, spec)
        print(f"{lv:6d} {len(sol.nodes):5d} {str(sol.iterations_used):>12} "
              f"{sol.diagnostics['residual_norm']:.3e} {ratio:.4f} {time.perf_counter() - t0:.1f}")


if __name__ == "__main__":
    main()
