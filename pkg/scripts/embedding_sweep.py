#!/usr/bin/env python3
"""Norm ratios ||G*f_t||_{L^q_r} / ||f_t||_{L^p_r} for the boundary family
f_t = delta^(-s+t) over a range of p, written as CSV."""
import argparse
import csv
import sys

from fracball.errors import PreconditionError
from fracball.experiments import embedding_table
from fracball.kernels import ProblemParams


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2)
    ap.add_argument("--s", type=float, default=0.75)
    ap.add_argument("--r", type=float, default=0.5)
    ap.add_argument("--p", type=float, nargs="+", default=[1.0, 1.2, 2.0, 6.0])
    ap.add_argument("--q", type=float, default=1.2, help="target exponent when p = 1")
    args = ap.parse_args()
    params = ProblemParams(n=args.n, s=args.s, r=args.r)
    w = csv.writer(sys.stdout)
    w.writerow(["p", "q_u", "q_grad", "t", "u_ratio", "grad_ratio", "max_change"])
    for p in args.p:
        try:
            rep = embedding_table(params, p, args.q if p == 1.0 else None)
        except PreconditionError as exc:
            print(f"# p = {p}: {exc}", file=sys.stderr)
            continue
        for row in rep["rows"]:
            if "skipped" in row:
                continue
            w.writerow([p, rep["q_u"], rep["q_grad"], row["t"], row["u_ratio"],
                        row.get("grad_ratio", ""), rep["max_refinement_change"]])


if __name__ == "__main__":
    main()
