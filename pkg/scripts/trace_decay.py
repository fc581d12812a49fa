#!/usr/bin/env python3
"""Trace functional of G*f for f = delta^(-s+t): decay rate and the ratio
T_{1/128}/T_{1/8}.

A nonnegative density gives G*f >= c delta^s, hence T_eps >= c' eps and the
ratio cannot fall much below 1/16; this script measures how close it gets.
"""
import argparse

import numpy as np

from fracball.experiments import boundary_family
from fracball.kernels import ProblemParams
from fracball.potentials import PotentialField
from fracball.weighted_norms import dyadic_schedule, trace_limit_estimate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--s", type=float, nargs="+", default=[0.25, 0.75])
    ap.add_argument("--t", type=float, default=0.01)
    ap.add_argument("--kmax", type=int, default=9)
    args = ap.parse_args()
    sched = dyadic_schedule(3, args.kmax)
    for s in args.s:
        p = ProblemParams(n=2, s=s)
        u = PotentialField(boundary_family(p, args.t), p).as_field()
        rep = trace_limit_estimate(u, sched, p)
        vals = np.array(rep.values)
        local = np.log2(vals[:-1] / vals[1:])
        print(f"s = {s}: classification {rep.classification}, fitted exponent {rep.fit_exponent:.3f}")
        for e, v in zip(sched, vals):
            print(f"  eps = {e:<12.6g} T = {v:.6e}")
        print(f"  local exponents {np.round(local, 3).tolist()}")
        print(f"  T(1/128)/T(1/8) = {vals[4] / vals[0]:.4f}   (pure eps^1 decay: {1 / 16:.4f})")


if __name__ == "__main__":
    main()
