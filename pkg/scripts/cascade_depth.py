"""Cascade depth and transmitted probability versus the polarisation weight.

The number of reductions n obeys 2^-n <= c < 2^-(n-1); the transmitted
probability telescopes back to c whatever the depth.
"""

import argparse
import math

import numpy as np

from reduxion.cascade import enumerate_outcomes, run_ensemble
from reduxion.scenarios import build_tourmaline


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-traj", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'c_perp^2':>9} {'depth':>5} {'law':>4} {'W_pass':>14} {'MC W_pass':>10} {'mean n':>7}")
    for c in np.geomspace(0.8, 0.01, 12):
        sc = build_tourmaline(c_perp_sq=float(c))
        exact = enumerate_outcomes(sc)
        emp, trajs = run_ensemble(sc, args.n_traj, seed=args.seed)
        law = max(1, math.ceil(-math.log2(c)))
        mean_n = np.mean([t.n_reductions for t in trajs])
        print(f"{c:9.4f} {exact.max_depth():5d} {law:4d} {exact['pass']:14.10f} {emp['pass']:10.4f} {mean_n:7.3f}")


if __name__ == "__main__":
    main()
