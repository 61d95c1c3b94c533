"""Reduction instant and intermediate weight across the decay-rate ratio.

For small ratios the intermediate weight crosses 1/2 near ln 2; for large
ratios the instant sits at the kinetic peak with weight close to 1/beta.
"""

import numpy as np

from reduxion.cascade import resolve_stage
from reduxion.evolution import weak_boson_peak
from reduxion.scenarios import build_weak_boson


def main():
    print(f"{'beta':>8} {'kind':>18} {'tau_red':>10} {'tau_0':>10} {'w1(t_red)':>10} {'w1 peak':>10}")
    for beta in np.geomspace(0.01, 100, 13):
        sc = build_weak_boson(1.0, float(beta))
        res = resolve_stage(sc, sc.initial_state, 0)
        tau0, peak = weak_boson_peak(float(beta))
        w1 = min(res.weights)
        print(f"{beta:8.3f} {res.instant.kind.value:>18} {res.instant.t_red:10.6f} {tau0:10.6f} {w1:10.6f} {peak:10.6f}")


if __name__ == "__main__":
    main()
