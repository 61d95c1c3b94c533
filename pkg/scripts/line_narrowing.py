"""No-emission weight at the first reduction for N detector channels.

The weight falls as 1/(N+1), and the first instant lands where the survival
amplitude reaches that value, i.e. at tau ln(N+1).
"""

import math

from reduxion.cascade import resolve_stage
from reduxion.scenarios import build_detection


def main():
    print(f"{'N':>3} {'w0':>12} {'1/(N+1)':>12} {'t_red':>10} {'ln(N+1)':>10}")
    for N in range(1, 11):
        sc = build_detection(N=N, max_stages=1)
        res = resolve_stage(sc, sc.initial_state, 0)
        w0 = min(res.weights)
        print(f"{N:3d} {w0:12.9f} {1 / (N + 1):12.9f} {res.instant.t_red:10.6f} {math.log(N + 1):10.6f}")


if __name__ == "__main__":
    main()
