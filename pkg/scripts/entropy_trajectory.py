"""Print the reduction entropy along the first stage of a scenario.

    python3 scripts/entropy_trajectory.py emission --param tau=2 --points 40
"""

import argparse
import json

import numpy as np

from reduxion.reduction import entropy_scan, find_reduction_instant
from reduxion.scenarios import build
from reduxion.schmidt import SchmidtPath


def parse_param(text):
    key, _, value = text.partition("=")
    return key, json.loads(value)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("scenario")
    ap.add_argument("--param", action="append", type=parse_param, default=[])
    ap.add_argument("--points", type=int, default=30)
    args = ap.parse_args()

    sc = build(args.scenario, dict(args.param))
    prop = sc.evolution(sc.initial_members()[0][1], 0)
    path = SchmidtPath(prop, sc.cut)
    inst = find_reduction_instant(path, 0.0, prop.horizon, sc.solver)
    print(f"# {sc.name}: t_red={inst.t_red} kind={inst.kind.value} sigma={inst.sigma:.6f}")
    for row in entropy_scan(path, np.linspace(0, prop.horizon, args.points + 1)):
        bar = "#" * int(round(40 * row.sigma / max(inst.sigma, 1e-12)))
        print(f"{row.t:9.4f} {row.sigma:9.6f} {bar}")


if __name__ == "__main__":
    main()
