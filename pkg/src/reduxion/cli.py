"""Command-line front end.

    reduxion run --config cfg.json [--seed N|auto] [--out PATH] [--format json|csv]
    reduxion list
    reduxion verify [--filter NAME]

Exit codes: 0 success, 1 verify failures, 2 invalid config, 3 solver did not
converge, 4 stage overflow.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from typing import Any

import numpy as np

from .cascade import StageOverflow, enumerate_outcomes, run_ensemble, run_trajectory, trajectory_rng
from .reduction import NonConvergent, SolverConfig, entropy_scan
from .scenarios import ScenarioParamError, build, describe
from .schmidt import SchmidtPath
from .state import StateError

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER, EXIT_OVERFLOW = 0, 1, 2, 3, 4
MODES = ("trajectory", "ensemble", "enumerate", "entropy-scan", "verify")
TOP_KEYS = {"scenario", "mode", "solver", "output", "n_traj", "seed", "horizon", "grid", "times"}
DEFAULT_SEED = 0


class ConfigError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class RunConfig:
    scenario: str
    params: dict
    mode: str
    solver: dict
    out_path: str | None
    out_format: str
    n_traj: int = 1000
    seed: int = DEFAULT_SEED
    horizon: float | None = None
    grid: int = 200
    times: tuple[float, ...] | None = None


def _num(x: float) -> str:
    return format(x, ".17g")


def load_config(raw: dict, seed_arg: str | None = None, out: str | None = None, fmt: str | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    sc = raw.get("scenario")
    if isinstance(sc, str):
        sc = {"name": sc}
    if not isinstance(sc, dict) or "name" not in sc:
        raise ConfigError("scenario must be an object with a name")
    mode = raw.get("mode", "enumerate")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    solver = raw.get("solver") or {}
    fields = {f.name for f in dataclasses.fields(SolverConfig)}
    if not isinstance(solver, dict) or set(solver) - fields:
        raise ConfigError(f"solver block accepts only {sorted(fields)}")
    output = raw.get("output") or {}
    if not isinstance(output, dict):
        raise ConfigError("output must be an object")
    out_format = fmt or output.get("format", "json")
    if out_format not in ("json", "csv"):
        raise ConfigError("output format must be json or csv")
    seed = raw.get("seed", DEFAULT_SEED)
    if seed_arg is not None:
        seed = int.from_bytes(os.urandom(8), "little") if seed_arg == "auto" else seed_arg
    try:
        seed = int(seed)
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be an integer or 'auto', got {seed!r}") from None
    if seed < 0:
        raise ConfigError("seed must be non-negative")
    n_traj = raw.get("n_traj", 1000)
    if isinstance(n_traj, bool) or not isinstance(n_traj, int) or n_traj < 1:
        raise ConfigError("n_traj must be a positive integer")
    horizon = raw.get("horizon")
    if horizon is not None and not (isinstance(horizon, (int, float)) and horizon > 0):
        raise ConfigError("horizon must be positive")
    grid = raw.get("grid", 200)
    if isinstance(grid, bool) or not isinstance(grid, int) or grid < 1:
        raise ConfigError("grid must be a positive integer (number of intervals)")
    times = raw.get("times")
    if times is not None:
        if not isinstance(times, list) or not all(isinstance(t, (int, float)) and t >= 0 for t in times):
            raise ConfigError("times must be a list of non-negative numbers")
        times = tuple(float(t) for t in times)
    cfg = RunConfig(
        scenario=sc["name"],
        params=dict(sc.get("params") or {}),
        mode=mode,
        solver=dict(solver),
        out_path=out or output.get("path"),
        out_format=out_format,
        n_traj=n_traj,
        seed=seed,
        horizon=None if horizon is None else float(horizon),
        grid=grid,
        times=times,
    )
    return cfg


def make_scenario(cfg: RunConfig):
    try:
        sc = build(cfg.scenario, cfg.params)
        if cfg.solver:
            sc = dataclasses.replace(sc, solver=dataclasses.replace(sc.solver, **cfg.solver))
    except (ScenarioParamError, StateError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return sc


# -- mode runners: each returns (json payload, csv rows) ------------------------------


def _trajectory(cfg, sc):
    tr = run_trajectory(sc, trajectory_rng(cfg.seed, 0))
    events = [
        {
            "stage": e.stage,
            "t_red": e.t_red,
            "kind": e.kind.value,
            "outcome_index": e.outcome_index,
            "outcome_label": e.label,
            "probability": e.probability,
        }
        for e in tr.events
    ]
    final = {"total_probability": tr.total_probability, "terminal": tr.label}
    rows = [["stage", "t_red", "kind", "outcome_index", "outcome_label", "probability"]]
    rows += [[e["stage"], _num(e["t_red"]), e["kind"], e["outcome_index"], e["outcome_label"], _num(e["probability"])] for e in events]
    rows.append(["final", "", "", "", tr.label, _num(tr.total_probability)])
    return events + [final], rows


def _ensemble(cfg, sc):
    dist, records = run_ensemble(sc, cfg.n_traj, cfg.seed)
    n = cfg.n_traj
    stats = {}
    for label, f in dist.probabilities.items():
        stats[label] = {"count": int(round(f * n)), "frequency": f, "stderr": math.sqrt(f * (1 - f) / n)}
    depth = np.array([t.n_reductions for t in records], dtype=float)
    payload = {
        "scenario": sc.name,
        "n_traj": n,
        "seed": cfg.seed,
        "distribution": dict(dist.probabilities),
        "stats": stats,
        "mean_reductions": float(depth.mean()),
    }
    rows = [["outcome", "count", "frequency", "stderr"]]
    rows += [[k, v["count"], _num(v["frequency"]), _num(v["stderr"])] for k, v in stats.items()]
    return payload, rows


def _enumerate(cfg, sc):
    dist = enumerate_outcomes(sc)
    rows = [["outcome", "probability"]] + [[k, _num(v)] for k, v in dist.probabilities.items()]
    return dict(dist.probabilities), rows


def _entropy_scan(cfg, sc):
    state = sc.initial_members()[0][1]
    prop = sc.evolution(state, 0)
    path = SchmidtPath(prop, sc.cut)
    if cfg.times is not None:
        ts = np.array(cfg.times)
    else:
        ts = np.linspace(0.0, cfg.horizon or prop.horizon, cfg.grid + 1)
    samples = entropy_scan(path, ts)
    k = max(path.n_outcomes, max((len(s.weights) for s in samples), default=0))
    header = ["t"] + [f"w_{j}" for j in range(k)] + ["sigma"]
    rows = [header]
    payload = []
    for s in samples:
        w = list(s.weights) + [0.0] * (k - len(s.weights))
        rows.append([_num(s.t)] + [_num(x) for x in w] + [_num(s.sigma)])
        payload.append({"t": s.t, "weights": w, "sigma": s.sigma})
    return payload, rows


def _verify_rows(name_filter=None):
    from .acceptance import run_rows

    results = run_rows(name_filter)
    rows = [["criterion", "name", "passed", "detail"]]
    rows += [[r["criterion"], r["name"], "pass" if r["passed"] else "FAIL", r["detail"]] for r in results]
    return results, rows


RUNNERS = {"trajectory": _trajectory, "ensemble": _ensemble, "enumerate": _enumerate, "entropy-scan": _entropy_scan}


def _emit(payload: Any, rows: list, fmt: str, path: str | None) -> None:
    if fmt == "json":
        text = json.dumps(payload, indent=2) + "\n"
    else:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows)
        text = buf.getvalue()
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        cfg = load_config(raw, args.seed, args.out, args.format)
        if args.seed == "auto":
            print(f"seed: {cfg.seed}", file=sys.stderr)
        if cfg.mode == "verify":
            results, rows = _verify_rows()
            _emit(results, rows, cfg.out_format, cfg.out_path)
            return EXIT_OK if all(r["passed"] for r in results) else EXIT_VERIFY
        sc = make_scenario(cfg)
        payload, rows = RUNNERS[cfg.mode](cfg, sc)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergent as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except StageOverflow as exc:
        print(f"stage overflow: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    try:
        _emit(payload, rows, cfg.out_format, cfg.out_path)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def cmd_list(args) -> int:
    for entry in describe():
        print(f"{entry['name']}: {entry['doc']}")
        for p in entry["params"]:
            print(f"  {p['name']} ({p['type']}, default {p['default']!r}, bounds {p['bounds']}): {p['doc']}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results, _ = _verify_rows(args.filter)
    for r in results:
        print(f"[{'pass' if r['passed'] else 'FAIL'}] {r['criterion']:>2} {r['name']}: {r['detail']}")
    failed = sum(not r["passed"] for r in results)
    print(f"{len(results) - failed} passed, {failed} failed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reduxion", description="Maximum-entropy reduction cascades.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", help="integer seed or 'auto' (default: config seed, else 0)")
    run.add_argument("--out", help="output path (default: config output.path, else stdout)")
    run.add_argument("--format", choices=("json", "csv"))
    run.set_defaults(func=cmd_run)
    lst = sub.add_parser("list", help="list scenario variants and parameter schemas")
    lst.set_defaults(func=cmd_list)
    ver = sub.add_parser("verify", help="run the acceptance table")
    ver.add_argument("--filter", help="only rows whose name contains this text")
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
