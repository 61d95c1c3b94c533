"""Cascades of evolve -> reduction instant -> jump.

Each stage restarts the schedule clock at zero.  Stage results depend only on
(stage index, current state), so they are memoised; Monte Carlo trajectories
that revisit a branch reuse the solved instant and decomposition.
"""

from __future__ import annotations

import bisect
import itertools
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np

from .evolution import Propagation
from .reduction import (
    InstantKind,
    ReductionEvent,
    ReductionInstant,
    SolverConfig,
    choose_index,
    find_reduction_instant,
)
from .schmidt import Bipartition, SchmidtDecomposition, SchmidtPath
from .state import Ensemble, ModeSpec, PureState

MASK64 = (1 << 64) - 1


class StageOverflow(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Scenario:
    """A cascade problem: system, initial state, cut and per-stage dynamics.

    ``evolution(state, stage)`` returns the stage propagation with the clock
    reset to zero.  If ``truncate`` is set, running out of stages is a valid
    end and the current state is labelled; otherwise it raises StageOverflow.
    """

    name: str
    system: tuple[ModeSpec, ...]
    initial_state: PureState | Ensemble
    cut: Bipartition
    evolution: Callable[[PureState, int], Propagation]
    is_terminal: Callable[[PureState], bool]
    max_stages: int
    label: Callable[[PureState], str] = lambda s: s.format_label(s.dominant_label())
    truncate: bool = False
    solver: SolverConfig = field(default_factory=SolverConfig)
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.max_stages < 1:
            raise ValueError("max_stages must be positive")
        self.cut.validate(self.system)

    def initial_members(self) -> tuple[tuple[float, PureState], ...]:
        if isinstance(self.initial_state, Ensemble):
            return self.initial_state.members
        return ((1.0, self.initial_state),)


@dataclass(frozen=True, eq=False)
class StageResult:
    instant: ReductionInstant
    decomposition: SchmidtDecomposition | None
    propagation: Propagation

    @property
    def weights(self) -> list[float]:
        return self.decomposition.weights if self.decomposition else []

    @cached_property
    def branches(self) -> tuple[PureState, ...]:
        d = self.decomposition
        return tuple(d.branch(j) for j in range(d.rank)) if d else ()

    @cached_property
    def cumulative(self) -> tuple[float, ...]:
        return tuple(itertools.accumulate(self.weights))

    def draw(self, rng) -> int:
        cum = self.cumulative
        j = bisect.bisect_right(cum, rng.random() * cum[-1])
        return min(j, len(cum) - 1)


class StageCache:
    """Thread-safe memo of resolved stages keyed by (stage, state fingerprint)."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self._store: dict = {}
        self._info: dict = {}
        self._lock = threading.Lock()

    def info(self, state: PureState) -> tuple[bool, str]:
        """(terminal?, outcome label) of a state, memoised."""
        hit = self._info.get(id(state))
        if hit is not None and hit[0] is state:
            return hit[1]
        res = self._info.get(state.key)
        if res is None:
            res = (bool(self.scenario.is_terminal(state)), self.scenario.label(state))
            self._info[state.key] = res
        # holding the state keeps its id from being reused
        self._info[id(state)] = (state, res)
        return res

    def results(self) -> list[StageResult]:
        """Every stage resolved so far (each once)."""
        return [v for k, v in self._store.items() if isinstance(v, StageResult)]

    def resolve(self, state: PureState, stage: int) -> StageResult:
        hit = self._store.get((stage, id(state)))
        if hit is not None and hit[0] is state:
            return hit[1]
        key = (stage, state.key)
        res = self._store.get(key)
        if res is None:
            res = resolve_stage(self.scenario, state, stage)
        with self._lock:
            res = self._store.setdefault(key, res)
            self._store[(stage, id(state))] = (state, res)
        return res


def resolve_stage(sc: Scenario, state: PureState, stage: int) -> StageResult:
    prop = sc.evolution(state, stage)
    path = SchmidtPath(prop, sc.cut)
    inst = find_reduction_instant(path, 0.0, prop.horizon, sc.solver)
    dec = path(inst.t_red) if inst.kind is not InstantKind.NONE else None
    return StageResult(inst, dec, prop)


@dataclass(frozen=True, eq=False)
class Trajectory:
    events: tuple[ReductionEvent, ...]
    final_state: PureState
    total_probability: float
    label: str
    terminal: bool
    initial_weight: float = 1.0

    @property
    def n_reductions(self) -> int:
        return len(self.events)

    @property
    def jump_times(self) -> list[float]:
        return [e.t_abs for e in self.events]


@dataclass(frozen=True)
class PathRecord:
    outcome: str
    probability: float
    n_reductions: int
    indices: tuple[int, ...]


@dataclass(frozen=True)
class OutcomeDistribution:
    probabilities: Mapping[str, float]
    paths: tuple[PathRecord, ...] = ()

    def __getitem__(self, label: str) -> float:
        return self.probabilities.get(label, 0.0)

    @property
    def total(self) -> float:
        return float(sum(self.probabilities.values()))

    def max_depth(self, outcome: str | None = None) -> int:
        depths = [p.n_reductions for p in self.paths if outcome is None or p.outcome == outcome]
        return max(depths, default=0)

    def tv_distance(self, other: "OutcomeDistribution") -> float:
        keys = set(self.probabilities) | set(other.probabilities)
        return 0.5 * sum(abs(self[k] - other[k]) for k in keys)


def _step(sc: Scenario, cache: StageCache, state: PureState, stage: int):
    """None when the path ends here, else the stage result to branch on."""
    if cache.info(state)[0]:
        return None
    res = cache.resolve(state, stage)
    if res.instant.kind is InstantKind.NONE:
        return None
    return res


def run_trajectory(sc: Scenario, rng, cache: StageCache | None = None) -> Trajectory:
    cache = cache or StageCache(sc)
    members = sc.initial_members()
    k = choose_index([p for p, _ in members], rng) if len(members) > 1 else 0
    p0, state = members[k]
    events: list[ReductionEvent] = []
    prob = 1.0
    t_abs = 0.0
    for stage in range(sc.max_stages):
        res = _step(sc, cache, state, stage)
        if res is None:
            break
        j = res.draw(rng)
        w = res.decomposition.weights[j]
        state = res.branches[j]
        prob *= w
        t_abs += res.instant.t_red
        events.append(ReductionEvent(res.instant.t_red, j, w, state, res.instant.kind, stage, cache.info(state)[1], t_abs))
    terminal, label = cache.info(state)
    if len(events) == sc.max_stages and not terminal and not sc.truncate:
        if _step(sc, cache, state, sc.max_stages) is not None:
            raise StageOverflow(f"{sc.name}: no terminal state after {sc.max_stages} stages")
    return Trajectory(tuple(events), state, prob, label, terminal, p0)


def enumerate_outcomes(sc: Scenario, cache: StageCache | None = None) -> OutcomeDistribution:
    """Exact outcome distribution by depth-first expansion of every jump branch."""
    cache = cache or StageCache(sc)
    probs: dict[str, float] = {}
    paths: list[PathRecord] = []

    def leaf(state, W, idx):
        lab = sc.label(state)
        probs[lab] = probs.get(lab, 0.0) + W
        paths.append(PathRecord(lab, W, len(idx), idx))

    stack = [(p, s, 0, ()) for p, s in reversed(sc.initial_members())]
    while stack:
        W, state, stage, idx = stack.pop()
        if stage == sc.max_stages:
            if not sc.truncate and _step(sc, cache, state, stage) is not None:
                raise StageOverflow(f"{sc.name}: no terminal state after {sc.max_stages} stages")
            leaf(state, W, idx)
            continue
        res = _step(sc, cache, state, stage)
        if res is None:
            leaf(state, W, idx)
            continue
        d = res.decomposition
        for j in reversed(range(d.rank)):
            stack.append((W * d.weights[j], res.branches[j], stage + 1, idx + (j,)))
    return OutcomeDistribution(dict(sorted(probs.items())), tuple(paths))


def derive_seed(master: int, index: int) -> int:
    """splitmix64 finaliser applied to master + (index + 1) * golden gamma."""
    z = (int(master) + (int(index) + 1) * 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def trajectory_rng(master: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master, index)))


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("REDUXION_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def run_ensemble(
    sc: Scenario, n_traj: int, seed: int = 0, workers: int | None = None, cache: StageCache | None = None
) -> tuple[OutcomeDistribution, list[Trajectory]]:
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    cache = cache or StageCache(sc)

    def chunk(lo, hi):
        return [run_trajectory(sc, trajectory_rng(seed, i), cache) for i in range(lo, hi)]

    n_workers = min(_worker_count(workers), n_traj)
    if n_workers == 1:
        records = chunk(0, n_traj)
    else:
        bounds = np.linspace(0, n_traj, n_workers + 1).astype(int)
        with ThreadPoolExecutor(n_workers) as pool:
            parts = list(pool.map(chunk, bounds[:-1], bounds[1:]))
        records = [t for part in parts for t in part]
    counts: dict[str, int] = {}
    for t in records:
        counts[t.label] = counts.get(t.label, 0) + 1
    dist = OutcomeDistribution({k: v / n_traj for k, v in sorted(counts.items())})
    return dist, records
