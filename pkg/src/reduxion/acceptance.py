"""Closed-form acceptance table, shared by ``reduxion verify`` and the test suite.

Each row is a named check returning ``(passed, detail)``.  Rows are grouped by
criterion number; a criterion passes when all of its rows pass.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cascade import StageCache, enumerate_outcomes, resolve_stage, run_ensemble
from .evolution import propagate, tensor_propagations, weak_boson_curves, weak_boson_peak
from .reduction import (
    InstantKind,
    find_reduction_instant,
    maximize_representation_entropy,
    reduce_ensemble,
    reduction_entropy,
)
from .scenarios import REGISTRY, build
from .schmidt import Bipartition, SchmidtPath, schmidt_decompose
from .state import Ensemble, PureState, gauge_mode, matter_mode, tensor

MC_TRAJ = 100_000
MC_SEED = 20240611


@dataclass(frozen=True)
class Row:
    criterion: int
    name: str
    run: Callable[[], tuple[bool, str]]


def _close(value, target, tol) -> tuple[bool, str]:
    err = abs(value - target)
    return err <= tol, f"value={value:.12g} target={target:.12g} err={err:.3g} tol={tol:g}"


# 1 -- tourmaline ------------------------------------------------------------


def _tourmaline() -> tuple[bool, str]:
    t0 = time.perf_counter()
    ok, parts = True, []
    for c, depth in ((0.75, 1), (0.3, 2), (0.2, 3), (0.05, 5)):
        d = enumerate_outcomes(build("tourmaline", {"c_perp_sq": c}))
        good = abs(d["pass"] - c) <= 1e-9 and d.max_depth("pass") == depth
        ok &= good
        parts.append(f"c={c}: W_pass={d['pass']:.12g} n={d.max_depth('pass')}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 1.0
    return ok, "; ".join(parts) + f"; {elapsed:.2f}s"


# 2 -- absorption --------------------------------------------------------------


def _absorption() -> tuple[bool, str]:
    ok, parts = True, []
    for p in (0.4, 0.8, 0.97):
        d = enumerate_outcomes(build("absorption", {"p_abs": p}))
        depth = d.max_depth()
        good = abs(d["absorbed"] - p) <= 1e-9 and ((depth > 1) if p > 0.5 else depth == 1)
        ok &= good
        parts.append(f"p={p}: W0={d['absorbed']:.12g} stages={depth}")
    return ok, "; ".join(parts)


# 3 -- emission ----------------------------------------------------------------------


def _emission_instant() -> tuple[bool, str]:
    ok, parts = True, []
    for tau in (1.0, 2.5):
        sc = build("emission", {"tau": tau})
        t = resolve_stage(sc, sc.initial_state, 0).instant.t_red
        good, detail = _close(t, tau * math.log(2), 1e-6 * tau)
        ok &= good
        parts.append(f"tau={tau}: {detail}")
    return ok, "; ".join(parts)


def _emission_survival() -> tuple[bool, str]:
    worst = 0.0
    for n in range(1, 11):
        d = enumerate_outcomes(build("emission", {"max_stages": n}))
        worst = max(worst, abs(d["excited"] - 2.0 ** -n))
    return worst <= 1e-9, f"max |W_excited(n) - 2^-n| = {worst:.3g}"


def _emission_monte_carlo() -> tuple[bool, str]:
    t0 = time.perf_counter()
    tau = 1.0
    sc = build("emission", {"tau": tau})
    _, trajs = run_ensemble(sc, MC_TRAJ, MC_SEED)
    worst = 0.0
    for n in range(1, 11):
        boundary = None
        alive = 0
        for tr in trajs:
            if len(tr.events) >= n and tr.events[n - 1].label == "excited":
                alive += 1
                boundary = tr.events[n - 1].t_abs
        p = math.exp(-boundary / tau)
        sd = math.sqrt(p * (1 - p) / MC_TRAJ)
        worst = max(worst, abs(alive / MC_TRAJ - p) / sd)
    elapsed = time.perf_counter() - t0
    return worst < 4.0 and elapsed < 30.0, f"max deviation {worst:.2f} sd; {elapsed:.1f}s"


# 4 -- detection -----------------------------------------------------------------


def _detection() -> tuple[bool, str]:
    ok, parts = True, []
    for N in (1, 3, 9):
        sc = build("detection", {"N": N, "max_stages": 2})
        w = resolve_stage(sc, sc.initial_state, 0).weights
        err_w = max(abs(x - 1.0 / (N + 1)) for x in w)
        W0 = enumerate_outcomes(sc)["undetected"]
        err_W = abs(W0 - (N + 1) ** -2.0)
        ok &= len(w) == N + 1 and err_w <= 1e-8 and err_W <= 1e-8
        parts.append(f"N={N}: weight err={err_w:.2g} W0 err={err_W:.2g}")
    return ok, "; ".join(parts)


# 5 -- superposition ------------------------------------------------------------------


def _superposition_outcomes() -> tuple[bool, str]:
    ok, parts = True, []
    for c in (0.3, 0.7):
        d = enumerate_outcomes(build("superposition", {"c_s": math.sqrt(c), "c_sbar": math.sqrt(1 - c)}))
        good, detail = _close(d["s"], c, 1e-9)
        ok &= good
        parts.append(f"|c_s|^2={c}: {detail}")
    return ok, "; ".join(parts)


def _superposition_first_instant() -> tuple[bool, str]:
    ok, parts = True, []
    for c, target in ((0.3, 0.0), (0.7, 0.3)):
        sc = build("superposition", {"c_s": math.sqrt(c), "c_sbar": math.sqrt(1 - c)})
        inst = resolve_stage(sc, sc.initial_state, 0).instant
        mu0 = math.exp(-inst.t_red / sc.params["tau"])
        good, detail = _close(mu0, target, 1e-6)
        ok &= good
        parts.append(f"|c_s|^2={c}: |mu0|^2 {detail} ({inst.kind.value})")
    return ok, "; ".join(parts)


# 6 -- atom-photon -----------------------------------------------------------------


def atom_photon_oracle(sigma0: float, n: int = 2_000_001) -> float:
    """Grid maximiser of (1 - x) sigma0 + H(x) over x = |mu0|^2 in [0, 1]."""
    x = np.linspace(0.0, 1.0, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(x > 0, x * np.log(x), 0.0) - np.where(x < 1, (1 - x) * np.log1p(-x), 0.0)
    f = (1 - x) * sigma0 + h
    return float(x[np.argmax(f)])


def _atom_photon() -> tuple[bool, str]:
    sc = build("atom_photon", {})
    tau = sc.params["tau"]
    cache = StageCache(sc)
    first = cache.resolve(sc.initial_state, 0)
    x1 = -math.expm1(-first.instant.t_red / tau)
    oracle = atom_photon_oracle(math.log(2))
    ok1 = abs(x1 - oracle) <= 1e-6 and abs(x1 - 1 / 3) <= 1e-6
    photon = next(b for b in first.branches if cache.info(b)[1].startswith("photon"))
    second = cache.resolve(photon, 1)
    x2 = -math.expm1(-second.instant.t_red / tau)
    ok2 = abs(x2 - 0.5) <= 1e-6
    return ok1 and ok2, f"stage1 |mu0|^2={x1:.10f} oracle={oracle:.7f}; stage2 |mu0|^2={x2:.10f}"


# 7 -- weak boson -------------------------------------------------------------------


def _weak_boson_instant(beta: float):
    sc = build("weak_boson", {"lambda_in": 1.0, "lambda_1": beta})
    inst = resolve_stage(sc, sc.initial_state, 0).instant
    return inst


def _weak_boson() -> tuple[bool, str]:
    parts = []
    inst = _weak_boson_instant(1.0)
    w1 = min(inst.weights_at)
    ok = abs(inst.t_red - 1.0) <= 1e-6 and abs(w1 - math.exp(-1)) <= 1e-9
    parts.append(f"beta=1: tau={inst.t_red:.10f} w1={w1:.12f}")
    inst = _weak_boson_instant(0.01)
    rel = abs(inst.t_red - math.log(2)) / math.log(2)
    ok &= rel < 0.05
    parts.append(f"beta=0.01: tau={inst.t_red:.6f} rel={rel:.3%}")
    inst = _weak_boson_instant(100.0)
    tau0, w_peak = weak_boson_peak(100.0)
    w1 = min(inst.weights_at)
    ok &= abs(inst.t_red - math.log(100) / 99) <= 1e-6 and abs(w1 - w_peak) <= 1e-9
    parts.append(f"beta=100: tau={inst.t_red:.10f} (tau0={tau0:.10f}) w1={w1:.12g} ({w_peak:.12g})")
    worst = 0.0
    for beta in (0.01, 0.5, 1.0, 1.0 + 1e-7, 2.0, 100.0):
        total = sum(weak_boson_curves(beta, np.linspace(0.0, 20.0, 1000)))
        worst = max(worst, float(np.max(np.abs(total - 1.0))))
    ok &= worst <= 1e-12
    parts.append(f"conservation err={worst:.2g}")
    return ok, "; ".join(parts)


# 8 -- principle-level properties ------------------------------------------------


def random_state(rng, modes) -> PureState:
    dim = math.prod(m.dimension for m in modes)
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return PureState.from_dense(modes, v / np.linalg.norm(v))


def random_system(rng, prefix: str, max_dim: int):
    while True:
        dg, dr = int(rng.integers(2, 9)), int(rng.integers(1, 9))
        if dg * dr <= max_dim:
            return (gauge_mode(f"{prefix}G", dg - 1), matter_mode(f"{prefix}R", dr))


def _additivity() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        m1, m2 = random_system(rng, "a", 16), random_system(rng, "b", 16)
        s1, s2 = random_state(rng, m1), random_state(rng, m2)
        cut1, cut2 = Bipartition.of(m1, ["aG"]), Bipartition.of(m2, ["bG"])
        joint = schmidt_decompose(tensor(s1, s2), cut1.union(cut2))
        parts = reduction_entropy(schmidt_decompose(s1, cut1).weights) + reduction_entropy(schmidt_decompose(s2, cut2).weights)
        worst = max(worst, abs(reduction_entropy(joint.weights) - parts))
    return worst <= 1e-10, f"max |sigma - sigma1 - sigma2| = {worst:.2g} over 100 pairs"


def opposite_slope_example():
    """Two independent emitters with lifetimes 1 and 3 sharing one clock."""
    parts = []
    for tag, tau in (("1", 1.0), ("2", 3.0)):
        sc = build("emission", {"tau": tau})
        prop = sc.evolution(sc.initial_state, 0).relabel({"M": "M" + tag, "Atom": "Atom" + tag})
        parts.append(prop)
    joint = tensor_propagations(*parts)
    cut = Bipartition.of(joint.system, ["M1", "M2"])
    return parts, joint, cut


def _ordering() -> tuple[bool, str]:
    (p1, p2), joint, cut = opposite_slope_example()
    t1 = find_reduction_instant(SchmidtPath(p1, Bipartition.of(p1.system, ["M1"]))).t_red
    t2 = find_reduction_instant(SchmidtPath(p2, Bipartition.of(p2.system, ["M2"]))).t_red
    t = find_reduction_instant(SchmidtPath(joint, cut)).t_red
    return t1 < t < t2, f"t1={t1:.6f} t={t:.6f} t2={t2:.6f}"


def _schmidt_residuals() -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(200):
        modes = random_system(rng, "x", 64)
        s = random_state(rng, modes)
        d = schmidt_decompose(s, Bipartition.of(modes, ["xG"]))
        rec = d.reconstruct().to_dense() - s.to_dense()
        G = np.array([t.gauge.to_dense() for t in d.terms])
        R = np.array([t.rest.to_dense() for t in d.terms])
        eye = np.eye(d.rank)
        worst = max(worst, np.abs(rec).max(), np.abs(G.conj() @ G.T - eye).max(), np.abs(R.conj() @ R.T - eye).max())
    return worst < 1e-9, f"max residual {worst:.2g} over 200 states"


def _post_jump_rank() -> tuple[bool, str]:
    count, bad = 0, 0
    for name in REGISTRY:
        sc = build(name, {})
        cache = StageCache(sc)
        enumerate_outcomes(sc, cache)
        for res in cache.results():
            for b in res.branches:
                count += 1
                bad += schmidt_decompose(b, sc.cut).rank != 1
    return bad == 0 and count > 0, f"{count} post-jump states, {bad} with rank > 1"


# 9 -- Monte Carlo vs enumeration -------------------------------------------------------


def _oracle_equivalence() -> tuple[bool, str]:
    t0 = time.perf_counter()
    worst, parts = 0.0, []
    for name in REGISTRY:
        sc = build(name, {})
        cache = StageCache(sc)
        exact = enumerate_outcomes(sc, cache)
        mc, _ = run_ensemble(sc, MC_TRAJ, MC_SEED, cache=cache)
        tv = exact.tv_distance(mc)
        worst = max(worst, tv)
        parts.append(f"{name}={tv:.4f}")
    elapsed = time.perf_counter() - t0
    return worst < 0.01 and elapsed < 120.0, "TV " + " ".join(parts) + f"; {elapsed:.1f}s"


# 10 -- mixed states --------------------------------------------------------------------


def two_by_two_modes():
    return (gauge_mode("G"), matter_mode("R", 2))


def random_ensemble(rng) -> Ensemble:
    modes = two_by_two_modes()
    p = float(rng.uniform(0.05, 0.95))
    return Ensemble(((p, random_state(rng, modes)), (1 - p, random_state(rng, modes))))


def grid_oracle(e: Ensemble, coarse: float = 0.01, fine: float = 1e-3, keep: int = 8, polish: float = 1e-4, phi_stretch: float = 3.0) -> float:
    """Best representation entropy over a (theta, phi) grid.

    A coarse scan is refined at ``fine`` resolution around its best cells,
    then once more at ``polish`` around the best fine point.  The entropy can
    be sharply peaked in theta, so a 1e-3 grid alone may sit ~1e-4 below the
    true maximum.
    """
    v = np.array([math.sqrt(p) * s.to_dense() for p, s in e.members])

    def sigma(theta, phi):
        c, s = np.cos(theta), np.sin(theta)
        e_phi = np.exp(1j * phi)
        u1 = c[:, None] * v[0] + (e_phi * s)[:, None] * v[1]
        u2 = -(np.conj(e_phi) * s)[:, None] * v[0] + c[:, None] * v[1]
        rho = np.zeros((theta.size, 4, 4), complex)
        for u in (u1, u2):
            U, S, Vh = np.linalg.svd(u.reshape(-1, 2, 2))
            for j in range(2):
                b = (U[:, :, j][:, :, None] * Vh[:, j, :][:, None, :]).reshape(-1, 4)
                rho += (S[:, j] ** 2)[:, None, None] * b[:, :, None] * b[:, None, :].conj()
        ev = np.clip(np.linalg.eigvalsh(rho), 1e-300, None)
        return -(ev * np.log(ev)).sum(axis=1)

    # the peak is much narrower in theta than in phi
    th, ph = np.meshgrid(np.arange(0.0, math.pi / 2 + 1e-12, coarse), np.arange(0.0, 2 * math.pi, phi_stretch * coarse), indexing="ij")
    vals = sigma(th.ravel(), ph.ravel())
    best = float(vals.max())
    def zoom(t0, p0, half, step, stretch=1.0):
        ft, fp = np.meshgrid(
            np.arange(t0 - half, t0 + half + step / 2, step),
            np.arange(p0 - stretch * half, p0 + stretch * half + step / 2, step),
            indexing="ij",
        )
        ft, fp = ft.ravel(), fp.ravel()
        z = sigma(ft, fp)
        k = int(np.argmax(z))
        return float(z[k]), ft[k], fp[k]

    top = (0.0, 0.0, 0.0)
    for k in np.argsort(vals)[-keep:]:
        cand = zoom(th.ravel()[k], ph.ravel()[k], coarse, fine, phi_stretch)
        top = max(top, cand)
    best = max(best, top[0], zoom(top[1], top[2], fine, polish)[0])
    return best


def _mixed_sum() -> tuple[bool, str]:
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        modes = random_system(rng, "m", 32)
        cut = Bipartition.of(modes, ["mG"])
        k = int(rng.integers(1, 5))
        p = rng.dirichlet(np.ones(k))
        p = p / p.sum()
        e = Ensemble(tuple((float(pi), random_state(rng, modes)) for pi in p))
        worst = max(worst, abs(sum(w for w, _ in reduce_ensemble(e, cut)) - 1.0))
    return worst <= 1e-10, f"max |sum - 1| = {worst:.2g}"


def _representation() -> tuple[bool, str]:
    rng = np.random.default_rng(3)
    cut = Bipartition.of(two_by_two_modes(), ["G"])
    worst = 0.0
    for _ in range(20):
        e = random_ensemble(rng)
        _, got = maximize_representation_entropy(e, cut)
        worst = max(worst, abs(got - grid_oracle(e)))
    return worst <= 1e-4, f"max |sigma_opt - sigma_grid| = {worst:.2g} over 20 ensembles"


ROWS: tuple[Row, ...] = (
    Row(1, "tourmaline: W_pass and cascade depth", _tourmaline),
    Row(2, "absorption: W0 = p_abs", _absorption),
    Row(3, "emission: first instant tau ln 2", _emission_instant),
    Row(3, "emission: n-stage survival 2^-n", _emission_survival),
    Row(3, "emission: Monte Carlo survival curve", _emission_monte_carlo),
    Row(4, "detection: weights 1/(N+1) and W0", _detection),
    Row(5, "superposition: terminal W_s", _superposition_outcomes),
    Row(5, "superposition: first-instant |mu0|^2", _superposition_first_instant),
    Row(6, "atom-photon: first and second instants", _atom_photon),
    Row(7, "weak boson: instants, peak weight, conservation", _weak_boson),
    Row(8, "entropy additivity of product states", _additivity),
    Row(8, "ordering t1 < t < t2 for opposite slopes", _ordering),
    Row(8, "Schmidt reconstruction and orthonormality", _schmidt_residuals),
    Row(8, "post-jump states have Schmidt rank 1", _post_jump_rank),
    Row(9, "Monte Carlo vs enumeration", _oracle_equivalence),
    Row(10, "ensemble branch probabilities sum to 1", _mixed_sum),
    Row(10, "representation maximisation vs grid oracle", _representation),
)


def run_rows(name_filter: str | None = None) -> list[dict]:
    out = []
    for row in ROWS:
        if name_filter and name_filter.lower() not in row.name.lower():
            continue
        try:
            passed, detail = row.run()
        except Exception as exc:  # a crashing row is a failing row
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        out.append({"criterion": row.criterion, "name": row.name, "passed": bool(passed), "detail": detail})
    return out
