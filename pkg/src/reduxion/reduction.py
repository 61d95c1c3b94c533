"""Maximum-entropy reduction: entropy of the would-be mixture, the reduction
instant along a trajectory, and the jump itself (sampled or enumerated)."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .schmidt import Bipartition, SchmidtDecomposition, _Layout, schmidt_decompose
from .state import Ensemble, PureState

WEIGHT_FLOOR = 1e-20  # squared Schmidt rank threshold
SLOPE_NOISE = 1e-13


class BadDistribution(ValueError):
    pass


class UnsupportedEnsembleSize(ValueError):
    pass


class ReductionError(RuntimeError):
    pass


class NoEntanglement(ReductionError):
    pass


class NonConvergent(ReductionError):
    pass


class InstantKind(enum.Enum):
    HALF_CROSSING = "HalfCrossing"
    STATIONARY = "StationaryWeights"
    PLATEAU = "Plateau"
    NONE = "None"


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the reduction-instant search.

    ``t_tol`` is relative to the search horizon.  ``fd_fraction`` sets the
    half-width of the slope difference used during refinement, as a fraction
    of the bracketing grid step.
    """

    n_grid: int = 1000
    t_tol: float = 1e-9
    plateau_eps: float = 1e-6
    max_iter: int = 200
    fd_fraction: float = 1e-2
    sigma_floor: float = 1e-12
    half_tol: float = 1e-6
    max_extensions: int = 40


@dataclass(frozen=True)
class OptConfig:
    n_theta: int = 32
    n_phi: int = 64
    n_starts: int = 4
    xatol: float = 1e-9
    fatol: float = 1e-13
    max_iter: int = 2000


@dataclass(frozen=True)
class EntropySample:
    t: float
    weights: tuple[float, ...]
    sigma: float


@dataclass(frozen=True)
class ReductionInstant:
    t_red: float | None
    kind: InstantKind
    weights_at: tuple[float, ...]
    sigma: float


@dataclass(frozen=True)
class ReductionEvent:
    t_red: float
    outcome_index: int
    probability: float
    post_state: PureState
    kind: InstantKind = InstantKind.STATIONARY
    stage: int = 0
    label: str = ""
    t_abs: float | None = None


def reduction_entropy(weights: Sequence[float]) -> float:
    """Shannon entropy in nats, with 0 ln 0 = 0."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0 or np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-8:
        raise BadDistribution(f"not a probability vector: {w.tolist()}")
    w = w[w > 0]
    return float(0.0 - (w * np.log(w)).sum())


def _entropy_rows(W: np.ndarray) -> np.ndarray:
    W = np.clip(W, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(W > 0, W * np.log(np.where(W > 0, W, 1.0)), 0.0)
    return 0.0 - terms.sum(axis=1)  # no negative zero


class _Sampler:
    """Uniform access to weights along a trajectory, batched when possible."""

    def __init__(self, traj):
        spectrum = getattr(traj, "spectrum", None)
        if spectrum is not None:
            self._weights = spectrum
        else:
            self._weights = lambda ts: self._pad([traj(float(t)).weights for t in np.atleast_1d(ts)])

    @staticmethod
    def _pad(rows):
        k = max(len(r) for r in rows)
        return np.array([list(r) + [0.0] * (k - len(r)) for r in rows])

    def weights(self, ts) -> np.ndarray:
        return self._weights(np.atleast_1d(np.asarray(ts, dtype=float)))

    def sigma(self, ts) -> np.ndarray:
        return _entropy_rows(self.weights(ts))


def entropy_scan(traj, ts) -> list[EntropySample]:
    sampler = _Sampler(traj)
    W = sampler.weights(ts)
    S = _entropy_rows(W)
    out = []
    for t, row, s in zip(np.atleast_1d(ts), W, S):
        w = sorted((x for x in row if x > WEIGHT_FLOOR), reverse=True)
        out.append(EntropySample(float(t), tuple(w), float(s)))
    return out


def _bisect(f: Callable[[float], float], lo: float, hi: float, tol: float, max_iter: int) -> float:
    """Sign-change bisection, closed by one secant step inside the final bracket."""
    f_lo, f_hi = f(lo), f(hi)
    for _ in range(max_iter):
        if hi - lo <= tol:
            if f_lo != f_hi and (f_lo > 0) != (f_hi > 0):
                return lo - f_lo * (hi - lo) / (f_hi - f_lo)
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (f_lo > 0):
            lo, f_lo = mid, fm
        else:
            hi, f_hi = mid, fm
    raise NonConvergent(f"bisection did not reach tolerance {tol} in {max_iter} steps")


def _first_half_crossing(sampler, ts, W, present, solver, t_tol):
    col = present[0]
    f = W[:, col] - 0.5
    s = np.sign(f)
    nz = np.flatnonzero(s)
    for a, b in zip(nz, nz[1:]):
        if s[a] != s[b]:
            g = lambda t: float(sampler.weights([t])[0, col] - 0.5)
            return _bisect(g, float(ts[a]), float(ts[b]), t_tol, solver.max_iter)
    return None


def _first_peak(S):
    """Grid bracket (i, j) around the first local maximum of sigma, or 'start'."""
    D = S[2:] - S[:-2]
    sgn = np.where(D > SLOPE_NOISE, 1, np.where(D < -SLOPE_NOISE, -1, 0))
    rising = None
    for k, sg in enumerate(sgn):
        p = k + 1
        if sg > 0:
            rising = p
        elif sg < 0:
            if rising is None:
                return "start"
            return max(rising - 1, 0), min(p + 1, len(S) - 1)
    return None


def _weights_at(sampler, t) -> tuple[float, ...]:
    row = sampler.weights([t])[0]
    return tuple(sorted((float(x) for x in row if x > WEIGHT_FLOOR), reverse=True))


def _instant(sampler, t, kind, solver) -> ReductionInstant:
    w = _weights_at(sampler, t)
    sigma = reduction_entropy(np.array(w) / sum(w)) if w else 0.0
    if sigma < solver.sigma_floor:
        return ReductionInstant(None, InstantKind.NONE, w, sigma)
    return ReductionInstant(float(t), kind, w, sigma)


_EXTEND = object()


def _scan(sampler, t_start, horizon, solver, use_crossing=True):
    n = solver.n_grid
    ts = t_start + horizon * np.linspace(0.0, 1.0, n + 1)
    W = sampler.weights(ts)
    S = _entropy_rows(W)
    t_tol = solver.t_tol * horizon
    step = horizon / n

    if S.max() < solver.sigma_floor:
        return ReductionInstant(None, InstantKind.NONE, _weights_at(sampler, t_start), float(S[0]))

    present = np.flatnonzero(W.max(axis=0) > WEIGHT_FLOOR)
    crossing = None
    if present.size == 2 and use_crossing:
        crossing = _first_half_crossing(sampler, ts, W, present, solver, t_tol)

    peak = _first_peak(S)
    if peak == "start" and crossing is None:
        return _instant(sampler, t_start, InstantKind.STATIONARY, solver)
    if isinstance(peak, tuple) or crossing is not None:
        if crossing is not None and (not isinstance(peak, tuple) or crossing <= ts[peak[1]]):
            return _instant(sampler, crossing, InstantKind.HALF_CROSSING, solver)
        h = solver.fd_fraction * step

        def slope(t):
            s = sampler.sigma([t - h, t + h])
            return float(s[1] - s[0])

        lo, hi = float(ts[peak[0]]), float(ts[peak[1]])
        lo = max(lo, t_start + h)
        t_peak = _bisect(slope, lo, hi, t_tol, solver.max_iter)
        inst = _instant(sampler, t_peak, InstantKind.STATIONARY, solver)
        w = inst.weights_at
        if present.size == 2 and len(w) == 2 and abs(w[0] - 0.5) < solver.half_tol:
            inst = ReductionInstant(inst.t_red, InstantKind.HALF_CROSSING, w, inst.sigma)
        return inst

    if np.all(np.diff(S) >= -SLOPE_NOISE):
        return _plateau(sampler, ts, S, horizon, solver, t_tol)
    return _EXTEND


def _plateau(sampler, ts, S, horizon, solver, t_tol):
    t_start = float(ts[0])
    far_t = t_start + horizon * 2.0 ** np.arange(1, 41)
    far_S = sampler.sigma(far_t)
    running = np.maximum.accumulate(np.concatenate([[S[-1]], far_S]))
    if np.any(far_S < running[:-1] - max(10 * SLOPE_NOISE, 1e-3 * solver.plateau_eps)):
        return _EXTEND
    sup = max(float(S.max()), float(far_S.max()))
    target = sup - solver.plateau_eps
    pts_t = np.concatenate([ts, far_t])
    pts_S = np.concatenate([S, far_S])
    hit = int(np.flatnonzero(pts_S >= target)[0])
    if hit == 0:
        return _instant(sampler, t_start, InstantKind.PLATEAU, solver)
    g = lambda t: float(sampler.sigma([t])[0] - target)
    t_red = _bisect(g, float(pts_t[hit - 1]), float(pts_t[hit]), t_tol, solver.max_iter)
    return _instant(sampler, t_red, InstantKind.PLATEAU, solver)


def find_reduction_instant(
    traj,
    t_start: float = 0.0,
    horizon: float | None = None,
    solver: SolverConfig | None = None,
    allow_none: bool = True,
    use_crossing: bool = True,
) -> ReductionInstant:
    """Earliest time in the window at which the reduction entropy peaks.

    ``traj`` maps a time to a :class:`SchmidtDecomposition`; objects that also
    provide ``spectrum(ts)`` (see :class:`~reduxion.schmidt.SchmidtPath`) are
    evaluated on whole grids at once and get tracked outcome identities,
    which the half-crossing detector needs.  ``use_crossing=False`` skips
    that detector and locates every maximum from the entropy slope alone.
    """
    solver = solver or SolverConfig()
    horizon = horizon if horizon is not None else getattr(traj, "horizon", None)
    if not horizon or horizon <= 0:
        raise ValueError("a positive search horizon is required")
    sampler = _Sampler(traj)
    for _ in range(solver.max_extensions + 1):
        res = _scan(sampler, float(t_start), float(horizon), solver, use_crossing)
        if res is not _EXTEND:
            if res.kind is InstantKind.NONE and not allow_none:
                raise NoEntanglement("reduction entropy vanishes on the whole window")
            return res
        horizon *= 2.0
    raise NonConvergent("no entropy maximum found after extending the search window")


def choose_index(weights: Sequence[float], rng) -> int:
    cum = np.cumsum(weights)
    u = rng.random() * cum[-1]
    return min(int(np.searchsorted(cum, u, side="right")), len(cum) - 1)


def enumerate_jump(d: SchmidtDecomposition) -> list[tuple[float, PureState]]:
    return [(w, d.branch(j)) for j, w in enumerate(d.weights)]


def sample_jump(d: SchmidtDecomposition, t_red: float, rng) -> ReductionEvent:
    j = choose_index(d.weights, rng)
    return ReductionEvent(t_red, j, d.weights[j], d.branch(j))


def reduce_ensemble(e: Ensemble, cut: Bipartition) -> list[tuple[float, PureState]]:
    out = []
    for p, s in e.members:
        out.extend((p * w, b) for w, b in enumerate_jump(schmidt_decompose(s, cut)))
    return out


def representation_entropy(e: Ensemble, cut: Bipartition) -> float:
    """Von Neumann entropy of sum_k p_k sum_j w_kj |kj><kj|."""
    dim = e.members[0][1].dim
    rho = np.zeros((dim, dim), dtype=complex)
    for prob, branch in reduce_ensemble(e, cut):
        v = branch.to_dense()
        rho += prob * np.outer(v, v.conj())
    ev = np.linalg.eigvalsh(rho)
    ev = ev[ev > 1e-15]
    return float(-(ev * np.log(ev)).sum())


def mixing_unitary(theta: float, phi: float, chi: float = 0.0) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [[np.exp(1j * chi) * c, np.exp(1j * phi) * s], [-np.exp(-1j * phi) * s, np.exp(-1j * chi) * c]]
    )


def mix_representation(e: Ensemble, theta: float, phi: float, chi: float = 0.0) -> Ensemble:
    """Another decomposition of the same density matrix, sqrt(p') psi' = U sqrt(p) psi."""
    if len(e.members) != 2:
        raise UnsupportedEnsembleSize("representation mixing is defined for two members")
    U = mixing_unitary(theta, phi, chi)
    vecs = np.array([math.sqrt(p) * s.to_dense() for p, s in e.members])
    new = U @ vecs
    probs = np.einsum("ij,ij->i", new.conj(), new).real
    keep = probs > 1e-14
    total = probs[keep].sum()
    members = tuple(
        (float(p / total), PureState.from_dense(e.modes, v / math.sqrt(p)))
        for p, v in zip(probs[keep], new[keep])
    )
    return Ensemble(members)


def _member_matrices(e: Ensemble, cut: Bipartition) -> np.ndarray:
    layout = _Layout(e.modes, cut)
    return np.array([math.sqrt(p) * layout.matrices(s.to_dense()) for p, s in e.members])


def _mixed_sigma(base: np.ndarray, theta, phi) -> np.ndarray:
    """Representation entropy for a batch of mixing angles.

    The nonzero spectrum of sum_b w_b |b><b| equals that of the small matrix
    sqrt(w) <b|b'> sqrt(w), whose Gram entries factor over the cut.
    """
    theta, phi = np.atleast_1d(theta), np.atleast_1d(phi)
    c = np.cos(theta)[:, None, None]
    sn = np.sin(theta)[:, None, None]
    ph = np.exp(1j * phi)[:, None, None]
    mixed = (c * base[0] + ph * sn * base[1], -np.conj(ph) * sn * base[0] + c * base[1])
    U, W, R = [], [], []
    for m in mixed:
        u, sv, vh = np.linalg.svd(m, full_matrices=False)
        U.append(u)
        W.append(sv ** 2)
        R.append(vh)
    U, W, R = np.concatenate(U, axis=2), np.concatenate(W, axis=1), np.concatenate(R, axis=1)
    gram = np.einsum("nai,naj->nij", U.conj(), U) * np.einsum("nia,nja->nij", R.conj(), R)
    sw = np.sqrt(W)
    ev = np.linalg.eigvalsh(sw[:, :, None] * gram * sw[:, None, :])
    ev = np.where(ev > 1e-15, ev, 1.0)
    return -(ev * np.log(ev)).sum(axis=1)


def maximize_representation_entropy(
    e: Ensemble, cut: Bipartition, opt: OptConfig | None = None
) -> tuple[Ensemble, float]:
    """Two-member representation of the mixture with the largest reduction entropy.

    Only the angle and one relative phase of the mixing unitary change the
    representation, so the search runs over (theta, phi) with chi = 0: a
    batched coarse scan followed by Nelder-Mead from the best grid points.
    """
    opt = opt or OptConfig()
    if len(e.members) == 1:
        return e, representation_entropy(e, cut)
    if len(e.members) != 2:
        raise UnsupportedEnsembleSize(f"expected two members, got {len(e.members)}")
    base = _member_matrices(e, cut)
    th, ph = np.meshgrid(
        np.linspace(0.0, 0.5 * math.pi, opt.n_theta + 1),
        np.linspace(0.0, 2 * math.pi, opt.n_phi, endpoint=False),
        indexing="ij",
    )
    th, ph = th.ravel(), ph.ravel()
    vals = _mixed_sigma(base, th, ph)
    best_v, best_x = -np.inf, np.zeros(2)
    for k in np.argsort(vals)[::-1][: opt.n_starts]:
        res = minimize(
            lambda x: -_mixed_sigma(base, x[0], x[1])[0],
            np.array([th[k], ph[k]]),
            method="Nelder-Mead",
            options={"xatol": opt.xatol, "fatol": opt.fatol, "maxiter": opt.max_iter},
        )
        for v, x in ((vals[k], (th[k], ph[k])), (-res.fun, res.x)):
            if v > best_v:
                best_v, best_x = v, np.asarray(x, dtype=float)
    best = mix_representation(e, best_x[0], best_x[1])
    sigma, sigma_in = representation_entropy(best, cut), representation_entropy(e, cut)
    if sigma_in >= sigma:
        return e, sigma_in
    return best, sigma
