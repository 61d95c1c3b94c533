"""Schmidt decomposition of a pure state across a gauge-mode / rest cut.

The amplitude matrix (gauge index x rest index) is split into its connected
blocks before the SVD.  Blocks that share no rows or columns have independent
Schmidt vectors, so degeneracies between blocks are resolved exactly in the
occupation basis instead of by whatever rotation LAPACK happens to return.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .state import ModeKind, ModeSpec, PureState, StateError, tensor

RANK_THRESHOLD = 1e-10
TIE_TOL = 1e-10


class InvalidBipartition(StateError):
    pass


class NotNormalized(StateError):
    pass


@dataclass(frozen=True)
class Bipartition:
    gauge_modes: frozenset[str]
    rest_modes: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "gauge_modes", frozenset(self.gauge_modes))
        object.__setattr__(self, "rest_modes", frozenset(self.rest_modes))

    @classmethod
    def of(cls, modes: Sequence[ModeSpec], gauge: Iterable[str]) -> "Bipartition":
        gauge = frozenset(gauge)
        return cls(gauge, frozenset(m.label for m in modes) - gauge)

    def union(self, other: "Bipartition") -> "Bipartition":
        return Bipartition(self.gauge_modes | other.gauge_modes, self.rest_modes | other.rest_modes)

    def validate(self, modes: Sequence[ModeSpec]) -> None:
        labels = {m.label for m in modes}
        if not self.gauge_modes:
            raise InvalidBipartition("gauge side of the cut is empty")
        if self.gauge_modes & self.rest_modes:
            raise InvalidBipartition("gauge and rest sides overlap")
        if self.gauge_modes | self.rest_modes != labels:
            raise InvalidBipartition(
                f"cut {sorted(self.gauge_modes)}|{sorted(self.rest_modes)} does not partition {sorted(labels)}"
            )
        for m in modes:
            if m.label in self.gauge_modes and m.kind is not ModeKind.GAUGE:
                raise InvalidBipartition(f"mode {m.label!r} is not a gauge boson mode")


class _Layout:
    """Index bookkeeping for reshaping system vectors into gauge x rest matrices."""

    def __init__(self, modes: Sequence[ModeSpec], cut: Bipartition):
        cut.validate(modes)
        self.modes = tuple(modes)
        self.g_axes = [i for i, m in enumerate(modes) if m.label in cut.gauge_modes]
        self.r_axes = [i for i, m in enumerate(modes) if m.label in cut.rest_modes]
        self.gauge_modes = tuple(modes[i] for i in self.g_axes)
        self.rest_modes = tuple(modes[i] for i in self.r_axes)
        self.dims = tuple(m.dimension for m in modes)
        self.dG = math.prod(m.dimension for m in self.gauge_modes)
        self.dR = math.prod(m.dimension for m in self.rest_modes)

    def matrices(self, dense: np.ndarray) -> np.ndarray:
        """(..., D) -> (..., dG, dR)."""
        lead = dense.shape[:-1]
        arr = dense.reshape(lead + self.dims)
        k = len(lead)
        perm = list(range(k)) + [k + a for a in self.g_axes] + [k + a for a in self.r_axes]
        return arr.transpose(perm).reshape(lead + (self.dG, self.dR))

    def position(self, label: Sequence[int]) -> tuple[int, int]:
        g = tuple(label[a] for a in self.g_axes)
        r = tuple(label[a] for a in self.r_axes)
        gi = int(np.ravel_multi_index(g, [m.dimension for m in self.gauge_modes])) if g else 0
        ri = int(np.ravel_multi_index(r, [m.dimension for m in self.rest_modes])) if r else 0
        return gi, ri


def _blocks(rows: np.ndarray, cols: np.ndarray, dG: int, dR: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Connected components of the bipartite support graph, each as (rows, cols)."""
    if rows.size == 0:
        return []
    n = dG + dR
    graph = coo_matrix((np.ones(rows.size), (rows, dG + cols)), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    used_r = np.zeros(dG, bool)
    used_c = np.zeros(dR, bool)
    used_r[rows] = True
    used_c[cols] = True
    out = []
    for c in np.unique(comp[np.concatenate([rows, dG + cols])]):
        br = np.flatnonzero((comp[:dG] == c) & used_r)
        bc = np.flatnonzero((comp[dG:] == c) & used_c)
        out.append((br, bc))
    return out


def _dominant_index(vec: np.ndarray) -> int:
    mod = np.abs(vec)
    return int(np.flatnonzero(mod >= mod.max() - 1e-12)[0])


@dataclass(frozen=True)
class SchmidtTerm:
    coefficient: float
    gauge: PureState
    rest: PureState


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    terms: tuple[SchmidtTerm, ...]
    system: tuple[ModeSpec, ...]
    cut: Bipartition

    @property
    def coefficients(self) -> list[float]:
        return [t.coefficient for t in self.terms]

    @property
    def weights(self) -> list[float]:
        return [t.coefficient ** 2 for t in self.terms]

    @property
    def rank(self) -> int:
        return len(self.terms)

    def branch(self, j: int) -> PureState:
        """Normalised product |Gj> x |Rj> in system mode order."""
        t = self.terms[j]
        return tensor(t.gauge, t.rest).reorder([m.label for m in self.system])

    def reconstruct(self) -> PureState:
        acc: dict = {}
        for j, t in enumerate(self.terms):
            for k, v in self.branch(j).amplitudes.items():
                acc[k] = acc.get(k, 0j) + t.coefficient * v
        return PureState(self.system, acc)


def schmidt_decompose(s: PureState, cut: Bipartition) -> SchmidtDecomposition:
    layout = _Layout(s.modes, cut)
    if abs(s.norm - 1.0) > 1e-9:
        raise NotNormalized(f"state norm {s.norm!r} is not 1")
    mat = layout.matrices(s.to_dense())
    rows, cols = np.nonzero(mat)
    found = []
    for br, bc in _blocks(rows, cols, layout.dG, layout.dR):
        u, sv, vh = np.linalg.svd(mat[np.ix_(br, bc)], full_matrices=False)
        for k, c in enumerate(sv):
            if c <= RANK_THRESHOLD:
                continue
            g = np.zeros(layout.dG, complex)
            r = np.zeros(layout.dR, complex)
            g[br] = u[:, k]
            r[bc] = vh[k, :]
            found.append((float(c), g, r))

    found.sort(key=lambda x: -x[0])
    ordered = []
    i = 0
    while i < len(found):
        j = i + 1
        while j < len(found) and found[j - 1][0] - found[j][0] <= TIE_TOL:
            j += 1
        ordered.extend(sorted(found[i:j], key=lambda x: _dominant_index(x[1])))
        i = j

    terms = []
    for c, g, r in ordered:
        d = _dominant_index(g)
        phase = g[d] / abs(g[d])
        g = g * phase.conjugate()
        r = r * phase
        terms.append(SchmidtTerm(c, PureState.from_dense(layout.gauge_modes, g), PureState.from_dense(layout.rest_modes, r)))
    return SchmidtDecomposition(tuple(terms), s.modes, cut)


def schmidt_weights(d: SchmidtDecomposition) -> list[float]:
    return d.weights


class SchmidtPath:
    """Schmidt spectrum along a time-dependent state, evaluated on time grids.

    ``propagation`` must expose ``system``, ``support`` (basis labels that can
    ever carry amplitude), ``dense(ts)`` and be callable at a single time.
    The block structure comes from ``support``, so each spectrum column is a
    fixed outcome identity (block, rank-within-block) across all times.
    """

    def __init__(self, propagation, cut: Bipartition):
        self.propagation = propagation
        self.cut = cut
        self.layout = _Layout(propagation.system, cut)
        pos = np.array([self.layout.position(lab) for lab in propagation.support], dtype=np.intp).reshape(-1, 2)
        self.blocks = _blocks(pos[:, 0], pos[:, 1], self.layout.dG, self.layout.dR)
        self.n_outcomes = sum(min(len(r), len(c)) for r, c in self.blocks)
        self.horizon = getattr(propagation, "horizon", None)
        self._slots = self._term_slots()

    def __call__(self, t: float) -> SchmidtDecomposition:
        return schmidt_decompose(self.propagation(t), self.cut)

    def _term_slots(self):
        """Per term: (block, local row, local col), or None without term access."""
        terms = getattr(self.propagation, "terms", None)
        if terms is None:
            return None
        where = {}
        for b, (br, bc) in enumerate(self.blocks):
            rpos = {int(r): i for i, r in enumerate(br)}
            cpos = {int(c): i for i, c in enumerate(bc)}
            for r in br:
                where[("r", int(r))] = (b, rpos[int(r)])
            for c in bc:
                where[("c", int(c))] = (b, cpos[int(c)])
        slots = []
        for term in terms:
            gi, ri = self.layout.position(term.label)
            b, i = where[("r", gi)]
            _, j = where[("c", ri)]
            slots.append((b, i, j))
        return slots

    def spectrum(self, ts) -> np.ndarray:
        """Weights, shape (len(ts), n_outcomes); columns sorted within each block."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if not self.blocks:
            return np.zeros((ts.size, 0))
        slots = self._slots
        if slots is None:
            mats = self.layout.matrices(self.propagation.dense(ts))
            subs = [mats[:, br[:, None], bc[None, :]] for br, bc in self.blocks]
        else:
            subs = [np.zeros((ts.size, len(br), len(bc)), complex) for br, bc in self.blocks]
            for term, (b, i, j) in zip(self.propagation.terms, slots):
                val = term.amplitude if term.factor is None else term.amplitude * np.asarray(term.factor(ts))
                subs[b][:, i, j] += val
        cols = [np.linalg.svd(sub, compute_uv=False) ** 2 for sub in subs]
        return np.concatenate(cols, axis=1)
