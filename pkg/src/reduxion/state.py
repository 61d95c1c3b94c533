"""Sparse pure states over a tensor product of labelled, truncated modes.

Basis kets are tuples of occupation numbers, one per mode, in the order the
modes are listed.  Dense materialisations always use the lexicographic order
of those tuples (row-major over the mode dimensions).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

DROP_THRESHOLD = 1e-14
ZERO_NORM = 1e-15

Label = tuple[int, ...]


class StateError(ValueError):
    pass


class DuplicateModeLabel(StateError):
    pass


class SystemMismatch(StateError):
    pass


class ZeroState(StateError):
    pass


class ModeKind(enum.Enum):
    GAUGE = "GaugeBoson"
    MATTER = "Matter"


@dataclass(frozen=True)
class ModeSpec:
    label: str
    kind: ModeKind
    dimension: int

    def __post_init__(self):
        if int(self.dimension) < 1:
            raise StateError(f"mode {self.label!r}: dimension must be >= 1")


def gauge_mode(label: str, cutoff: int = 1) -> ModeSpec:
    """Boson mode holding 0..cutoff quanta."""
    return ModeSpec(label, ModeKind.GAUGE, cutoff + 1)


def matter_mode(label: str, levels: int) -> ModeSpec:
    return ModeSpec(label, ModeKind.MATTER, levels)


def _check_system(modes: Sequence[ModeSpec]) -> tuple[ModeSpec, ...]:
    modes = tuple(modes)
    labels = [m.label for m in modes]
    if len(set(labels)) != len(labels):
        raise DuplicateModeLabel(f"repeated mode labels in {labels}")
    return modes


@dataclass(frozen=True, eq=False)
class PureState:
    """Immutable sparse amplitude map over a labelled mode system."""

    modes: tuple[ModeSpec, ...]
    amplitudes: Mapping[Label, complex]

    def __post_init__(self):
        modes = _check_system(self.modes)
        dims = tuple(m.dimension for m in modes)
        clean: dict[Label, complex] = {}
        for label, amp in self.amplitudes.items():
            label = tuple(int(x) for x in label)
            if len(label) != len(dims):
                raise StateError(f"label {label} does not match {len(dims)} modes")
            if any(not 0 <= n < d for n, d in zip(label, dims)):
                raise StateError(f"label {label} out of range for dimensions {dims}")
            amp = complex(amp)
            if abs(amp) >= DROP_THRESHOLD:
                clean[label] = clean.get(label, 0j) + amp
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "amplitudes", MappingProxyType(dict(sorted(clean.items()))))

    # -- constructors -----------------------------------------------------

    @classmethod
    def basis(cls, modes: Sequence[ModeSpec], label: Sequence[int]) -> "PureState":
        return cls(tuple(modes), {tuple(label): 1.0})

    @classmethod
    def from_dense(cls, modes: Sequence[ModeSpec], vector) -> "PureState":
        modes = tuple(modes)
        dims = tuple(m.dimension for m in modes)
        vec = np.asarray(vector, dtype=complex).reshape(-1)
        if vec.size != math.prod(dims):
            raise StateError(f"dense vector of size {vec.size} for dimensions {dims}")
        nz = np.flatnonzero(np.abs(vec) >= DROP_THRESHOLD)
        if not dims:
            return cls(modes, {(): vec[0]} if nz.size else {})
        idx = np.unravel_index(nz, dims)
        labels = zip(*(i.tolist() for i in idx))
        return cls(modes, {lab: vec[k] for lab, k in zip(labels, nz)})

    # -- structure ----------------------------------------------------------

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(m.dimension for m in self.modes)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    @property
    def mode_labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.modes)

    def axis(self, mode_label: str) -> int:
        try:
            return self.mode_labels.index(mode_label)
        except ValueError:
            raise StateError(f"no mode {mode_label!r} in {self.mode_labels}") from None

    @cached_property
    def key(self) -> tuple:
        """Exact hashable fingerprint of modes and amplitudes."""
        return (self.modes, tuple(self.amplitudes.items()))

    @property
    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def to_dense(self) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=complex)
        if self.amplitudes:
            labels = np.array(list(self.amplitudes.keys()), dtype=np.intp).reshape(len(self.amplitudes), -1)
            flat = np.ravel_multi_index(tuple(labels.T), self.dims) if self.dims else np.zeros(1, np.intp)
            vec[flat] = list(self.amplitudes.values())
        return vec

    def probability(self, label: Sequence[int]) -> float:
        return abs(self.amplitudes.get(tuple(label), 0.0)) ** 2

    def marginal(self, mode_label: str) -> np.ndarray:
        """Occupation distribution of one mode (unnormalised if the state is)."""
        ax = self.axis(mode_label)
        out = np.zeros(self.modes[ax].dimension)
        for label, amp in self.amplitudes.items():
            out[label[ax]] += abs(amp) ** 2
        return out

    def dominant_label(self, tol: float = 1e-12) -> Label:
        """Largest-weight basis label; ties go to the lexicographically smallest."""
        if not self.amplitudes:
            raise ZeroState("empty state has no dominant label")
        top = max(abs(a) ** 2 for a in self.amplitudes.values())
        return min(lab for lab, a in self.amplitudes.items() if abs(a) ** 2 >= top - tol)

    def format_label(self, label: Sequence[int]) -> str:
        return ",".join(f"{m.label}={n}" for m, n in zip(self.modes, label))

    # -- transformations ----------------------------------------------------

    def scaled(self, factor: complex) -> "PureState":
        return PureState(self.modes, {k: factor * v for k, v in self.amplitudes.items()})

    def reorder(self, mode_labels: Sequence[str]) -> "PureState":
        """Same state with the mode axes permuted into ``mode_labels`` order."""
        perm = [self.axis(lab) for lab in mode_labels]
        if sorted(perm) != list(range(len(self.modes))):
            raise SystemMismatch(f"{list(mode_labels)} is not a permutation of {self.mode_labels}")
        modes = tuple(self.modes[i] for i in perm)
        return PureState(modes, {tuple(k[i] for i in perm): v for k, v in self.amplitudes.items()})

    def relabel(self, mapping: Mapping[str, str]) -> "PureState":
        modes = tuple(replace(m, label=mapping.get(m.label, m.label)) for m in self.modes)
        return PureState(modes, self.amplitudes)

    def __repr__(self) -> str:
        terms = " + ".join(f"({a:.6g})|{self.format_label(k)}>" for k, a in self.amplitudes.items())
        return f"PureState({terms or '0'})"


def superpose(modes: Sequence[ModeSpec], terms: Iterable[tuple[complex, Sequence[int]]]) -> PureState:
    acc: dict[Label, complex] = {}
    for amp, label in terms:
        acc[tuple(label)] = acc.get(tuple(label), 0j) + amp
    return PureState(tuple(modes), acc)


def norm(s: PureState) -> float:
    return s.norm


def normalize(s: PureState) -> PureState:
    n = s.norm
    if n < ZERO_NORM:
        raise ZeroState("cannot normalise a zero vector")
    return s.scaled(1.0 / n)


def tensor(a: PureState, b: PureState) -> PureState:
    """Product state on the concatenated mode list ``a.modes + b.modes``."""
    shared = set(a.mode_labels) & set(b.mode_labels)
    if shared:
        raise DuplicateModeLabel(f"modes {sorted(shared)} appear in both factors")
    amps = {
        ka + kb: va * vb
        for ka, va in a.amplitudes.items()
        for kb, vb in b.amplitudes.items()
    }
    return PureState(a.modes + b.modes, amps)


def inner(a: PureState, b: PureState) -> complex:
    """<a|b>, antilinear in the first argument."""
    if a.modes != b.modes:
        raise SystemMismatch(f"{a.mode_labels} vs {b.mode_labels}")
    small, large = (a, b) if len(a.amplitudes) <= len(b.amplitudes) else (b, a)
    total = 0j
    for k in small.amplitudes:
        if k in large.amplitudes:
            total += a.amplitudes[k].conjugate() * b.amplitudes[k]
    return total


@dataclass(frozen=True)
class Ensemble:
    """Mixed state written as a weighted list of normalised pure states."""

    members: tuple[tuple[float, PureState], ...]

    def __post_init__(self):
        members = tuple((float(p), s) for p, s in self.members)
        if not members:
            raise StateError("ensemble needs at least one member")
        if any(not 0.0 < p <= 1.0 for p, _ in members):
            raise StateError("ensemble weights must lie in (0, 1]")
        if abs(sum(p for p, _ in members) - 1.0) > 1e-12:
            raise StateError("ensemble weights must sum to 1")
        modes = members[0][1].modes
        for _, s in members:
            if s.modes != modes:
                raise SystemMismatch("ensemble members live on different systems")
            if abs(s.norm - 1.0) > 1e-10:
                raise StateError("ensemble members must be normalised")
        object.__setattr__(self, "members", members)

    @property
    def modes(self) -> tuple[ModeSpec, ...]:
        return self.members[0][1].modes

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(p for p, _ in self.members)

    def density_matrix(self) -> np.ndarray:
        rho = 0
        for p, s in self.members:
            v = s.to_dense()
            rho = rho + p * np.outer(v, v.conj())
        return rho
