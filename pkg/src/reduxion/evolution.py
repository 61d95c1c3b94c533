"""Amplitude schedules and linear propagation of sparse states.

A stage of unitary evolution is written as a basis map: each basis ket is sent
to a short list of ``(target ket, amplitude schedule component)`` pairs, and
kets without an image are stationary.  Applying the map to a state gives a
:class:`Propagation`, i.e. a finite sum ``sum_k a_k f_k(t) |label_k>`` that
can be evaluated at one time or on a whole grid at once.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np

from .state import Label, ModeSpec, PureState, StateError, _check_system

BETA_ONE_TOL = 1e-6


class ScheduleError(ValueError):
    pass


class NonPositiveTau(ScheduleError):
    pass


class NonPositiveBeta(ScheduleError):
    pass


def exp_survival(tau: float, t):
    """(mu0, mu1) with |mu0|^2 = exp(-t/tau); tau may be inf (no decay)."""
    if not tau > 0:
        raise NonPositiveTau(f"tau must be positive, got {tau}")
    t = np.asarray(t, dtype=float)
    x = -t / tau
    mu0 = np.sqrt(np.exp(x))
    mu1 = np.sqrt(-np.expm1(x))
    return mu0, mu1


def rabi_pair(omega: float, t):
    """Resonant two-level transfer: (cos wt, -i sin wt)."""
    t = np.asarray(t, dtype=float)
    return np.cos(omega * t) + 0j, -1j * np.sin(omega * t)


def detuned_rabi(tau: float, cap: float, t):
    """Off-resonant transfer peaking at population ``cap`` when t = tau.

    Returns (stay, move) with |move|^2 = cap sin^2(pi t / 2 tau).
    """
    if not tau > 0:
        raise NonPositiveTau(f"tau must be positive, got {tau}")
    if not 0.0 <= cap <= 1.0:
        raise ScheduleError(f"transfer cap must lie in [0, 1], got {cap}")
    t = np.asarray(t, dtype=float)
    half = 0.5 * math.pi * t / tau
    stay = np.cos(half) + 1j * math.sqrt(1.0 - cap) * np.sin(half)
    move = -1j * math.sqrt(cap) * np.sin(half)
    return stay, move


def weak_boson_curves(beta: float, tau):
    """Populations (w_in, w_1, w_out) of the in / intermediate / out sectors.

    ``tau`` is time in units of the inverse input rate and ``beta`` the ratio
    of the intermediate decay rate to the input rate.
    """
    if not beta > 0:
        raise NonPositiveBeta(f"beta must be positive, got {beta}")
    tau = np.asarray(tau, dtype=float)
    w_in = np.exp(-tau)
    if abs(beta - 1.0) < BETA_ONE_TOL:
        w1 = tau * np.exp(-tau)
    else:
        w1 = w_in * -np.expm1(-(beta - 1.0) * tau) / (beta - 1.0)
    # (beta e^-tau - e^-beta tau)/(beta - 1) regrouped to avoid cancellation
    w_out = -np.expm1(-tau) - w1
    return w_in, w1, w_out


def weak_boson_peak(beta: float) -> tuple[float, float]:
    """Stationary point of the intermediate population: (tau_0, w_1(tau_0))."""
    if not beta > 0:
        raise NonPositiveBeta(f"beta must be positive, got {beta}")
    if abs(beta - 1.0) < BETA_ONE_TOL:
        return 1.0, math.exp(-1.0)
    tau0 = math.log1p(beta - 1.0) / (beta - 1.0)
    return tau0, math.exp(math.log(beta) / (1.0 - beta)) / beta


@dataclass(frozen=True)
class KineticsCurves:
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise NonPositiveBeta(f"beta must be positive, got {self.beta}")

    def __call__(self, tau):
        return weak_boson_curves(self.beta, tau)

    def peak(self) -> tuple[float, float]:
        return weak_boson_peak(self.beta)


class Family(enum.Enum):
    EXPONENTIAL_SURVIVAL = "ExponentialSurvival"
    RABI_PAIR = "RabiPair"
    DETUNED_RABI = "DetunedRabi"
    WEAK_BOSON_KINETICS = "WeakBosonKinetics"
    PIECEWISE_TABLE = "PiecewiseTable"


@dataclass(frozen=True)
class AmplitudeSchedule:
    """Named family of normalised amplitude tuples mu(t), vectorised over t."""

    family: Family
    params: Mapping[str, object] = field(default_factory=dict)

    @classmethod
    def exponential(cls, tau: float) -> "AmplitudeSchedule":
        if not tau > 0:
            raise NonPositiveTau(f"tau must be positive, got {tau}")
        return cls(Family.EXPONENTIAL_SURVIVAL, {"tau": float(tau)})

    @classmethod
    def rabi(cls, omega: float) -> "AmplitudeSchedule":
        if not omega > 0:
            raise ScheduleError(f"omega must be positive, got {omega}")
        return cls(Family.RABI_PAIR, {"omega": float(omega)})

    @classmethod
    def detuned(cls, tau: float, cap: float) -> "AmplitudeSchedule":
        detuned_rabi(tau, cap, 0.0)
        return cls(Family.DETUNED_RABI, {"tau": float(tau), "cap": float(cap)})

    @classmethod
    def weak_boson(cls, lambda_in: float, lambda_1: float) -> "AmplitudeSchedule":
        if not (lambda_in > 0 and lambda_1 > 0):
            raise NonPositiveBeta("decay rates must be positive")
        return cls(Family.WEAK_BOSON_KINETICS, {"lambda_in": float(lambda_in), "lambda_1": float(lambda_1)})

    @classmethod
    def table(cls, times: Sequence[float], populations: Sequence[Sequence[float]]) -> "AmplitudeSchedule":
        times = tuple(float(t) for t in times)
        pops = tuple(tuple(float(p) for p in row) for row in populations)
        if len(times) != len(pops) or len(times) < 2:
            raise ScheduleError("table needs matching times and population rows (at least two)")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ScheduleError("table times must increase strictly")
        for row in pops:
            if min(row) < 0 or abs(sum(row) - 1.0) > 1e-12:
                raise ScheduleError("each population row must be a probability vector")
        return cls(Family.PIECEWISE_TABLE, {"times": times, "populations": pops})

    @property
    def size(self) -> int:
        if self.family is Family.WEAK_BOSON_KINETICS:
            return 3
        if self.family is Family.PIECEWISE_TABLE:
            return len(self.params["populations"][0])
        return 2

    def __call__(self, t) -> tuple:
        p = self.params
        if self.family is Family.EXPONENTIAL_SURVIVAL:
            return exp_survival(p["tau"], t)
        if self.family is Family.RABI_PAIR:
            return rabi_pair(p["omega"], t)
        if self.family is Family.DETUNED_RABI:
            return detuned_rabi(p["tau"], p["cap"], t)
        if self.family is Family.WEAK_BOSON_KINETICS:
            tau = p["lambda_in"] * np.asarray(t, dtype=float)
            return tuple(np.sqrt(np.clip(w, 0.0, None)) for w in weak_boson_curves(p["lambda_1"] / p["lambda_in"], tau))
        t = np.asarray(t, dtype=float)
        pops = np.asarray(p["populations"])
        return tuple(np.sqrt(np.interp(t, p["times"], pops[:, i])) for i in range(pops.shape[1]))

    def component(self, i: int) -> Callable:
        if not 0 <= i < self.size:
            raise ScheduleError(f"schedule has no component {i}")
        return lambda t: self(t)[i]

    def populations(self, t) -> np.ndarray:
        return np.stack([np.abs(m) ** 2 for m in self(t)], axis=-1)


@dataclass(frozen=True, eq=False)
class Term:
    amplitude: complex
    factor: Callable | None
    label: Label


@dataclass(frozen=True, eq=False)
class Propagation:
    """Time-dependent state ``sum_k amplitude_k * factor_k(t) |label_k>``.

    ``horizon`` is the natural time scale of the stage, used as the default
    search window by the reduction-instant solver.
    """

    system: tuple[ModeSpec, ...]
    terms: tuple[Term, ...]
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "system", _check_system(self.system))
        if not self.horizon > 0:
            raise ScheduleError("propagation horizon must be positive")

    @cached_property
    def dims(self) -> tuple[int, ...]:
        return tuple(m.dimension for m in self.system)

    @cached_property
    def support(self) -> tuple[Label, ...]:
        return tuple(sorted({t.label for t in self.terms}))

    @cached_property
    def _flat(self) -> np.ndarray:
        if not self.terms:
            return np.zeros(0, np.intp)
        labels = np.array([t.label for t in self.terms], dtype=np.intp).reshape(len(self.terms), -1)
        return np.ravel_multi_index(tuple(labels.T), self.dims)

    def dense(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.zeros((ts.size, math.prod(self.dims)), dtype=complex)
        for term, idx in zip(self.terms, self._flat):
            col = term.amplitude if term.factor is None else term.amplitude * np.asarray(term.factor(ts))
            out[:, idx] += col
        return out

    def __call__(self, t: float) -> PureState:
        return PureState.from_dense(self.system, self.dense([t])[0])

    def norms(self, ts) -> np.ndarray:
        return np.linalg.norm(self.dense(ts), axis=1)

    def relabel(self, mapping: Mapping[str, str]) -> "Propagation":
        modes = tuple(replace(m, label=mapping.get(m.label, m.label)) for m in self.system)
        return Propagation(modes, self.terms, self.horizon)


Rule = Callable[[Label], "Sequence[tuple[Sequence[int], Callable]] | None"]


def propagate(state: PureState, rule: Rule, horizon: float) -> Propagation:
    """Apply a basis map to ``state``; ``rule(label)`` returns None for stationary kets."""
    terms = []
    for label, amp in state.amplitudes.items():
        image = rule(label)
        if image is None:
            terms.append(Term(amp, None, label))
            continue
        for target, factor in image:
            target = tuple(int(x) for x in target)
            if len(target) != len(label):
                raise StateError(f"rule maps {label} to malformed label {target}")
            terms.append(Term(amp, factor, target))
    return Propagation(state.modes, tuple(terms), horizon)


def _product(f, g):
    if f is None:
        return g
    if g is None:
        return f
    return lambda t: np.asarray(f(t)) * np.asarray(g(t))


def tensor_propagations(p: Propagation, q: Propagation) -> Propagation:
    """Independent evolution of two subsystems on the concatenated mode list."""
    terms = tuple(
        Term(a.amplitude * b.amplitude, _product(a.factor, b.factor), a.label + b.label)
        for a in p.terms
        for b in q.terms
    )
    return Propagation(p.system + q.system, terms, max(p.horizon, q.horizon))
