"""Built-in cascade scenarios and their parameter schemas.

Every builder returns an immutable :class:`~reduxion.cascade.Scenario`.  The
registry maps a variant name to its builder and a declared schema so config
files can be validated before anything is computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .cascade import Scenario
from .evolution import AmplitudeSchedule, Propagation, propagate, rabi_pair
from .reduction import SolverConfig
from .schmidt import Bipartition
from .state import PureState, gauge_mode, matter_mode, superpose

NORM_TOL = 1e-10
PRESENT = 0.5  # weight above which a basis label counts as occupied in a branch


class ScenarioParamError(ValueError):
    pass


class CutoffTooSmall(ScenarioParamError):
    pass


def _check_pair(a: float, b: float, what: str) -> None:
    if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > NORM_TOL:
        raise ScenarioParamError(f"{what}: |a|^2 + |b|^2 must equal 1, got {abs(a) ** 2 + abs(b) ** 2!r}")


def _occupied(s: PureState, axis: int) -> bool:
    return sum(abs(v) ** 2 for k, v in s.amplitudes.items() if k[axis] > 0) > PRESENT


# -- integral photon states ---------------------------------------------------


def build_tourmaline(alpha: float | None = None, c_perp_sq: float | None = None, omega: float = 1.0, max_stages: int = 64) -> Scenario:
    """Photon polarised at angle alpha hitting an absorbing crystal."""
    if alpha is not None:
        if not 0.0 < alpha < 0.5 * math.pi:
            raise ScenarioParamError("alpha must lie in (0, pi/2)")
        c_perp, c_par = math.sin(alpha), math.cos(alpha)
    else:
        c = 0.3 if c_perp_sq is None else float(c_perp_sq)
        if not 0.0 < c < 1.0:
            raise ScenarioParamError("c_perp_sq must lie in (0, 1)")
        c_perp, c_par = math.sqrt(c), math.sqrt(1.0 - c)
    modes = (gauge_mode("M_perp"), gauge_mode("M_par"), matter_mode("T", 2))
    init = superpose(modes, [(c_perp, (1, 0, 0)), (c_par, (0, 1, 0))])
    sched = AmplitudeSchedule.rabi(omega)
    stay, move = sched.component(0), sched.component(1)
    image = {
        (0, 1, 0): [((0, 1, 0), stay), ((0, 0, 1), move)],
        (0, 0, 1): [((0, 0, 1), stay), ((0, 1, 0), move)],
    }

    def evolution(s: PureState, stage: int) -> Propagation:
        return propagate(s, image.get, math.pi / omega)

    return Scenario(
        name="tourmaline",
        system=modes,
        initial_state=init,
        cut=Bipartition.of(modes, ["M_perp", "M_par"]),
        evolution=evolution,
        is_terminal=lambda s: s.probability((0, 1, 0)) < 1e-12,
        max_stages=max_stages,
        label=lambda s: "absorb" if _occupied(s, 2) else "pass",
        params={"c_perp_sq": c_perp ** 2, "omega": omega},
    )


def absorption_cap(p_abs: float, stage: int) -> float:
    """Peak transfer of stage ``stage`` (0-based) so the transmitted path telescopes to 1 - p_abs."""
    return 1.0 - (1.0 - p_abs) * 2.0 ** stage


def build_absorption(p_abs: float = 0.8, tau: float = 1.0, max_stages: int = 64) -> Scenario:
    if not 0.0 < p_abs < 1.0:
        raise ScenarioParamError("p_abs must lie in (0, 1)")
    modes = (gauge_mode("M"), matter_mode("A", 2))

    def evolution(s: PureState, stage: int) -> Propagation:
        cap = absorption_cap(p_abs, stage)
        if cap <= 0.0:
            return propagate(s, lambda lab: None, 2.0 * tau)
        sched = AmplitudeSchedule.detuned(tau, min(cap, 1.0))
        image = {(1, 0): [((1, 0), sched.component(0)), ((0, 1), sched.component(1))]}
        return propagate(s, image.get, 2.0 * tau)

    return Scenario(
        name="absorption",
        system=modes,
        initial_state=PureState.basis(modes, (1, 0)),
        cut=Bipartition.of(modes, ["M"]),
        evolution=evolution,
        is_terminal=lambda s: _occupied(s, 1),
        max_stages=max_stages,
        label=lambda s: "absorbed" if _occupied(s, 1) else "transmitted",
        params={"p_abs": p_abs, "tau": tau},
    )


def build_emission(tau: float = 1.0, max_stages: int = 10) -> Scenario:
    modes = (gauge_mode("M"), matter_mode("Atom", 2))
    sched = AmplitudeSchedule.exponential(tau)
    image = {(0, 1): [((0, 1), sched.component(0)), ((1, 0), sched.component(1))]}
    return Scenario(
        name="emission",
        system=modes,
        initial_state=PureState.basis(modes, (0, 1)),
        cut=Bipartition.of(modes, ["M"]),
        evolution=lambda s, stage: propagate(s, image.get, 10.0 * tau),
        is_terminal=lambda s: _occupied(s, 0),
        max_stages=max_stages,
        label=lambda s: "photon" if _occupied(s, 0) else "excited",
        truncate=True,
        params={"tau": tau},
    )


def _per_channel(value, n: int, what: str) -> list[float]:
    if isinstance(value, (int, float)):
        return [float(value)] * n
    value = [float(v) for v in value]
    if len(value) != n:
        raise ScenarioParamError(f"{what}: expected {n} entries, got {len(value)}")
    return value


def build_detection(N: int = 3, taus: float | Sequence[float] = 1.0, amplitudes: Sequence[float] | None = None, max_stages: int = 3) -> Scenario:
    """Particle spread over N detector channels, each able to emit one photon.

    The detector+particle register has levels 0..N-1 for "particle at s,
    not yet emitted" and N..2N-1 for "emitted from s".
    """
    if N < 1:
        raise ScenarioParamError("N must be at least 1")
    taus = _per_channel(taus, N, "taus")
    amps = [1.0 / math.sqrt(N)] * N if amplitudes is None else _per_channel(amplitudes, N, "amplitudes")
    if abs(sum(a * a for a in amps) - 1.0) > NORM_TOL:
        raise ScenarioParamError("detection amplitudes must be normalised")
    modes = tuple(gauge_mode(f"M_{s + 1}") for s in range(N)) + (matter_mode("DP", 2 * N),)
    init = superpose(modes, [(a, (0,) * N + (s,)) for s, a in enumerate(amps)])
    image = {}
    for s, tau in enumerate(taus):
        sched = AmplitudeSchedule.exponential(tau)
        src = (0,) * N + (s,)
        dst = tuple(1 if k == s else 0 for k in range(N)) + (N + s,)
        image[src] = [(src, sched.component(0)), (dst, sched.component(1))]
    horizon = 10.0 * max(taus)

    def fired(s: PureState) -> int | None:
        for ch in range(N):
            if _occupied(s, ch):
                return ch
        return None

    def label(s: PureState) -> str:
        ch = fired(s)
        return "undetected" if ch is None else f"detector_{ch + 1}"

    return Scenario(
        name="detection",
        system=modes,
        initial_state=init,
        cut=Bipartition.of(modes, [m.label for m in modes[:N]]),
        evolution=lambda s, stage: propagate(s, image.get, horizon),
        is_terminal=lambda s: fired(s) is not None,
        max_stages=max_stages,
        label=label,
        truncate=True,
        params={"N": N, "taus": taus, "amplitudes": amps},
    )


def build_superposition(c_s: float = math.sqrt(0.3), c_sbar: float = math.sqrt(0.7), tau: float = 1.0, max_stages: int = 8) -> Scenario:
    """Particle in c_s|s> + c_sbar|s_bar>; only the s component couples and emits.

    Modes: photon M, probe P (0 free, 1 bound), S (0 = s, 1 = s_bar).
    """
    _check_pair(c_s, c_sbar, "superposition")
    modes = (gauge_mode("M"), matter_mode("P", 2), matter_mode("S", 2))
    init = superpose(modes, [(c_s, (0, 0, 0)), (c_sbar, (0, 0, 1))])
    sched = AmplitudeSchedule.exponential(tau)
    image = {(0, 0, 0): [((0, 0, 0), sched.component(0)), ((1, 1, 0), sched.component(1))]}
    return Scenario(
        name="superposition",
        system=modes,
        initial_state=init,
        cut=Bipartition.of(modes, ["M"]),
        evolution=lambda s, stage: propagate(s, image.get, 10.0 * tau),
        is_terminal=lambda s: _occupied(s, 0) or s.probability((0, 0, 1)) >= 1.0 - 1e-6,
        max_stages=max_stages,
        label=lambda s: "s" if _occupied(s, 0) else "s_bar",
        truncate=True,
        # the monotone branch needs a tight plateau band to resolve W_s to 1e-9
        solver=SolverConfig(plateau_eps=1e-10),
        params={"c_s": c_s, "c_sbar": c_sbar, "tau": tau},
    )


# -- nonintegral photon states and entanglement ------------------------------------


def build_nonintegral(alpha0: float = math.sqrt(0.5), alpha1: float = math.sqrt(0.5), omega: float = 1.0, fock_cutoff: int = 4, n_stages: int = 3) -> Scenario:
    """Two-level atom coupled to one photon mode by the resonant exchange
    |Atom1, Mn> <-> |Atom0, M(n+1)> at frequency omega * sqrt(n + 1)."""
    _check_pair(alpha0, alpha1, "nonintegral")
    if fock_cutoff < n_stages:
        raise CutoffTooSmall(f"fock_cutoff {fock_cutoff} < n_stages {n_stages}")
    modes = (matter_mode("Atom", 2), gauge_mode("M", fock_cutoff))
    init = superpose(modes, [(alpha0, (0, 0)), (alpha1, (1, 0))])

    def pair(freq):
        return (lambda t: rabi_pair(freq, t)[0]), (lambda t: rabi_pair(freq, t)[1])

    image = {}
    for n in range(fock_cutoff):
        stay, move = pair(omega * math.sqrt(n + 1))
        image[(1, n)] = [((1, n), stay), ((0, n + 1), move)]
        image[(0, n + 1)] = [((0, n + 1), stay), ((1, n), move)]

    return Scenario(
        name="nonintegral",
        system=modes,
        initial_state=init,
        cut=Bipartition.of(modes, ["M"]),
        evolution=lambda s, stage: propagate(s, image.get, math.pi / omega),
        is_terminal=lambda s: False,
        max_stages=n_stages,
        truncate=True,
        params={"alpha0": alpha0, "alpha1": alpha1, "omega": omega, "fock_cutoff": fock_cutoff},
    )


def build_entangled_pair(c1: float = math.sqrt(0.5), c2: float = math.sqrt(0.5), tau_a: float = 1.0, tau_b: float = 1.0, max_stages: int = 3) -> Scenario:
    """Photon pair c_l |Ma l>|Mb lbar>, each photon absorbed independently.

    Reservoir levels: 0 idle, l for a-photon l absorbed, 2+l for b-photon l
    absorbed, 4+l for both absorbed from pair term l.
    """
    _check_pair(c1, c2, "entangled_pair")
    modes = (gauge_mode("Ma1"), gauge_mode("Ma2"), gauge_mode("Mb1"), gauge_mode("Mb2"), matter_mode("R", 7))
    init = superpose(modes, [(c1, (1, 0, 0, 1, 0)), (c2, (0, 1, 1, 0, 0))])
    sa0, sa1 = AmplitudeSchedule.exponential(tau_a).component(0), AmplitudeSchedule.exponential(tau_a).component(1)
    sb0, sb1 = AmplitudeSchedule.exponential(tau_b).component(0), AmplitudeSchedule.exponential(tau_b).component(1)
    both = lambda f, g: (lambda t: f(t) * g(t))

    def a_photon(l):
        return (1, 0) if l == 1 else (0, 1)

    image = {}
    for l in (1, 2):
        lbar = 3 - l
        pa, pb = a_photon(l), a_photon(lbar)
        full = pa + pb + (0,)
        b_gone = pa + (0, 0) + (2 + lbar,)
        a_gone = (0, 0) + pb + (l,)
        done = (0, 0, 0, 0, 4 + l)
        image[full] = [(full, both(sa0, sb0)), (b_gone, both(sa0, sb1)), (a_gone, both(sa1, sb0)), (done, both(sa1, sb1))]
        image[b_gone] = [(b_gone, sa0), (done, sa1)]
        image[a_gone] = [(a_gone, sb0), (done, sb1)]
    finite = [t for t in (tau_a, tau_b) if math.isfinite(t)]
    horizon = 10.0 * max(finite) if finite else 10.0

    def label(s: PureState) -> str:
        a = _occupied(s, 0) or _occupied(s, 1)
        b = _occupied(s, 2) or _occupied(s, 3)
        return {(True, True): "pair", (True, False): "b_absorbed", (False, True): "a_absorbed"}.get((a, b), "both_absorbed")

    return Scenario(
        name="entangled_pair",
        system=modes,
        initial_state=init,
        cut=Bipartition.of(modes, ["Ma1", "Ma2", "Mb1", "Mb2"]),
        evolution=lambda s, stage: propagate(s, image.get, horizon),
        is_terminal=lambda s: label(s) == "both_absorbed",
        max_stages=max_stages,
        label=label,
        truncate=True,
        params={"c1": c1, "c2": c2, "tau_a": tau_a, "tau_b": tau_b},
    )


def build_atom_photon(c1: float = math.sqrt(0.5), c2: float = math.sqrt(0.5), tau: float = 1.0, max_stages: int = 3) -> Scenario:
    """Atom level l entangled with a photon in mode l; the photon can be absorbed
    by a reservoir (level l records which mode was absorbed)."""
    _check_pair(c1, c2, "atom_photon")
    modes = (gauge_mode("M1"), gauge_mode("M2"), matter_mode("Atom", 2), matter_mode("R", 3))
    init = superpose(modes, [(c1, (1, 0, 0, 0)), (c2, (0, 1, 1, 0))])
    sched = AmplitudeSchedule.exponential(tau)
    keep, lose = sched.component(0), sched.component(1)

    def rule(label):
        m1, m2, a, r = label
        if r != 0 or m1 + m2 != 1:
            return None
        l = 1 if m1 else 2
        return [(label, keep), ((0, 0, a, l), lose)]

    def label(s: PureState) -> str:
        if _occupied(s, 0):
            return "photon_1"
        if _occupied(s, 1):
            return "photon_2"
        return "absorbed"

    return Scenario(
        name="atom_photon",
        system=modes,
        initial_state=init,
        cut=Bipartition.of(modes, ["M1", "M2"]),
        evolution=lambda s, stage: propagate(s, rule, 10.0 * tau),
        is_terminal=lambda s: label(s) == "absorbed",
        max_stages=max_stages,
        label=label,
        truncate=True,
        params={"c1": c1, "c2": c2, "tau": tau},
    )


def build_weak_boson(lambda_in: float = 1.0, lambda_1: float = 1.0, max_stages: int = 3) -> Scenario:
    """in -> (boson W + out1) -> out with first-order kinetics.

    Particle register: 0 = in, 1 = out1 (with the boson), 2 + k = final
    products created during stage k.  A fresh product level per stage keeps
    the evolution norm-preserving when a stage starts from a mix of in and
    earlier products.
    """
    if not (lambda_in > 0 and lambda_1 > 0):
        raise ScenarioParamError("decay rates must be positive")
    modes = (gauge_mode("W"), matter_mode("P", 2 + max_stages))
    kin = AmplitudeSchedule.weak_boson(lambda_in, lambda_1)
    dec = AmplitudeSchedule.exponential(1.0 / lambda_1)

    def evolution(s: PureState, stage: int) -> Propagation:
        out = (0, 2 + stage)
        image = {
            (0, 0): [((0, 0), kin.component(0)), ((1, 1), kin.component(1)), (out, kin.component(2))],
            (1, 1): [((1, 1), dec.component(0)), (out, dec.component(1))],
        }
        horizon = 10.0 / lambda_1 if _occupied(s, 0) else 10.0 / max(lambda_in, lambda_1)
        return propagate(s, image.get, horizon)

    return Scenario(
        name="weak_boson",
        system=modes,
        initial_state=PureState.basis(modes, (0, 0)),
        cut=Bipartition.of(modes, ["W"]),
        evolution=evolution,
        is_terminal=lambda s: s.probability((0, 0)) < 1e-12 and s.probability((1, 1)) < 1e-12,
        max_stages=max_stages,
        label=lambda s: "boson_present" if _occupied(s, 0) else "no_boson",
        truncate=True,
        params={"lambda_in": lambda_in, "lambda_1": lambda_1},
    )


# -- registry -----------------------------------------------------------------


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # "float", "int", "floats" (scalar or list) or "float?"
    default: object
    lo: float | None = None
    hi: float | None = None
    doc: str = ""
    open_lo: bool = False
    open_hi: bool = False

    def bounds_text(self) -> str:
        lo = "-inf" if self.lo is None else f"{self.lo:g}"
        hi = "inf" if self.hi is None else f"{self.hi:g}"
        return f"{'(' if self.open_lo or self.lo is None else '['}{lo}, {hi}{')' if self.open_hi or self.hi is None else ']'}"

    def check(self, value):
        if value is None and self.kind.endswith("?"):
            return None
        kind = self.kind.rstrip("?")
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ScenarioParamError(f"{self.name}: expected an integer, got {value!r}")
            values = [value]
        elif kind == "floats" and isinstance(value, (list, tuple)):
            values = list(value)
        else:
            values = [value]
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ScenarioParamError(f"{self.name}: expected a number, got {v!r}")
            if math.isnan(v):
                raise ScenarioParamError(f"{self.name}: NaN is not allowed")
            if self.lo is not None and (v < self.lo or (self.open_lo and v == self.lo)):
                raise ScenarioParamError(f"{self.name}={v!r} outside {self.bounds_text()}")
            if self.hi is not None and (v > self.hi or (self.open_hi and v == self.hi)):
                raise ScenarioParamError(f"{self.name}={v!r} outside {self.bounds_text()}")
        return list(value) if isinstance(value, (list, tuple)) else value


@dataclass(frozen=True)
class ScenarioEntry:
    name: str
    builder: Callable[..., Scenario]
    params: tuple[Param, ...]
    doc: str


_UNIT = dict(lo=0.0, hi=1.0)
_POS = dict(lo=0.0, open_lo=True)

REGISTRY: dict[str, ScenarioEntry] = {
    e.name: e
    for e in (
        ScenarioEntry("tourmaline", build_tourmaline, (
            Param("alpha", "float?", None, 0.0, 0.5 * math.pi, "polarisation angle; overrides c_perp_sq", True, True),
            Param("c_perp_sq", "float?", 0.3, 0.0, 1.0, "transmitted-polarisation weight", True, True),
            Param("omega", "float", 1.0, doc="absorption Rabi frequency", **_POS),
            Param("max_stages", "int", 64, 1, None, "stage limit"),
        ), "polarised photon through an absorbing crystal"),
        ScenarioEntry("absorption", build_absorption, (
            Param("p_abs", "float", 0.8, 0.0, 1.0, "absorption probability", True, True),
            Param("tau", "float", 1.0, doc="time of peak transfer", **_POS),
            Param("max_stages", "int", 64, 1, None, "stage limit"),
        ), "partial absorption of a photon by a medium"),
        ScenarioEntry("emission", build_emission, (
            Param("tau", "float", 1.0, doc="excited-state lifetime", **_POS),
            Param("max_stages", "int", 10, 1, None, "stages before truncation"),
        ), "spontaneous emission from an excited atom"),
        ScenarioEntry("detection", build_detection, (
            Param("N", "int", 3, 1, 16, "number of detector channels"),
            Param("taus", "floats", 1.0, doc="channel lifetimes (scalar or N values)", **_POS),
            Param("amplitudes", "floats?", None, -1.0, 1.0, "channel amplitudes (default uniform)"),
            Param("max_stages", "int", 3, 1, None, "stages before truncation"),
        ), "particle detection through secondary photon emission"),
        ScenarioEntry("superposition", build_superposition, (
            Param("c_s", "float", math.sqrt(0.3), -1.0, 1.0, "amplitude of the coupled component"),
            Param("c_sbar", "float", math.sqrt(0.7), -1.0, 1.0, "amplitude of the spectator component"),
            Param("tau", "float", 1.0, doc="emission lifetime", **_POS),
            Param("max_stages", "int", 8, 1, None, "stages before truncation"),
        ), "reduction of a two-state superposition by a probe"),
        ScenarioEntry("nonintegral", build_nonintegral, (
            Param("alpha0", "float", math.sqrt(0.5), -1.0, 1.0, "ground amplitude"),
            Param("alpha1", "float", math.sqrt(0.5), -1.0, 1.0, "excited amplitude"),
            Param("omega", "float", 1.0, doc="single-photon Rabi frequency", **_POS),
            Param("fock_cutoff", "int", 4, 1, 64, "photon number cutoff"),
            Param("n_stages", "int", 3, 1, 64, "number of stages"),
        ), "atom-photon exchange producing indefinite photon number"),
        ScenarioEntry("entangled_pair", build_entangled_pair, (
            Param("c1", "float", math.sqrt(0.5), -1.0, 1.0, "pair amplitude 1"),
            Param("c2", "float", math.sqrt(0.5), -1.0, 1.0, "pair amplitude 2"),
            Param("tau_a", "float", 1.0, doc="absorption lifetime at a (inf: none)", **_POS),
            Param("tau_b", "float", 1.0, doc="absorption lifetime at b (inf: none)", **_POS),
            Param("max_stages", "int", 3, 1, None, "stages before truncation"),
        ), "entangled photon pair absorbed at two locations"),
        ScenarioEntry("atom_photon", build_atom_photon, (
            Param("c1", "float", math.sqrt(0.5), -1.0, 1.0, "amplitude of branch 1"),
            Param("c2", "float", math.sqrt(0.5), -1.0, 1.0, "amplitude of branch 2"),
            Param("tau", "float", 1.0, doc="absorption lifetime", **_POS),
            Param("max_stages", "int", 3, 1, None, "stages before truncation"),
        ), "atom-photon entanglement reduced by photon absorption"),
        ScenarioEntry("weak_boson", build_weak_boson, (
            Param("lambda_in", "float", 1.0, doc="input decay rate", **_POS),
            Param("lambda_1", "float", 1.0, doc="intermediate boson decay rate", **_POS),
            Param("max_stages", "int", 3, 1, 32, "stages before truncation"),
        ), "process through an intermediate weak boson"),
    )
}


def validate_params(name: str, raw: Mapping[str, object] | None) -> dict:
    """Schema check plus defaults; raises ScenarioParamError on any problem."""
    if name not in REGISTRY:
        raise ScenarioParamError(f"unknown scenario {name!r}; choose from {list(REGISTRY)}")
    raw = dict(raw or {})
    entry = REGISTRY[name]
    known = {p.name for p in entry.params}
    extra = set(raw) - known
    if extra:
        raise ScenarioParamError(f"{name}: unknown parameters {sorted(extra)}")
    out = {}
    for p in entry.params:
        value = raw.get(p.name, p.default)
        if name == "tourmaline" and p.name == "c_perp_sq" and raw.get("alpha") is not None and "c_perp_sq" not in raw:
            value = None
        out[p.name] = p.check(value)
    return out


def build(name: str, params: Mapping[str, object] | None = None) -> Scenario:
    checked = validate_params(name, params)
    return REGISTRY[name].builder(**checked)


def describe() -> list[dict]:
    """Deterministic listing of variants and parameter schemas."""
    return [
        {
            "name": e.name,
            "doc": e.doc,
            "params": [
                {"name": p.name, "type": p.kind, "default": p.default, "bounds": p.bounds_text(), "doc": p.doc}
                for p in e.params
            ],
        }
        for e in REGISTRY.values()
    ]
