import math

import numpy as np
import pytest

from reduxion.cascade import StageCache, enumerate_outcomes, resolve_stage
from reduxion.evolution import tensor_propagations
from reduxion.reduction import InstantKind, entropy_scan, find_reduction_instant
from reduxion.scenarios import (
    REGISTRY,
    CutoffTooSmall,
    ScenarioParamError,
    build,
    build_absorption,
    build_atom_photon,
    build_detection,
    build_emission,
    build_entangled_pair,
    build_nonintegral,
    build_superposition,
    build_tourmaline,
    build_weak_boson,
    describe,
    validate_params,
)
from reduxion.schmidt import SchmidtPath


def first_stage(sc, state=None, stage=0):
    return resolve_stage(sc, state or sc.initial_state, stage)


def test_registry_order():
    assert list(REGISTRY) == [
        "tourmaline", "absorption", "emission", "detection", "superposition",
        "nonintegral", "entangled_pair", "atom_photon", "weak_boson",
    ]
    assert [e["name"] for e in describe()] == list(REGISTRY)


@pytest.mark.parametrize("c, depth", [(0.75, 1), (0.3, 2), (0.05, 5)])
def test_tourmaline(c, depth):
    d = enumerate_outcomes(build_tourmaline(c_perp_sq=c))
    assert d["pass"] == pytest.approx(c, abs=1e-9)
    assert d.max_depth() == depth


def test_tourmaline_angle_parameter():
    alpha = math.asin(math.sqrt(0.75))
    d = enumerate_outcomes(build_tourmaline(alpha=alpha))
    assert d["pass"] == pytest.approx(0.75, abs=1e-9)


@pytest.mark.parametrize("p_abs", [0.4, 0.5])
def test_absorption_single_reduction(p_abs):
    d = enumerate_outcomes(build_absorption(p_abs=p_abs))
    assert d.max_depth() == 1
    assert d["absorbed"] == pytest.approx(p_abs, abs=1e-9)


def test_absorption_boundary_weights():
    res = first_stage(build_absorption(p_abs=0.5))
    assert res.weights == pytest.approx([0.5, 0.5], abs=1e-9)


def test_absorption_multi_stage():
    d = enumerate_outcomes(build_absorption(p_abs=0.8))
    assert d["absorbed"] == pytest.approx(0.8, abs=1e-9)
    assert d.max_depth() > 1


def test_emission_first_instant():
    res = first_stage(build_emission(tau=1.7))
    assert res.instant.t_red == pytest.approx(1.7 * math.log(2), abs=1e-8)
    assert res.instant.kind is InstantKind.HALF_CROSSING


def test_emission_survival_curve():
    tau = 1.0
    d = enumerate_outcomes(build_emission(tau=tau, max_stages=6))
    (survivor,) = [p for p in d.paths if p.outcome == "excited"]
    assert survivor.probability == pytest.approx(2.0 ** -6, abs=1e-12)
    # stage boundary n * tau ln 2 lies on exp(-t / tau)
    for n in range(1, 7):
        assert math.exp(-n * tau * math.log(2)) == pytest.approx(2.0 ** -n)


def test_detection_single_channel_is_emission():
    res = first_stage(build_detection(N=1))
    assert res.weights == pytest.approx([0.5, 0.5], abs=1e-9)


def test_detection_two_stage_closed_form():
    d = enumerate_outcomes(build_detection(N=3, max_stages=2))
    assert d["undetected"] == pytest.approx(1 / 16, abs=1e-9)
    for s in (1, 2, 3):
        assert d[f"detector_{s}"] == pytest.approx((1 - 1 / 16) / 3, abs=1e-9)


def test_spectral_line_narrowing():
    w0 = []
    for N in range(1, 7):
        res = first_stage(build_detection(N=N))
        assert res.weights == pytest.approx([1 / (N + 1)] * (N + 1), abs=1e-8)
        w0.append(res.weights[-1])
    assert all(a > b for a, b in zip(w0, w0[1:]))


def test_detection_asymmetric_channels():
    sc = build_detection(N=2, taus=[1.0, 2.0], amplitudes=[math.sqrt(0.6), math.sqrt(0.4)])
    d = enumerate_outcomes(sc)
    assert d.total == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ScenarioParamError):
        build_detection(N=2, amplitudes=[0.5, 0.5])


def test_superposition_symmetric():
    sc = build_superposition(math.sqrt(0.5), math.sqrt(0.5))
    d = enumerate_outcomes(sc)
    assert d["s"] == pytest.approx(0.5, abs=1e-9)


def test_superposition_below_half_drains_fully():
    sc = build_superposition(math.sqrt(0.3), math.sqrt(0.7))
    res = first_stage(sc)
    assert math.exp(-res.instant.t_red) == pytest.approx(0.0, abs=1e-6)
    d = enumerate_outcomes(sc)
    assert d.max_depth() == 1
    assert d["s"] == pytest.approx(0.3, abs=1e-9)


def test_nonintegral_degenerate_has_no_instant():
    res = first_stage(build_nonintegral(alpha0=1.0, alpha1=0.0))
    assert res.instant.kind is InstantKind.NONE


def test_nonintegral_photon_support_grows_by_one():
    sc = build_nonintegral(n_stages=3, fock_cutoff=4)
    d = enumerate_outcomes(sc)
    cache = StageCache(sc)
    frontier = [(1.0, sc.initial_state)]
    for r in range(1, 4):
        nxt = []
        for W, s in frontier:
            res = cache.resolve(s, r - 1)
            if res.instant.kind is InstantKind.NONE:
                continue
            for w, b in zip(res.weights, res.branches):
                assert max(lab[1] for lab in b.amplitudes) <= r
                nxt.append((W * w, b))
        frontier = nxt
    assert d.total == pytest.approx(1.0, abs=1e-9)
    # path probabilities are products of stage weights
    for p in d.paths:
        assert p.probability > 0


def test_nonintegral_cutoff_check():
    with pytest.raises(CutoffTooSmall):
        build_nonintegral(fock_cutoff=2, n_stages=3)


def test_entangled_pair_without_absorption():
    sc = build_entangled_pair(tau_a=math.inf, tau_b=math.inf)
    res = first_stage(sc)
    assert res.instant.kind is InstantKind.NONE
    d = enumerate_outcomes(sc)
    assert d["pair"] == pytest.approx(1.0)


def test_entangled_pair_symmetry_and_completeness():
    sc = build_entangled_pair(tau_a=1.3, tau_b=1.3)
    path = SchmidtPath(sc.evolution(sc.initial_state, 0), sc.cut)
    ts = np.linspace(0, 10, 41)
    for t in ts:
        d = path(t)
        assert sum(d.weights) == pytest.approx(1.0, abs=1e-12)
        a = sorted(w for w, term in zip(d.weights, d.terms) if _side(term) == "a")
        b = sorted(w for w, term in zip(d.weights, d.terms) if _side(term) == "b")
        assert a == pytest.approx(b, abs=1e-12)


def _side(term):
    lab = term.gauge.dominant_label()  # (Ma1, Ma2, Mb1, Mb2)
    a, b = lab[0] + lab[1], lab[2] + lab[3]
    return "both" if a and b else "a" if a else "b" if b else "none"


def test_atom_photon_symmetric():
    sc = build_atom_photon()
    e0 = entropy_scan(SchmidtPath(sc.evolution(sc.initial_state, 0), sc.cut), [0.0])[0]
    assert e0.sigma == pytest.approx(math.log(2), abs=1e-12)
    res = first_stage(sc)
    # |mu0|^2 is the absorbed population here
    absorbed = -math.expm1(-res.instant.t_red)
    assert absorbed == pytest.approx(1 / 3, abs=1e-6)


def test_atom_photon_unentangled_limit():
    sc = build_atom_photon(c1=1.0, c2=0.0)
    res = first_stage(sc)
    assert -math.expm1(-res.instant.t_red) == pytest.approx(0.5, abs=1e-6)


def test_atom_photon_second_stage():
    sc = build_atom_photon()
    res = first_stage(sc)
    photon = [b for b in res.branches if sc.label(b) != "absorbed"][0]
    nxt = first_stage(sc, photon, 1)
    assert -math.expm1(-nxt.instant.t_red) == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("beta", [1.0, 0.01, 100.0])
def test_weak_boson_instants(beta):
    from reduxion.evolution import weak_boson_peak

    res = first_stage(build_weak_boson(1.0, beta))
    tau0, w_peak = weak_boson_peak(beta)
    if beta == 0.01:
        assert res.instant.t_red == pytest.approx(math.log(2), rel=0.01)
    else:
        assert res.instant.t_red == pytest.approx(tau0, abs=1e-8)
        assert min(res.weights) == pytest.approx(w_peak, abs=1e-9)


@pytest.mark.parametrize("name", list(REGISTRY))
def test_evolution_preserves_norm(name):
    sc = build(name)
    rng = np.random.default_rng(0)
    cache = StageCache(sc)
    frontier = [s for _, s in sc.initial_members()]
    for stage in range(min(sc.max_stages, 4)):
        nxt = []
        for s in frontier:
            if sc.is_terminal(s):
                continue
            prop = sc.evolution(s, stage)
            ts = rng.uniform(0, prop.horizon, 100)
            assert np.abs(prop.norms(ts) - 1).max() < 1e-9
            res = cache.resolve(s, stage)
            nxt.extend(res.branches)
        frontier = nxt


def test_cluster_additivity():
    a, b = build_emission(tau=1.0), build_emission(tau=2.5)
    pa = a.evolution(a.initial_state, 0)
    pb = b.evolution(b.initial_state, 0).relabel({"M": "M2", "Atom": "Atom2"})
    cut = a.cut.union(type(a.cut).of(pb.system, ["M2"]))
    ts = np.linspace(0, 10, 101)
    sa = [r.sigma for r in entropy_scan(SchmidtPath(pa, a.cut), ts)]
    sb = [r.sigma for r in entropy_scan(SchmidtPath(pb, type(a.cut).of(pb.system, ["M2"])), ts)]
    sab = [r.sigma for r in entropy_scan(SchmidtPath(tensor_propagations(pa, pb), cut), ts)]
    assert np.abs(np.array(sab) - np.array(sa) - np.array(sb)).max() < 1e-10


def test_param_validation():
    assert validate_params("emission", {})["tau"] == 1.0
    for name, params in [
        ("tourmaline", {"c_perp_sq": 1.0}),
        ("absorption", {"p_abs": 0.0}),
        ("emission", {"tau": -1}),
        ("detection", {"N": 0}),
        ("emission", {"bogus": 1}),
        ("nope", {}),
        ("superposition", {"c_s": 0.5, "c_sbar": 0.5}),
        ("weak_boson", {"lambda_1": "fast"}),
    ]:
        with pytest.raises(ScenarioParamError):
            build(name, params)
