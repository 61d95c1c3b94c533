import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_state
from reduxion.reduction import (
    BadDistribution,
    InstantKind,
    NoEntanglement,
    NonConvergent,
    SolverConfig,
    UnsupportedEnsembleSize,
    entropy_scan,
    enumerate_jump,
    find_reduction_instant,
    maximize_representation_entropy,
    mix_representation,
    reduce_ensemble,
    reduction_entropy,
    representation_entropy,
    sample_jump,
)
from reduxion.scenarios import build_absorption, build_emission, build_tourmaline, build_weak_boson
from reduxion.schmidt import Bipartition, SchmidtPath, schmidt_decompose
from reduxion.state import Ensemble, PureState, gauge_mode, matter_mode, superpose


def first_path(sc, state=None, stage=0):
    prop = sc.evolution(state or sc.initial_state, stage)
    return SchmidtPath(prop, sc.cut), prop.horizon


class Spectrum:
    """Bare weight trajectory given by a vectorised function of time."""

    def __init__(self, fn, horizon):
        self.fn, self.horizon = fn, horizon

    def spectrum(self, ts):
        return np.atleast_2d(self.fn(np.asarray(ts, dtype=float)))

    def __call__(self, t):
        raise AssertionError("pointwise access not expected")


def bump(ts):
    # three outcomes, entropy rises until t = 10 and falls after
    a = 0.6 * np.sin(np.pi * ts / 20) ** 2
    return np.stack([1 - a, a / 2, a / 2], axis=1)


# -- entropy ---------------------------------------------------------------


def test_entropy_examples():
    assert reduction_entropy([1.0]) == 0.0
    assert reduction_entropy([0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)
    assert reduction_entropy([0.25] * 4) == pytest.approx(math.log(4), abs=1e-15)
    assert reduction_entropy([0.7, 0.3, 0.0]) == pytest.approx(reduction_entropy([0.7, 0.3]))


@pytest.mark.parametrize("bad", [[], [0.5, 0.6], [1.2, -0.2]])
def test_entropy_rejects_non_distributions(bad):
    with pytest.raises(BadDistribution):
        reduction_entropy(bad)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12).filter(lambda x: sum(x) > 1e-3))
def test_uniform_is_maximal(raw):
    w = np.array(raw) / sum(raw)
    n = len(w)
    assert reduction_entropy([1 / n] * n) == pytest.approx(math.log(n), abs=1e-12)
    assert reduction_entropy(w) <= math.log(n) + 1e-12


# -- instant solver ----------------------------------------------------------


@pytest.mark.parametrize("tau", [0.5, 1.0, 3.0])
def test_emission_instant(tau):
    path, horizon = first_path(build_emission(tau=tau))
    inst = find_reduction_instant(path, 0.0, horizon)
    assert inst.kind is InstantKind.HALF_CROSSING
    assert inst.t_red == pytest.approx(tau * math.log(2), abs=1e-9 * horizon)
    assert inst.weights_at == pytest.approx((0.5, 0.5), abs=1e-9)


@pytest.mark.parametrize("p_abs", [0.2, 0.4])
def test_absorption_below_half_is_stationary(p_abs):
    path, horizon = first_path(build_absorption(p_abs=p_abs))
    inst = find_reduction_instant(path, 0.0, horizon)
    assert inst.kind in (InstantKind.STATIONARY, InstantKind.PLATEAU)
    assert sorted(inst.weights_at) == pytest.approx(sorted([p_abs, 1 - p_abs]), abs=1e-9)


def test_weak_boson_unit_ratio():
    path, horizon = first_path(build_weak_boson(1.0, 1.0))
    inst = find_reduction_instant(path, 0.0, horizon)
    assert inst.kind is InstantKind.STATIONARY
    assert inst.t_red == pytest.approx(1.0, abs=1e-8)
    assert min(inst.weights_at) == pytest.approx(1 / math.e, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(tau=st.floats(0.05, 20.0))
def test_crossing_and_slope_detectors_agree(tau):
    path, horizon = first_path(build_emission(tau=tau))
    solver = SolverConfig()
    a = find_reduction_instant(path, 0.0, horizon, solver)
    b = find_reduction_instant(path, 0.0, horizon, solver, use_crossing=False)
    assert a.kind is InstantKind.HALF_CROSSING
    assert b.kind is InstantKind.HALF_CROSSING
    assert abs(a.t_red - b.t_red) <= 2 * solver.t_tol * horizon


@settings(max_examples=25, deadline=None)
@given(c=st.floats(0.05, 0.45))
def test_tourmaline_crossing_agreement(c):
    sc = build_tourmaline(c_perp_sq=c)
    path, horizon = first_path(sc)
    a = find_reduction_instant(path, 0.0, horizon)
    b = find_reduction_instant(path, 0.0, horizon, use_crossing=False)
    assert abs(a.t_red - b.t_red) <= 2 * SolverConfig().t_tol * horizon


def test_product_state_has_no_instant():
    traj = Spectrum(lambda ts: np.ones((ts.size, 1)), 1.0)
    assert find_reduction_instant(traj).kind is InstantKind.NONE
    with pytest.raises(NoEntanglement):
        find_reduction_instant(traj, allow_none=False)


def test_window_extension_and_non_convergence():
    traj = Spectrum(bump, 1.0)
    inst = find_reduction_instant(traj)
    assert inst.kind is InstantKind.STATIONARY
    assert inst.t_red == pytest.approx(10.0, abs=1e-6)
    with pytest.raises(NonConvergent):
        find_reduction_instant(traj, solver=SolverConfig(max_extensions=0))


def test_bisection_iteration_cap():
    path, horizon = first_path(build_emission())
    with pytest.raises(NonConvergent):
        find_reduction_instant(path, 0.0, horizon, SolverConfig(max_iter=3))


def test_plateau_first_entry():
    # sigma approaches ln 2 from below and never decreases
    traj = Spectrum(lambda ts: np.stack([1 - 0.5 * (1 - np.exp(-ts)), 0.5 * (1 - np.exp(-ts))], 1), 1.0)
    inst = find_reduction_instant(traj, solver=SolverConfig(plateau_eps=1e-6))
    assert inst.kind is InstantKind.PLATEAU
    assert math.log(2) - inst.sigma == pytest.approx(1e-6, rel=1e-3)


def test_entropy_scan_rows():
    path, _ = first_path(build_emission())
    rows = entropy_scan(path, [0.0, math.log(2)])
    assert rows[0].weights == (1.0,) and rows[0].sigma == 0.0
    assert rows[1].sigma == pytest.approx(math.log(2), abs=1e-12)


# -- jumps ---------------------------------------------------------------------

M, T = gauge_mode("M"), matter_mode("T", 2)
CUT = Bipartition.of((M, T), ["M"])
STATE_73 = superpose((M, T), [(math.sqrt(0.7), (0, 1)), (math.sqrt(0.3), (1, 0))])


def test_single_term_jump():
    d = schmidt_decompose(PureState.basis((M, T), (1, 0)), CUT)
    ev = sample_jump(d, 0.0, np.random.default_rng(0))
    assert ev.outcome_index == 0 and ev.probability == 1.0


def test_enumerate_jump_and_sampling():
    d = schmidt_decompose(STATE_73, CUT)
    branches = enumerate_jump(d)
    assert [p for p, _ in branches] == pytest.approx([0.7, 0.3])
    rng = np.random.default_rng(7)
    n = 100_000
    hits = sum(sample_jump(d, 0.0, rng).outcome_index == 0 for _ in range(n))
    freq = hits / n
    assert abs(freq - 0.7) < 0.01
    assert abs(freq - 0.7) < 4 * math.sqrt(0.21 / n)


def test_post_jump_states_are_products():
    rng = np.random.default_rng(3)
    for _ in range(20):
        s = random_state(rng, (gauge_mode("G", 2), matter_mode("R", 3)))
        cut = Bipartition.of(s.modes, ["G"])
        for _, b in enumerate_jump(schmidt_decompose(s, cut)):
            sv = np.linalg.svd(b.to_dense().reshape(3, 3), compute_uv=False)
            assert np.all(sv[1:] < 1e-10)


def test_tourmaline_first_branches_symmetric():
    sc = build_tourmaline(c_perp_sq=0.3)
    path, horizon = first_path(sc)
    inst = find_reduction_instant(path, 0.0, horizon)
    probs = [p for p, _ in enumerate_jump(path(inst.t_red))]
    assert probs == pytest.approx([0.5, 0.5], abs=1e-9)


# -- mixed states ------------------------------------------------------------------


def test_reduce_ensemble_examples():
    single = Ensemble(((1.0, STATE_73),))
    a = [p for p, _ in reduce_ensemble(single, CUT)]
    b = [p for p, _ in enumerate_jump(schmidt_decompose(STATE_73, CUT))]
    assert a == pytest.approx(b)

    prod = Ensemble(((0.5, PureState.basis((M, T), (0, 0))), (0.5, PureState.basis((M, T), (1, 1)))))
    assert [p for p, _ in reduce_ensemble(prod, CUT)] == pytest.approx([0.5, 0.5])

    s64 = superpose((M, T), [(math.sqrt(0.6), (0, 1)), (math.sqrt(0.4), (1, 0))])
    s64b = superpose((M, T), [(math.sqrt(0.6), (0, 0)), (-math.sqrt(0.4), (1, 1))])
    mixed = Ensemble(((0.5, s64), (0.5, s64b)))
    probs = [p for p, _ in reduce_ensemble(mixed, CUT)]
    assert probs == pytest.approx([0.3, 0.2, 0.3, 0.2])
    assert sum(probs) == pytest.approx(1.0, abs=1e-12)


def test_mixing_preserves_density_matrix(rng):
    e = Ensemble(((0.3, random_state(rng, (M, T))), (0.7, random_state(rng, (M, T)))))
    mixed = mix_representation(e, 0.4, 1.1, 0.3)
    assert np.allclose(mixed.density_matrix(), e.density_matrix(), atol=1e-12)


def test_orthogonal_products_already_optimal():
    e = Ensemble(((0.5, PureState.basis((M, T), (0, 0))), (0.5, PureState.basis((M, T), (1, 1)))))
    best, sigma = maximize_representation_entropy(e, CUT)
    assert sigma == pytest.approx(representation_entropy(e, CUT), abs=1e-12)
    assert sigma == pytest.approx(math.log(2), abs=1e-12)


def test_identical_members_collapse():
    e = Ensemble(((0.4, STATE_73), (0.6, STATE_73)))
    _, sigma = maximize_representation_entropy(e, CUT)
    assert sigma == pytest.approx(reduction_entropy([0.7, 0.3]), abs=1e-9)


def test_optimum_not_below_input(rng):
    for _ in range(5):
        e = Ensemble(((0.5, random_state(rng, (M, T))), (0.5, random_state(rng, (M, T)))))
        best, sigma = maximize_representation_entropy(e, CUT)
        assert sigma >= representation_entropy(e, CUT) - 1e-12
        assert np.allclose(best.density_matrix(), e.density_matrix(), atol=1e-10)


def test_ensemble_size_limit():
    a, b, c = (PureState.basis((M, T), lab) for lab in [(0, 0), (0, 1), (1, 0)])
    e = Ensemble(((0.2, a), (0.3, b), (0.5, c)))
    with pytest.raises(UnsupportedEnsembleSize):
        maximize_representation_entropy(e, CUT)
    single, sigma = maximize_representation_entropy(Ensemble(((1.0, STATE_73),)), CUT)
    assert sigma == pytest.approx(reduction_entropy([0.7, 0.3]))
