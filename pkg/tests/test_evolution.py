import math

import numpy as np
import pytest

from reduxion.evolution import (
    AmplitudeSchedule,
    Family,
    KineticsCurves,
    NonPositiveBeta,
    NonPositiveTau,
    ScheduleError,
    detuned_rabi,
    exp_survival,
    propagate,
    rabi_pair,
    tensor_propagations,
    weak_boson_curves,
    weak_boson_peak,
)
from reduxion.state import PureState, gauge_mode, matter_mode


def test_exp_survival_examples():
    m0, m1 = exp_survival(1.0, 0.0)
    assert (m0, m1) == (1.0, 0.0)
    m0, m1 = exp_survival(2.0, 2.0 * math.log(2))
    assert abs(m0) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert abs(m1) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    m0, m1 = exp_survival(1.0, 800.0)
    assert m0 == pytest.approx(0.0, abs=1e-100) and m1 == pytest.approx(1.0)
    with pytest.raises(NonPositiveTau):
        exp_survival(0.0, 1.0)


def test_rabi_pair_examples(rng):
    assert rabi_pair(2.0, 0.0) == (1, 0)
    m0, m1 = rabi_pair(1.0, math.pi / 2)
    assert abs(m0) < 1e-15 and m1 == pytest.approx(-1j)
    t = rng.uniform(0, 50, 1000)
    m0, m1 = rabi_pair(1.3, t)
    assert np.abs(np.abs(m0) ** 2 + np.abs(m1) ** 2 - 1).max() < 1e-12


def test_detuned_rabi_cap():
    stay, move = detuned_rabi(1.0, 0.4, 1.0)
    assert abs(move) ** 2 == pytest.approx(0.4, abs=1e-15)
    assert abs(stay) ** 2 == pytest.approx(0.6, abs=1e-15)
    with pytest.raises(ScheduleError):
        detuned_rabi(1.0, 1.5, 0.0)


def test_weak_boson_examples():
    assert tuple(map(float, weak_boson_curves(3.0, 0.0))) == (1.0, 0.0, 0.0)
    assert float(weak_boson_curves(1.0, 1.0)[1]) == pytest.approx(1 / math.e, abs=1e-15)
    tau0, w_peak = weak_boson_peak(2.0)
    assert tau0 == pytest.approx(math.log(2))
    # numeric maximisation on a fine grid
    grid = np.linspace(0, 5, 500_001)
    w1 = weak_boson_curves(2.0, grid)[1]
    assert grid[np.argmax(w1)] == pytest.approx(tau0, abs=2e-5)
    assert w1.max() == pytest.approx(w_peak, abs=1e-9)
    assert w_peak == pytest.approx(0.25)


def test_weak_boson_peak_limits():
    assert weak_boson_peak(1.0) == (1.0, pytest.approx(1 / math.e))
    _, w = weak_boson_peak(100.0)
    assert abs(w - 0.01) / 0.01 < 0.2
    _, w = weak_boson_peak(0.01)
    assert w > 0.5 and w == pytest.approx(1.0, abs=0.06)
    for bad in (0.0, -1.0):
        with pytest.raises(NonPositiveBeta):
            weak_boson_curves(bad, 1.0)
        with pytest.raises(NonPositiveBeta):
            weak_boson_peak(bad)


@pytest.mark.parametrize("beta", [0.01, 0.5, 1.0, 2.0, 100.0])
def test_weak_boson_peak_matches_grid(beta):
    tau0, w_peak = weak_boson_peak(beta)
    hi = 10 * max(tau0, 1.0)
    grid = np.linspace(0, hi, 400_001)
    w1 = weak_boson_curves(beta, grid)[1]
    step = grid[1]
    assert abs(grid[np.argmax(w1)] - tau0) <= step
    assert w1.max() == pytest.approx(w_peak, rel=1e-8)


@pytest.mark.parametrize("beta", [0.01, 0.5, 1.0, 2.0, 100.0])
def test_weak_boson_curves_sum_to_one(beta, rng):
    tau = rng.uniform(0, 30, 1000)
    total = sum(weak_boson_curves(beta, tau))
    assert np.abs(total - 1).max() < 1e-15


def test_weak_boson_beta_one_continuity():
    tau = np.linspace(0, 20, 2001)
    limit = np.array(weak_boson_curves(1.0, tau))
    for beta in (1 - 1e-6, 1 + 1e-6, 1 - 2e-6, 1 + 2e-6):
        assert np.abs(np.array(weak_boson_curves(beta, tau)) - limit).max() < 1e-4


SCHEDULES = [
    AmplitudeSchedule.exponential(0.7),
    AmplitudeSchedule.rabi(2.0),
    AmplitudeSchedule.detuned(1.5, 0.3),
    AmplitudeSchedule.weak_boson(1.0, 3.0),
    AmplitudeSchedule.table([0, 1, 2], [[1, 0], [0.5, 0.5], [0.2, 0.8]]),
]


@pytest.mark.parametrize("sched", SCHEDULES, ids=lambda s: s.family.value)
def test_schedules_normalised(sched, rng):
    t = rng.uniform(0, 2, 1000)
    pops = sched.populations(t)
    assert pops.shape == (1000, sched.size)
    assert np.abs(pops.sum(axis=1) - 1).max() < 1e-12


def test_schedule_validation():
    with pytest.raises(NonPositiveTau):
        AmplitudeSchedule.exponential(-1)
    with pytest.raises(ScheduleError):
        AmplitudeSchedule.table([0, 0], [[1, 0], [1, 0]])
    with pytest.raises(ScheduleError):
        AmplitudeSchedule.table([0, 1], [[1, 0], [0.5, 0.6]])
    with pytest.raises(ScheduleError):
        SCHEDULES[0].component(2)
    assert SCHEDULES[0].family is Family.EXPONENTIAL_SURVIVAL


def _emission_prop(tau=1.0):
    modes = (gauge_mode("M"), matter_mode("Atom", 2))
    s = PureState.basis(modes, (0, 1))
    sched = AmplitudeSchedule.exponential(tau)

    def rule(label):
        if label == (0, 1):
            return [((0, 1), sched.component(0)), ((1, 0), sched.component(1))]
        return None

    return propagate(s, rule, 10 * tau)


def test_propagation_evaluation():
    p = _emission_prop()
    s = p(math.log(2))
    assert abs(s.amplitudes[(0, 1)]) ** 2 == pytest.approx(0.5)
    assert abs(s.amplitudes[(1, 0)]) ** 2 == pytest.approx(0.5)
    ts = np.linspace(0, 10, 101)
    assert np.abs(p.norms(ts) - 1).max() < 1e-12
    assert p.support == ((0, 1), (1, 0))


def test_tensor_propagations_factorise():
    p = _emission_prop(1.0)
    q = _emission_prop(3.0).relabel({"M": "M2", "Atom": "Atom2"})
    pq = tensor_propagations(p, q)
    ts = np.linspace(0, 5, 11)
    expect = np.einsum("ti,tj->tij", p.dense(ts), q.dense(ts)).reshape(len(ts), -1)
    assert np.allclose(pq.dense(ts), expect, atol=1e-15)
    assert pq.horizon == 30.0


def test_kinetics_curves_object():
    k = KineticsCurves(2.0)
    assert k.peak() == weak_boson_peak(2.0)
    with pytest.raises(NonPositiveBeta):
        KineticsCurves(0.0)
