import math

import numpy as np
import pytest

from critomech.dynamics import (LimitCycle, Trajectory, detect_limit_cycle, integrate,
                                perturbed_start)
from critomech.errors import NoOscillation
from critomech.steady import steady_state_roots
from oracles import complex_rhs

STAR_DELTA = -20.25


@pytest.fixture(scope="module")
def star_cycles(fig2):
    p = fig2.replace(Delta=STAR_DELTA)
    (ss,) = steady_state_roots(p)
    return {dx: detect_limit_cycle(integrate(p, perturbed_start(ss, dx), 1200.0))
            for dx in (1e-3, -1e-3, 1e-2)}


def _synthetic(fn, t_end=400.0, dt=0.01):
    t = np.arange(0.0, t_end, dt)
    states = np.zeros((t.size, 6))
    states[:, 0] = fn(t)
    return Trajectory(t, states, None)


def test_undriven_origin_stays_zero(fig2):
    tr = integrate(fig2.replace(I_in=0.0), np.zeros(6), 50.0)
    assert np.all(tr.states == 0)
    assert np.all(np.diff(tr.times) > 0)


@pytest.mark.parametrize("name,Delta", [("fig2", -30.0), ("fig3", 0.1)])
def test_stable_state_is_stationary(name, Delta, request):
    # default tolerances; the fig2 state has norm ~35, see decisions ledger
    p = request.getfixturevalue(name).replace(Delta=Delta)
    (ss,) = steady_state_roots(p)
    tr = integrate(p, ss, 1000.0, sample_dt=None)
    dev = np.max(np.abs(tr.states - ss.state_vector()), axis=1)
    assert dev.max() < 1e-6


def test_stable_state_is_stationary_tight_tolerance(fig2):
    p = fig2.replace(Delta=-30.0)
    (ss,) = steady_state_roots(p)
    tr = integrate(p, ss, 1000.0, rtol=1e-10, atol=1e-12, sample_dt=None)
    assert np.max(np.abs(tr.states - ss.state_vector())) < 1e-7


def test_rhs_matches_complex_form(fig3):
    from critomech.dynamics import make_rhs
    rng = np.random.default_rng(1)
    for f in (0.0, 0.3):
        a, b = make_rhs(fig3, f), complex_rhs(fig3, f)
        for _ in range(10):
            y = rng.normal(size=6)
            np.testing.assert_allclose(a(0.0, y), b(0.0, y), rtol=1e-12, atol=1e-12)


def test_steady_state_zeroes_rhs(fig2):
    from critomech.dynamics import make_rhs
    p = fig2.replace(Delta=-15.5)
    rhs = make_rhs(p)
    for ss in steady_state_roots(p):
        y = ss.state_vector()
        assert np.max(np.abs(rhs(0.0, y))) < 1e-8 * (1 + np.max(np.abs(y)))


def test_bad_inputs(fig2):
    with pytest.raises(ValueError):
        integrate(fig2, np.zeros(6), 0.0)
    with pytest.raises(ValueError):
        integrate(fig2, np.zeros(5), 1.0)


def test_synthetic_sine_period():
    lc = detect_limit_cycle(_synthetic(lambda t: np.sin(0.7 * t)))
    assert lc.period == pytest.approx(2 * math.pi / 0.7, rel=1e-3)
    assert lc.amplitude_x == pytest.approx(2.0, rel=1e-3)
    assert lc.converged


def test_decaying_signal_not_converged():
    lc = detect_limit_cycle(_synthetic(lambda t: np.exp(-0.01 * t) * np.sin(t)))
    assert not lc.converged


def test_fixed_point_raises(fig2):
    p = fig2.replace(Delta=-30.0)
    (ss,) = steady_state_roots(p)
    tr = integrate(p, perturbed_start(ss), 3000.0)
    with pytest.raises(NoOscillation):
        detect_limit_cycle(tr)
    with pytest.raises(NoOscillation):
        detect_limit_cycle(_synthetic(lambda t: np.sin(0.01 * t), t_end=100.0))


def test_optical_energy_decay(fig2):
    p = fig2.replace(g1=0.0, I_in=0.0)
    y0 = np.array([0.0, 0.0, 1.0, -0.5, 0.3, 2.0])
    tr = integrate(p, y0, 10.0, rtol=1e-10, atol=1e-13)
    E = tr.optical_energy()
    assert np.all(np.diff(E) <= 1e-9 * E[:-1])
    slow, fast = sorted((2 * p.kappa, p.kappa_b))
    t = tr.times
    assert np.all(E <= E[0] * np.exp(-slow * t) * (1 + 1e-7) + 1e-15)
    assert np.all(E >= E[0] * np.exp(-fast * t) * (1 - 1e-7))


def test_perturbed_stable_state_returns(fig2):
    from critomech.stability import classify_state
    for p in (fig2.replace(Delta=-30.0), fig2.replace(Delta=8.0), fig2.replace(I_in=1e3, Delta=0.0)):
        (ss,) = steady_state_roots(p)
        margin = classify_state(p, ss).margin
        assert margin < -0.01
        t_end = min(3000.0, 30.0 / -margin)  # decay by e^-30 at the slowest rate
        for dx in (1e-3, -1e-3):
            tr = integrate(p, perturbed_start(ss, dx), t_end)
            assert np.linalg.norm(tr.states[-1] - ss.state_vector()) < 1e-6


def _final(p, y0, t_end, rtol):
    return integrate(p, y0, t_end, rtol=rtol, atol=rtol / 100, sample_dt=None).states[-1]


def test_tolerance_halving(fig2):
    # literal property: the change is below the coarser tolerance, componentwise
    p = fig2.replace(Delta=-30.0)
    (ss,) = steady_state_roots(p)
    y0 = perturbed_start(ss, 0.5)
    coarse, fine = _final(p, y0, 20.0, 1e-8), _final(p, y0, 20.0, 5e-9)
    assert np.all(np.abs(coarse - fine) < 1e-8 * np.abs(fine) + 1e-10)


@pytest.mark.parametrize("name,Delta,dx", [("fig2", -30.0, 0.5), ("fig3", 0.1, 1e-3)])
def test_global_error_scales_with_tolerance(name, Delta, dx, request):
    p = request.getfixturevalue(name).replace(Delta=Delta)
    y0 = perturbed_start(steady_state_roots(p)[0], dx)
    ref = _final(p, y0, 20.0, 1e-13)
    e1 = np.linalg.norm(_final(p, y0, 20.0, 1e-8) - ref)
    e2 = np.linalg.norm(_final(p, y0, 20.0, 5e-9) - ref)
    # error-per-step control gives roughly tol^(4/5) to tol^1
    assert 1.2 < e1 / e2 < 3.0


def test_star_point_spirals_out(fig2):
    p = fig2.replace(Delta=STAR_DELTA)
    (ss,) = steady_state_roots(p)
    tr = integrate(p, perturbed_start(ss), 300.0)
    dist = np.abs(tr.x - ss.x_s)
    assert dist[-500:].max() > 1e3 * 1e-3
    assert np.all(np.isfinite(tr.states)) and np.abs(tr.states).max() < 1e4


def test_star_point_limit_cycle(star_cycles):
    lc = star_cycles[1e-3]
    assert isinstance(lc, LimitCycle)
    assert lc.converged and lc.amplitude_drift < 1e-3 and lc.period_jitter < 1e-3
    assert 0 < lc.amplitude_x < math.inf


def test_limit_cycle_independent_of_start(star_cycles):
    amps = np.array([lc.amplitude_x for lc in star_cycles.values()])
    assert np.ptp(amps) / amps.mean() < 0.01
