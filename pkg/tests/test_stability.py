import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critomech.dynamics import make_rhs
from critomech.errors import MarginalStabilityWarning
from critomech.stability import (Stability, batch_classify, build_jacobian,
                                 characteristic_polynomial, classify_eigen,
                                 classify_routh_hurwitz, classify_state,
                                 classified_steady_states)
from critomech.steady import steady_state_roots
from oracles import complex_rhs, finite_difference_jacobian
from test_steady import params_strategy

STAR_DELTA = -20.25  # toroid-referenced detuning -0.25 with delta = 20


def test_decoupled_mechanics_block(fig2):
    p = fig2.replace(g1=0.0)
    ss = steady_state_roots(p)[0]
    J = build_jacobian(p, ss).entries
    assert np.all(J[:2, 2:] == 0) and np.all(J[2:, :2] == 0)
    ev = np.linalg.eigvals(J[:2, :2])
    w = math.sqrt(p.omega_m**2 - p.gamma_m**2 / 4)
    np.testing.assert_allclose(sorted(ev.imag), [-w, w], rtol=1e-12)
    np.testing.assert_allclose(ev.real, -p.gamma_m / 2, rtol=1e-12)


def test_undriven_has_no_coupling(fig2):
    p = fig2.replace(I_in=0.0)
    jm = build_jacobian(p, steady_state_roots(p)[0])
    assert jm.X_bs == 0 and jm.Y_bs == 0
    assert np.all(jm.entries[1, 4:] == 0) and np.all(jm.entries[4:, 0] == 0)


def test_quadratures_of_b(fig2):
    ss = steady_state_roots(fig2)[0]
    jm = build_jacobian(fig2, ss)
    assert jm.X_bs == pytest.approx(((ss.b_s + ss.b_s.conjugate()) / math.sqrt(2)).real)
    assert jm.Y_bs == pytest.approx(((ss.b_s - ss.b_s.conjugate()) / (math.sqrt(2) * 1j)).real)


@settings(max_examples=60, deadline=None)
@given(params_strategy)
def test_jacobian_is_linearization(p):
    # finite differences of an independent complex-form right-hand side
    rhs = complex_rhs(p)
    for ss in steady_state_roots(p):
        y = ss.state_vector()
        fd = finite_difference_jacobian(lambda v: rhs(0.0, v), y, h=1e-6)
        J = build_jacobian(p, ss).entries
        scale = 1 + np.max(np.abs(J))
        assert np.max(np.abs(fd - J)) < 1e-5 * scale


def test_library_rhs_matches_complex_form(fig2):
    rng = np.random.default_rng(3)
    a, b = make_rhs(fig2), complex_rhs(fig2)
    for _ in range(20):
        y = rng.normal(size=6) * 10
        np.testing.assert_allclose(a(0.0, y), b(0.0, y), rtol=1e-12, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(params_strategy)
def test_trace_identity(p):
    for ss in steady_state_roots(p):
        J = build_jacobian(p, ss).entries
        assert np.trace(J) == pytest.approx(-p.gamma_m - 2 * p.kappa - p.kappa_b, abs=1e-12)


def test_diagonal_stable():
    J = -np.eye(6)
    assert classify_eigen(J).kind is Stability.STABLE
    assert classify_routh_hurwitz(J)


def test_star_point_parametric_unstable(fig2):
    p = fig2.replace(Delta=STAR_DELTA)
    (ss,) = steady_state_roots(p)
    cls = classify_state(p, ss)
    assert cls.kind is Stability.PARAMETRIC_UNSTABLE
    assert cls.leading_eigenvalue.real > 0 and abs(cls.leading_eigenvalue.imag) > 0.1
    assert not classify_routh_hurwitz(build_jacobian(p, ss))


def test_literal_axis_reading_is_stable(fig2):
    # Delta = -0.25 measured from the ring mode is a stable point; see decisions ledger
    p = fig2.replace(Delta=-0.25)
    assert [s.stability.kind for s in classified_steady_states(p)] == [Stability.STABLE]


def test_middle_root_is_saddle(fig2):
    for D in (-15.5, -16.0, -5.0, 3.0):
        roots = classified_steady_states(fig2.replace(Delta=D))
        assert len(roots) == 3
        mid = roots[1].stability
        assert mid.kind is Stability.UNSTABLE
        assert mid.leading_eigenvalue.real > 0 and mid.leading_eigenvalue.imag == 0


def test_routh_hurwitz_agrees_on_random_draws():
    from test_steady import random_params
    rng = np.random.default_rng(11)
    checked = disagree = 0
    while checked < 2000:
        p = random_params(rng)
        for ss in steady_state_roots(p):
            J = build_jacobian(p, ss).entries
            cls = classify_eigen(J)
            if abs(cls.margin) <= 1e-8:
                continue
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", MarginalStabilityWarning)
                disagree += classify_routh_hurwitz(J) != cls.stable
            checked += 1
    assert disagree == 0


def test_characteristic_polynomial_matches_numpy(fig2):
    J = build_jacobian(fig2, steady_state_roots(fig2)[0]).entries
    np.testing.assert_allclose(characteristic_polynomial(J), np.poly(J), rtol=1e-9, atol=1e-6)


def test_marginal_case_warns():
    J = np.diag([-1.0, -1.0, -1.0, -1.0, -1.0, 0.0])
    with pytest.warns(MarginalStabilityWarning):
        assert not classify_routh_hurwitz(J)


def test_reordering_invariance(fig2):
    rng = np.random.default_rng(5)
    for D in (STAR_DELTA, -15.5, -30.0):
        for ss in steady_state_roots(fig2.replace(Delta=D)):
            J = build_jacobian(fig2.replace(Delta=D), ss).entries
            perm = rng.permutation(6)
            Jp = J[np.ix_(perm, perm)]
            assert classify_eigen(Jp).kind is classify_eigen(J).kind
            assert classify_routh_hurwitz(Jp) == classify_routh_hurwitz(J)


def test_batch_classify_matches_scalar(fig2):
    D = np.linspace(-30, 10, 41)
    xs = np.array([steady_state_roots(fig2.replace(Delta=d))[0].x_s for d in D])
    kind, margin, _ = batch_classify(fig2, D, fig2.I_in, xs)
    codes = {Stability.STABLE: 0, Stability.UNSTABLE: 1, Stability.PARAMETRIC_UNSTABLE: 2}
    for d, x, k, m in zip(D, xs, kind, margin):
        cls = classify_state(fig2.replace(Delta=d), steady_state_roots(fig2.replace(Delta=d))[0])
        assert codes[cls.kind] == k
        assert m == pytest.approx(cls.margin, abs=1e-10)
