"""Reduced (alpha, y) flow on the center manifold."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from truncdefect import center_flow as cf
from truncdefect import scalar_saddle as ss
from truncdefect.errors import Blowup, EventNotReached


@pytest.mark.parametrize("eps", [1e-3, 1e-2, 5e-2])
def test_passage_length_equals_half_leg_time(eps):
    f = ss.cubic_field()
    rep = cf.passage_report(f, eps)
    T = ss.travel_time_direct(f, eps, f.delta0, ss.Leg.MINUS_TO_ZERO, estimate_error=False).T
    assert rep.L_of_eps == pytest.approx(T, rel=1e-9)
    assert rep.scaled_length == pytest.approx(eps * T, rel=1e-9)


@pytest.mark.parametrize("eps", [1e-3, 1e-2, 5e-2])
def test_phase_drift_for_pure_quadratic(eps):
    # alpha drift = int_{-d}^{0} y / (eps^2 + y^2) dy = -log(1 + d^2/eps^2) / 2
    f = ss.zero_field()
    rep = cf.passage_report(f, eps)
    exact = -0.5 * math.log1p(f.delta0**2 / eps**2)
    assert rep.alpha_drift == pytest.approx(exact, rel=1e-9)
    assert cf.alpha_drift_quadrature(f, eps, f.delta0) == pytest.approx(exact, rel=1e-11)


@given(c=st.floats(-1.0, 1.0), eps=st.floats(2e-3, 5e-2))
def test_drift_quadrature_matches_trajectory(c, eps):
    f = ss.SaddleField.polynomial({(3, 0): c})
    rep = cf.passage_report(f, eps)
    assert rep.alpha_drift == pytest.approx(cf.alpha_drift_quadrature(f, eps, f.delta0), rel=1e-8)


def test_log_drift_at_eps_zero():
    fit = cf.phase_drift_log_check(ss.zero_field())
    assert fit.slope == pytest.approx(-1.0, abs=1e-10)
    assert fit.residual < 1e-10
    assert cf.phase_drift_log_check(ss.quartic_field()).residual < 1e-2


@given(a0=st.floats(-3.0, 3.0), y0=st.floats(-0.3, 0.3), omega=st.floats(0.0, 1e-2))
def test_even_field_is_reversible(a0, y0, omega):
    assert cf.reverser_defect(ss.quartic_field(), omega, (a0, y0), 0.5) < 1e-10


def test_cubic_field_breaks_reversibility():
    assert cf.reverser_defect(ss.cubic_field(), 1e-4, (0.0, 0.2), 1.0) > 1e-4


def test_local_expansions_are_bounded():
    f = ss.cubic_field()
    near, bound = cf.local_expansion_check(f, 1e-2)
    assert near < 5.0 and bound < 5.0
    near0, bound0 = cf.local_expansion_check(f, 0.0)
    assert math.isnan(near0) and bound0 < 5.0


def test_samples_are_reduced_mod_two_pi():
    traj = cf.integrate_center(ss.zero_field(), 1e-2, (10.0, 0.1), (0.0, 2.0))
    assert all(0.0 <= a < 2 * math.pi for _, a, _ in traj.samples)
    assert traj.drift(0.0, 2.0) == pytest.approx(traj(2.0)[0] - 10.0)


def test_errors():
    f = ss.zero_field()
    with pytest.raises(Blowup):
        cf.integrate_center(f, 0.0, (0.0, 5.0), (0.0, 1.0))
    with pytest.raises(Blowup):
        cf.integrate_center(f, 0.0, (0.0, 0.5), (0.0, 10.0))
    with pytest.raises(EventNotReached):
        cf.passage_report(f, 0.0)
