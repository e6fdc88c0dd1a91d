"""Homogeneous oscillations, dispersion relations and the hypothesis checks."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from truncdefect import fourier, models
from truncdefect import wave_trains as wtm


@pytest.fixture(scope="module")
def lam_omega():
    system = models.lambda_omega()
    wt = wtm.find_wave_train(system, wtm.circle_guess(), 32)
    return system, wt, wtm.dispersion(system, wt)


def test_lambda_omega_oscillation_is_the_unit_circle(lam_omega):
    system, wt, _ = lam_omega
    # omega_d = omega0 - gamma for f = (1 + i omega0) A - (1 + i gamma)|A|^2 A
    assert wt.omega_d == pytest.approx(0.5, abs=1e-12)
    assert wt.residual < 1e-12
    assert np.allclose(wt.amplitude, 1.0, atol=1e-12)


def test_lambda_omega_dispersion_is_exact(lam_omega):
    # omega_nl(k) = omega0 - gamma (1 - k^2) and lambda_lin(l) = -l^2 + O(l^4) for D = I
    _, _, disp = lam_omega
    assert disp.omega_nl_pp0 == pytest.approx(1.0, abs=1e-9)
    for k, om in disp.omega_nl_samples:
        assert om == pytest.approx(0.5 + 0.5 * k * k, abs=1e-11)
    assert disp.lambda_lin_pp0 == pytest.approx(-2.0, abs=1e-8)


def test_cgl_matches_gauge_formulas(cgl):
    system, wt, rc = cgl
    assert wt.omega_d == pytest.approx(system.reference_omega_d(), abs=1e-12)
    assert system.homogeneous_amplitude_squared() == pytest.approx(1.0)
    disp = wtm.dispersion(system, wt)
    # the default k grid carries an O(h^4) Richardson error of about 1.5e-3
    assert disp.omega_nl_pp0 == pytest.approx(system.reference_omega_nl_pp0(), abs=3e-3)
    assert rc.kappa == pytest.approx(0.6, abs=3e-3)
    assert rc.orientation == 1


def test_finer_k_grid_improves_curvature(cgl):
    system, wt, _ = cgl
    fine = wtm.nonlinear_dispersion(system, wt, (-0.05, -0.025, 0.0, 0.025, 0.05))
    assert fine.omega_nl_pp0 == pytest.approx(-1.2, abs=1e-5)


@pytest.mark.parametrize("make", [models.lambda_omega, models.default_defect_model])
def test_hypotheses_hold(make):
    system = make()
    wt = wtm.find_wave_train(system, wtm.circle_guess(), 16)
    rep = wtm.check_hypotheses(system, wt)
    assert rep.double_zero_pass and rep.fold_pass and rep.reversers_verified
    assert rep.zero_multiplicity == 2
    assert rep.kernel_dims[0] == 1  # a Jordan block, not a double kernel


@given(r=st.floats(0.6, 1.4))
def test_oscillation_independent_of_guess_radius(r):
    wt = wtm.find_wave_train(models.lambda_omega(), wtm.circle_guess(r), 16)
    assert wt.omega_d == pytest.approx(0.5, abs=1e-11)


@given(alpha=st.floats(0.0, 2 * np.pi))
def test_translate_is_still_a_solution(alpha):
    system = models.lambda_omega()
    wt = wtm.find_wave_train(system, wtm.circle_guess(), 16)
    moved = wt.translate(alpha)
    res = wt.omega_d * fourier.differentiate(moved.values) - system.f(moved.values)
    assert np.max(np.abs(res)) < 1e-11
    assert np.allclose(moved.values, wt(wt.tau + alpha), atol=1e-12)


def test_second_derivative_richardson():
    grid = [-0.2, -0.1, 0.0, 0.1, 0.2]
    vals = [np.cos(k) for k in grid]
    est, d2 = wtm.second_derivative_at_zero(grid, vals)
    assert abs(est + 1.0) < 1e-5 < abs(d2[0.2] + 1.0)
    with pytest.raises(ValueError):
        wtm.second_derivative_at_zero([0.1, 0.2], [1.0, 2.0])


def test_zero_eigenvalue_multiplicity_of_jordan_block():
    M = np.diag([0.0, 0.0, 1.0, -2.0])
    M[0, 1] = 1.0
    mult, dims = wtm.zero_eigenvalue_multiplicity(M)
    assert mult == 2 and dims[0] == 1
