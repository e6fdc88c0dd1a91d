"""Passage times of the scalar saddle-node against closed forms and quadrature."""
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st
from scipy import integrate

from truncdefect import scalar_saddle as ss
from truncdefect.errors import DomainError, GridTooCoarse, NoBracket, NonMonotone, OrderTooLow
from truncdefect.scalar_saddle import Leg


def _quad(f, lo, hi):
    return integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=500,
                          points=[0.0] if lo < 0 < hi else None)[0]


@pytest.mark.parametrize("eps", [1e-4, 1e-3, 1e-2, 0.1])
@pytest.mark.parametrize("delta", [0.25, 0.5, 1.0])
def test_zero_field_matches_arctan(eps, delta):
    res = ss.travel_time_direct(ss.zero_field(), eps, delta)
    exact = math.atan(delta / eps) / eps
    assert abs(res.T - exact) / exact < 1e-10
    assert res.method is ss.Method.DIRECT_ODE


def test_full_leg_is_sum_of_halves():
    f = ss.cubic_field()
    full = ss.travel_time_direct(f, 1e-2, 0.5, Leg.FULL).T
    halves = sum(ss.travel_time_direct(f, 1e-2, 0.5, leg).T
                 for leg in (Leg.MINUS_TO_ZERO, Leg.ZERO_TO_PLUS))
    assert full == pytest.approx(halves, rel=1e-10)


@given(c=st.floats(-1.0, 1.0), eps=st.floats(1e-3, 0.1), delta=st.floats(0.25, 1.0))
def test_direct_integration_agrees_with_quadrature(c, eps, delta):
    f = ss.SaddleField.polynomial({(3, 0): c})
    T = ss.travel_time_direct(f, eps, delta, estimate_error=False).T
    assert T == pytest.approx(_quad(lambda y: 1.0 / f.rhs(y, eps), 0.0, delta), rel=1e-9)


@given(c=st.floats(-1.0, 1.0), eps=st.floats(1e-3, 0.1))
def test_even_field_legs_are_mirror_images(c, eps):
    f = ss.SaddleField.polynomial({(4, 0): c})
    plus = ss.travel_time_direct(f, eps, 0.5, Leg.ZERO_TO_PLUS, estimate_error=False).T
    minus = ss.travel_time_direct(f, eps, 0.5, Leg.MINUS_TO_ZERO, estimate_error=False).T
    assert plus == pytest.approx(minus, rel=1e-10)


@given(e1=st.floats(1e-3, 0.05), ratio=st.floats(1.1, 2.0))
def test_travel_time_decreases_with_eps(e1, ratio):
    f = ss.cubic_field()
    t1 = ss.travel_time_direct(f, e1, 0.5, estimate_error=False).T
    t2 = ss.travel_time_direct(f, e1 * ratio, 0.5, estimate_error=False).T
    assert t2 < t1


@pytest.mark.parametrize("b", [0.0, 1.0, -1.0])
@pytest.mark.parametrize("eps", [1e-3, 1e-2, 5e-2])
def test_partial_fraction_matches_quadrature_for_exact_normal_form(b, eps):
    nf = ss.NormalForm.exact(b=(b,))
    for leg, lo, hi in ((Leg.ZERO_TO_PLUS, 0.0, 0.5), (Leg.MINUS_TO_ZERO, -0.5, 0.0)):
        T = ss.travel_time_partial_fraction(nf, eps, 0.5, leg).T
        ref = _quad(lambda z: 1.0 / (eps * eps + z * z + b * z**3), lo, hi)
        assert T == pytest.approx(ref, rel=1e-11)


def test_partial_fraction_log_coefficient_is_real_root_residue():
    a, b, eps = 0.0, 1.0, 1e-2
    terms = ss.partial_fraction_terms(a, b, eps, 0.5)
    u = terms.roots
    # residues of u / (u^3 + (1+a) u + eps b) sum to zero and reproduce the integrand
    assert abs(np.sum(terms.residues)) < 1e-13
    probe = 0.3
    lhs = probe / (probe**3 + (1 + a) * probe + eps * b)
    rhs = np.sum(terms.residues / (probe - u)).real
    assert lhs == pytest.approx(rhs, rel=1e-12)
    assert terms.log_coefficient == pytest.approx(-terms.residues[0].real)


def test_quartic_normal_form_against_symbolic_solution():
    """Solve the conjugacy order by order in sympy and compare with the fitter."""
    z, w = sp.symbols("z w")
    K = 5
    coeffs, psi = {}, z
    for i in range(K + 1):
        for j in range(K // 2 + 1):
            if 2 <= i + 2 * j <= K and (i, j) not in ((1, 0), (2, 0)):
                coeffs[(i, j)] = sp.Symbol(f"p{i}{j}")
                psi += coeffs[(i, j)] * z**i * w**j
    a1, b0, b1 = sp.symbols("a1 b0 b1")

    def residual(psi, a, b):
        rhs = w + z**2 * (1 + a) + z**3 * b
        return sp.Poly(sp.expand(w + psi**2 + psi**4 - sp.diff(psi, z) * rhs), z, w)

    # c0(w) = w is the gauge used by the fitter; a2 only enters above degree K
    resid = residual(psi, a1 * w, b0 + b1 * w)
    eqs = [c for (i, j), c in resid.terms() if i + 2 * j <= K]
    sol = sp.solve(eqs, list(coeffs.values()) + [a1, b0, b1], dict=True)
    assert len(sol) == 1
    sol = sol[0]

    nf = ss.fit_normal_form(ss.quartic_field(), order=K)
    assert float(sol[a1]) == -3.0
    assert nf.a_coeffs[1] == pytest.approx(-3.0, abs=1e-12)
    assert float(sol[b0]) == float(sol[b1]) == 0.0
    assert np.max(np.abs(nf.b_coeffs)) < 1e-12
    for key in ((3, 0), (1, 1), (0, 1), (4, 0)):
        assert nf.psi[key] == pytest.approx(float(sol[coeffs[key]]), abs=1e-12)

    # the fitted transformation solves the conjugacy through weighted degree K
    fitted = sum(sp.Float(nf.psi[i, j]) * z**i * w**j
                 for i in range(nf.psi.shape[0]) for j in range(nf.psi.shape[1]))
    a_fit = sum(sp.Float(c) * w**k for k, c in enumerate(nf.a_coeffs))
    b_fit = sum(sp.Float(c) * w**k for k, c in enumerate(nf.b_coeffs))
    low = [float(c) for (i, j), c in residual(fitted, a_fit, b_fit).terms() if i + 2 * j <= K]
    assert max(abs(c) for c in low) < 1e-12


def test_normal_form_of_exact_cubic_is_identity():
    nf = ss.fit_normal_form(ss.cubic_field())
    assert nf.b_coeffs[0] == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(nf.a_coeffs)) < 1e-12
    assert nf.delta_tilde_map(0.4, 1e-4) == pytest.approx(0.4, abs=1e-14)


def test_cubic_log_coefficient_is_linear_in_eps():
    est = ss.extract_log_coefficient(ss.cubic_field(), np.geomspace(1e-3, 1e-1, 9), 0.5)
    assert est.slope_at_zero == pytest.approx(1.0, abs=1e-3)
    for e, eta in est.eta_samples:
        assert eta / e == pytest.approx(1.0, abs=0.05)


def test_even_field_has_no_log_term():
    est = ss.extract_log_coefficient(ss.quartic_field(), np.geomspace(1e-3, 1e-1, 9), 0.5)
    assert est.max_abs_eta < 1e-3


def test_log_terms_cancel_over_the_full_passage():
    lc = ss.log_cancellation(ss.cubic_field(), np.geomspace(1e-4, 1e-2, 12), 0.5)
    assert lc.plus == pytest.approx(1.0, abs=1e-3)
    assert lc.minus == pytest.approx(-1.0, abs=1e-3)
    assert abs(lc.total) < 1e-4


def test_inversion_for_zero_field_matches_closed_form():
    L, delta = 400.0, 0.5
    res = ss.solve_epsilon_for_length(ss.zero_field(), L, delta)
    assert math.atan(delta / res.epsilon_star) / res.epsilon_star == pytest.approx(L, rel=1e-10)
    # eps* L -> pi/2, and d eps*/dL ~ -eps*/L
    assert res.epsilon_star * L == pytest.approx(math.pi / 2, rel=1e-2)
    assert res.derivative * L / res.epsilon_star == pytest.approx(-1.0, rel=2e-2)


def test_inverse_constant_fit():
    Ls = [100.0 * 2**k for k in range(5)]
    eps = [(math.pi / 2 + 0.3 / L) / L for L in Ls]
    c, _ = ss.fit_inverse_constant(Ls, eps)
    assert c == pytest.approx(math.pi / 2, abs=1e-12)


def test_asymptote_of_pure_quadratic_orbit():
    xs, ys = ss.asymptote_profile(ss.zero_field(), x0=1.0, y0=-0.5)
    assert np.max(np.abs(ys + 1.0 / (xs + 1.0))) < 1e-12
    assert ss.asymptote_check(ss.zero_field()) == pytest.approx(1.0, abs=0.11)


def test_fit_log_term_recovers_synthetic_coefficients():
    e = np.geomspace(1e-3, 1e-1, 10)
    v = 0.7 * e * np.log(e) - 0.2 * e + 3.0 * e**2
    eta1, coef, _ = ss.fit_log_term(e, v)
    assert eta1 == pytest.approx(0.7, abs=1e-9)
    assert coef[1] == pytest.approx(-0.2, abs=1e-9)


def test_error_paths():
    f = ss.zero_field()
    with pytest.raises(DomainError):
        ss.travel_time_direct(f, 1e-2, 5.0)
    with pytest.raises(NonMonotone):
        ss.travel_time_direct(ss.SaddleField.polynomial({(3, 0): -3.0}), 1e-3, 0.5)
    with pytest.raises(GridTooCoarse):
        ss.extract_log_coefficient(f, [1e-2, 2e-2], 0.5)
    with pytest.raises(NoBracket):
        ss.solve_epsilon_for_length(f, 1.0, 0.5)
    with pytest.raises(OrderTooLow):
        ss.fit_normal_form(f, order=3)
    with pytest.raises(ValueError):
        ss.SaddleField.polynomial({(1, 0): 1.0})
