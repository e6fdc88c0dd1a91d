"""Truncated defects: grid, Newton solve, symmetry, uniqueness and continuation."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from truncdefect import defect_bvp as db
from truncdefect import fourier
from truncdefect.errors import FitAmbiguous, InsufficientFamily, ShapeMismatch
from truncdefect.harness import load_solution, save_solution


@given(L=st.floats(20.0, 3000.0), N_x=st.sampled_from([256, 512, 1024]))
def test_grid_is_monotone_and_spans_domain(L, N_x):
    g = db.SpaceTimeGrid(L, N_x, 16, 0.078 if N_x * 0.078 / 2 < L else None)
    assert g.x_nodes[0] == -L and g.x_nodes[-1] == L
    assert np.all(np.diff(g.x_nodes) > 0)
    assert np.allclose(g.x_nodes, -g.x_nodes[::-1], atol=1e-12 * L)


def test_core_nodes_do_not_depend_on_length():
    a = db.SpaceTimeGrid(40.0, 512, 16, 0.078)
    b = a.resized(1280.0)
    assert a.same_core(b)
    # drift of the core is about B (w/2) exp(-2 (s_c - |s|) / w)
    core = np.abs(a.x_nodes) < 2.0
    assert np.max(np.abs(a.x_nodes[core] - b.x_nodes[core])) < 1e-4
    assert np.allclose(np.diff(b.x_nodes[core]), 0.078, rtol=1e-4)


@pytest.mark.parametrize("L", [20.0, 200.0])
def test_mapped_derivatives_are_fourth_order(L):
    errs = []
    for n in (256, 512):
        g = db.SpaceTimeGrid(L, n, 8, 0.078)
        x = g.x_nodes
        u = np.exp(-x * x / 16.0)
        d1 = -x / 8.0 * u
        d2 = (x * x / 64.0 - 1.0 / 8.0) * u
        inner = np.abs(x) < L / 2
        errs.append((np.max(np.abs(g.Dx @ u - d1)[inner]), np.max(np.abs(g.Dxx @ u - d2)[inner])))
    assert errs[1][0] < 1e-5 and errs[1][1] < 1e-5


def test_blend_guess_is_rpi_symmetric(cgl, short_defect):
    _, wt, _ = cgl
    g = short_defect.grid
    U = db.build_initial_guess(wt, g, width=2.0, profile="blend")
    trial = db.TruncatedDefect(g, U, wt.omega_d, 0.0, 0)
    assert db.check_reversibility(trial, "Rpi") < 1e-12


def test_newton_converges_quadratically(short_defect):
    d = short_defect
    assert d.residual_norm <= 1e-10
    assert d.observed_order() >= 1.5
    assert d.bc_residual == 0.0


def test_defect_symmetry(short_defect):
    assert db.check_reversibility(short_defect, "Rpi") < 1e-8
    # the defect is not R0 symmetric: the two far fields differ by half a period
    assert db.check_reversibility(short_defect, "R0") > 1.0


def test_frequency_sits_above_the_oscillation(cgl, short_defect):
    system, wt, rc = cgl
    eps = short_defect.epsilon_star
    assert short_defect.omega > wt.omega_d
    # passage law with the core offset: eps* (L + 6) sqrt(scale) close to pi/2
    assert eps * (short_defect.L + 6.0) * math.sqrt(rc.eps_sq_scale) == pytest.approx(math.pi / 2, rel=0.05)


def test_far_fields_differ_by_half_period(cgl, short_defect):
    _, wt, _ = cgl
    right = db.extract_phase_coordinates(short_defect, wt, x_min=10.0)
    left = db.extract_phase_coordinates(short_defect, wt, x_min=-20.0, x_max=-10.0)
    jump = (right.alpha_L[0] - left.alpha_L[-1]) % (2 * np.pi)
    assert min(abs(jump - np.pi), abs(jump + np.pi - 2 * np.pi)) < 0.5
    assert np.all(right.fit_residuals < 0.05)


def test_phase_fit_is_ambiguous_at_the_node(cgl, short_defect):
    _, wt, _ = cgl
    with pytest.raises(FitAmbiguous):
        db.extract_phase_coordinates(short_defect, wt, x_min=-0.1, x_max=0.1)


@given(alpha=st.floats(0.1, 2 * np.pi - 0.1))
def test_uniqueness_check_recovers_time_shift(short_defect, alpha):
    shifted = db.TruncatedDefect(short_defect.grid, fourier.shift(short_defect.U, alpha, axis=1),
                                 short_defect.omega, 0.0, 0)
    a_hat, mismatch = db.check_uniqueness_mod_translation(shifted, short_defect)
    # the shift is located by a scalar minimiser, accurate to about sqrt(machine eps)
    assert mismatch < 1e-7
    assert math.cos(a_hat + alpha) == pytest.approx(1.0, abs=1e-12)


def test_second_guess_converges_to_same_defect(cgl, short_defect):
    system, wt, rc = cgl
    g = short_defect.grid
    U0 = fourier.shift(db.build_initial_guess(wt, g, width=1.5, profile="blend"), 1.0, axis=1)
    d2 = db.newton_solve(system, g, U0, short_defect.omega * (1 + 1e-4), tol=1e-10,
                         omega_d=wt.omega_d, orientation=rc.orientation)
    a_hat, mismatch = db.check_uniqueness_mod_translation(short_defect, d2)
    assert mismatch < 1e-6
    assert d2.omega == pytest.approx(short_defect.omega, abs=1e-10)


def test_continuation_one_doubling(cgl, short_defect):
    system, wt, _ = cgl
    seen = []
    (d40,) = db.continue_in_L(system, short_defect, [40.0], callback=seen.append)
    assert d40.L == 40.0 and len(seen) == 1
    assert d40.residual_norm <= 1e-10
    assert wt.omega_d < d40.omega < short_defect.omega
    assert db.check_reversibility(d40, "Rpi") < 1e-8
    # node-by-node transfer back to the short grid keeps the core untouched
    U = db.regrid(d40, short_defect.grid, mode="index")
    assert np.array_equal(U, d40.U)


def test_regrid_modes(short_defect):
    g_new = db.SpaceTimeGrid(30.0, 400, 16)
    U = db.regrid(short_defect, g_new, mode="stretch")
    assert U.shape == (400, 16, 2)
    with pytest.raises(ShapeMismatch):
        db.regrid(short_defect, g_new, mode="index")
    with pytest.raises(ShapeMismatch):
        db.regrid(short_defect, db.SpaceTimeGrid(30.0, 400, 8))


def test_solution_file_roundtrip_is_bit_exact(tmp_path, short_defect):
    save_solution(short_defect, tmp_path / "d20", {"name": "cgl_quintic"})
    back = load_solution(tmp_path / "d20.json")
    assert back.U.tobytes() == short_defect.U.tobytes()
    assert back.omega == short_defect.omega
    assert np.array_equal(back.grid.x_nodes, short_defect.grid.x_nodes)


def test_newton_rejects_bad_shape(cgl, short_defect):
    system, wt, _ = cgl
    with pytest.raises(ShapeMismatch):
        db.newton_solve(system, short_defect.grid, np.zeros((3, 3, 2)), 1.0)


def test_scaling_needs_four_members(cgl, short_defect):
    _, wt, _ = cgl
    with pytest.raises(InsufficientFamily):
        db.verify_scaling_laws([short_defect] * 3, wt)
