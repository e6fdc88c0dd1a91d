"""The acceptance suite: ten numbered checks with fixed tolerances and time budgets.

Each check returns a :class:`~truncdefect.harness.ResultRecord` whose tables
are written as CSV.  Tolerances can be overridden per criterion through the
``tolerances`` parameter (``{"1": 0.0}`` forces criterion 1 to fail), and
``only`` restricts the run to a subset; the others are reported SKIPPED.
"""
from __future__ import annotations

import math
import tempfile
import time
import traceback
from pathlib import Path
from typing import Callable

import numpy as np

from . import defect_bvp, fourier, models, scalar_saddle as ss, wave_trains
from .errors import DefectError
from .harness import (
    SCHEMAS,
    Experiment,
    ExperimentConfig,
    ResultRecord,
    Table,
    _coerce,
    compute_family,
    initial_frequency,
    scaling_from_family,
    scaling_tables,
    write_summary,
    write_tables,
)

# Criterion number -> (name, claim, primary tolerance, runtime budget in seconds)
CRITERIA = {
    1: ("c01_arctan_oracle", "for g = 0 the outer half-leg time is arctan(delta/eps)/eps", 1e-10, 5.0),
    2: ("c02_quartic_limit", "eps*T_+(eps, delta) is continuous at eps = 0 with limit pi/2", 1e-4, 30.0),
    3: ("c03_log_term", "cubic g gives eta(eps) ~ eps; even g gives eta identically zero", 0.10, 60.0),
    4: ("c04_log_cancellation", "the log terms of the two half legs cancel in the full passage", 1e-3, 60.0),
    5: ("c05_partial_fraction", "closed-form partial-fraction time equals the integrated time", 1e-8, 60.0),
    6: ("c06_inversion", "L = T(eps*(L; delta); delta) has a solution with eps* L -> constant", 0.02, 30.0),
    7: ("c07_asymptote", "eps = 0 orbit: y + 1/x = O(1/x^2) for g = 0 and O(log x / x^2) for cubic g", 1.1, 30.0),
    8: ("c08_wave_trains", "lambda-omega oscillation, dispersion curvature, and hypothesis checks", 1e-8, 60.0),
    9: ("c09_defect_scaling", "truncated defects: Newton convergence, symmetry, uniqueness, scaling in L", 1e-8, 1800.0),
    10: ("c10_determinism", "identical seed and configuration give byte-identical CSV output", 0.0, None),
}


def _tol(ctx, n):
    return float(ctx["tolerances"].get(str(n), CRITERIA[n][2]))


def _record(n, passed, tables, measured, expected, tol, notes=()):
    name, claim, _, budget = CRITERIA[n]
    return ResultRecord(Experiment.ACCEPTANCE.value, name, {}, claim, tables, bool(passed), tol,
                        measured, expected, list(notes), criterion=n, budget_seconds=budget)


# ---------------------------------------------------------------------------


def criterion_1(ctx):
    tol = _tol(ctx, 1)
    field = ss.zero_field()
    rows = []
    for d in np.linspace(0.25, 1.0, 4):
        for e in np.geomspace(1e-4, 1e-1, 10):
            T = ss.travel_time_direct(field, e, d, ss.Leg.ZERO_TO_PLUS).T
            ref = math.atan(d / e) / e
            rows.append([e, d, T, ref, abs(T - ref) / ref])
    worst = max(r[-1] for r in rows)
    return _record(1, worst <= tol, {"main": Table(["epsilon", "delta", "T", "reference", "rel_err"], rows)},
                   {"max_rel_err": worst}, {"max_rel_err": f"<= {tol:g}"}, tol)


def criterion_2(ctx):
    tol = _tol(ctx, 2)
    field = ss.quartic_field()
    eps = np.geomspace(1e-3, 3e-2, 10)
    rows, limits = [], []
    for d in np.linspace(0.25, 1.0, 4):
        vals = np.array([e * ss.travel_time_direct(field, e, d).T for e in eps])
        c = np.polyfit(eps, vals, 3)
        limits.append((d, c[-1]))
        rows += [[e, d, v, np.polyval(c, e)] for e, v in zip(eps, vals)]
    worst = max(abs(v - math.pi / 2) for _, v in limits)
    tables = {"main": Table(["epsilon", "delta", "eps_T", "fit"], rows),
              "limits": Table(["delta", "extrapolated_limit", "pi_over_2"],
                              [[d, v, math.pi / 2] for d, v in limits])}
    return _record(2, worst <= tol, tables, {"max_abs_dev_from_pi_over_2": worst},
                   {"limit": math.pi / 2}, tol,
                   ["cubic polynomial in eps fitted on eps in [1e-3, 3e-2] at each delta"])


def criterion_3(ctx):
    tol = _tol(ctx, 3)
    grid = np.geomspace(1e-3, 1e-1, 9)
    cub = ss.extract_log_coefficient(ss.cubic_field(), grid, 0.5)
    qua = ss.extract_log_coefficient(ss.quartic_field(), grid, 0.5)
    at = dict(cub.eta_samples)
    ratio = at[min(at, key=lambda e: abs(e - 1e-2))] / 1e-2
    q_max = qua.max_abs_eta
    rows = [[e, eta, eta / e, dict(qua.eta_samples)[e]] for e, eta in cub.eta_samples]
    passed = abs(ratio - 1.0) <= tol and q_max <= 1e-3
    return _record(3, passed, {"main": Table(["epsilon", "eta_cubic", "eta_over_eps_cubic", "eta_quartic"], rows)},
                   {"eta_over_eps_at_1e-2": ratio, "max_abs_eta_quartic": q_max},
                   {"eta_over_eps_at_1e-2": 1.0, "max_abs_eta_quartic": "<= 0.001"}, tol)


def criterion_4(ctx):
    tol = _tol(ctx, 4)
    field = ss.cubic_field()
    eps = np.geomspace(1e-4, 1e-2, 12)
    lc = ss.log_cancellation(field, eps, 0.5)
    tp = np.array([e * ss.travel_time_direct(field, e, 0.5, ss.Leg.ZERO_TO_PLUS).T for e in eps])
    tm = np.array([e * ss.travel_time_direct(field, e, 0.5, ss.Leg.MINUS_TO_ZERO).T for e in eps])
    total = tp + tm - math.pi
    raw_slope = float(np.polyfit(np.log(eps), total, 1)[0])
    signature = abs(lc.plus - 1.0) <= 0.1 and abs(lc.minus + 1.0) <= 0.1
    passed = abs(lc.total) <= tol and signature
    rows = [[e, a - math.pi / 2, b - math.pi / 2, t] for e, a, b, t in zip(eps, tp, tm, total)]
    return _record(4, passed, {"main": Table(["epsilon", "eps_T_plus_minus_half_pi",
                                              "eps_T_minus_minus_half_pi", "eps_T_full_minus_pi"], rows)},
                   {"eps_log_eps_coeff_full": lc.total, "eps_log_eps_coeff_plus": lc.plus,
                    "eps_log_eps_coeff_minus": lc.minus, "raw_log_eps_slope_full": raw_slope},
                   {"eps_log_eps_coeff_full": f"|.| <= {tol:g}", "eps_log_eps_coeff_plus": 1.0,
                    "eps_log_eps_coeff_minus": -1.0}, tol,
                   ["the gate is the coefficient of eps*log(eps), separated from the smooth O(eps) part; "
                    "the raw slope against log eps is reported for reference"])


def criterion_5(ctx):
    tol = _tol(ctx, 5)
    rows = []
    for b in (0.0, 1.0):
        field = ss.cubic_field(b) if b else ss.zero_field()
        nf = ss.NormalForm.exact(b=(b,))
        for d in np.linspace(0.25, 1.0, 10):
            for e in np.geomspace(1e-4, 1e-1, 10):
                t1 = ss.travel_time_direct(field, e, d, estimate_error=False).T
                t2 = ss.travel_time_partial_fraction(nf, e, d).T
                rows.append([b, e, d, t1, t2, abs(t1 - t2) / t1])
    worst = max(r[-1] for r in rows)
    return _record(5, worst <= tol, {"main": Table(["b", "epsilon", "delta", "T_direct", "T_pf", "rel_diff"], rows)},
                   {"max_rel_diff": worst, "points_per_b": 100}, {"max_rel_diff": f"<= {tol:g}"}, tol)


def criterion_6(ctx):
    tol = _tol(ctx, 6)
    field = ss.zero_field()
    Ls = [100.0 * 2**k for k in range(7)]
    res = [ss.solve_epsilon_for_length(field, L, 0.5, ss.Leg.MINUS_TO_ZERO) for L in Ls]
    c, coef = ss.fit_inverse_constant(Ls, [r.epsilon_star for r in res])
    half_pi, printed = math.pi / 2, 2 / math.pi
    rows = []
    for r in res:
        fit = sum(coef[k] * r.L ** -k for k in range(len(coef)))
        rows.append([r.L, r.epsilon_star, r.epsilon_star * r.L, fit, r.derivative * r.L**2,
                     r.residual / r.L])
    max_res = max(r.residual / r.L for r in res)
    deriv = max(abs(r.derivative * r.L**2 / -c - 1.0) for r in res)
    dev_half_pi = abs(c - half_pi) / half_pi
    dev_printed = abs(c - printed) / printed
    flag = dev_printed > tol
    passed = max_res <= 1e-10 and dev_half_pi <= tol and deriv <= 0.05 and flag
    notes = []
    if flag:
        notes.append(f"printed constant 2/pi = {printed:.6f} is inconsistent with the measured "
                     f"{c:.6f}; the pure quadratic passage gives pi/2")
    return _record(6, passed, {"main": Table(["x", "epsilon_star", "y", "fit", "deps_dL_times_L2",
                                              "rel_residual"], rows)},
                   {"constant": c, "rel_dev_from_pi_over_2": dev_half_pi,
                    "rel_dev_from_printed_2_over_pi": dev_printed, "printed_value_flagged": flag,
                    "max_rel_residual": max_res, "max_derivative_mismatch": deriv},
                   {"constant": half_pi, "max_rel_residual": "<= 1e-10",
                    "max_derivative_mismatch": "<= 0.05"}, tol, notes)


def criterion_7(ctx):
    tol = _tol(ctx, 7)
    zero, cubic = ss.zero_field(), ss.cubic_field()
    s0 = ss.asymptote_check(zero, (10.0, 1000.0), weight="x2")
    log_1 = ss.asymptote_check(cubic, (10.0, 1000.0), weight="x2/logx")
    log_2 = ss.asymptote_check(cubic, (10.0, 2000.0), weight="x2/logx")
    sq_1 = ss.asymptote_check(cubic, (10.0, 1000.0), weight="x2")
    sq_2 = ss.asymptote_check(cubic, (10.0, 2000.0), weight="x2")
    stable = abs(log_2 / log_1 - 1.0) <= 0.05
    grows = sq_2 / sq_1 >= 1.05
    passed = s0 <= tol and stable and grows
    rows = [["zero", "x2", 1000.0, s0], ["cubic", "x2/logx", 1000.0, log_1],
            ["cubic", "x2/logx", 2000.0, log_2], ["cubic", "x2", 1000.0, sq_1],
            ["cubic", "x2", 2000.0, sq_2]]
    return _record(7, passed, {"main": Table(["field", "weight", "x_max", "weighted_sup"], rows)},
                   {"zero_x2_sup": s0, "cubic_x2logx_doubling_ratio": log_2 / log_1,
                    "cubic_x2_doubling_ratio": sq_2 / sq_1},
                   {"zero_x2_sup": f"<= {tol:g}", "cubic_x2logx_doubling_ratio": "within 5% of 1",
                    "cubic_x2_doubling_ratio": ">= 1.05"}, tol,
                   ["horizon doubled from 1000 to 2000; bounded means a change under 5%"])


def criterion_8(ctx):
    tol = _tol(ctx, 8)
    lo = models.lambda_omega(models.LambdaOmegaParams(1.0, 0.5))
    wt = wave_trains.find_wave_train(lo, wave_trains.circle_guess(), 32)
    disp = wave_trains.dispersion(lo, wt)
    hyp = wave_trains.check_hypotheses(lo, wt, disp, seed=ctx["seed"])
    lo0 = models.lambda_omega(models.LambdaOmegaParams(1.0, 0.0))
    wt0 = wave_trains.find_wave_train(lo0, wave_trains.circle_guess(), 32)
    hyp0 = wave_trains.check_hypotheses(lo0, wt0, seed=ctx["seed"])
    om_err = abs(wt.omega_d - 0.5)
    amp_err = float(np.max(np.abs(wt.amplitude - 1.0)))
    pp_err = abs(disp.omega_nl_pp0 - 1.0)
    passed = (om_err <= tol and amp_err <= tol and pp_err <= 1e-4 and hyp.zero_multiplicity == 2
              and hyp.fold_pass and not hyp0.fold_pass)
    rows = [["omega_nl", k, v, 0.0] for k, v in disp.omega_nl_samples]
    rows += [["lambda_lin", k, v.real, v.imag] for k, v in disp.lambda_lin_samples]
    return _record(8, passed, {"main": Table(["branch", "wavenumber", "re", "im"], rows)},
                   {"omega_d": wt.omega_d, "amplitude_err": amp_err, "omega_nl_pp0": disp.omega_nl_pp0,
                    "zero_multiplicity": hyp.zero_multiplicity, "spectral_gap": hyp.spectral_gap,
                    "fold_gamma_0.5": hyp.fold_pass, "fold_gamma_0": hyp0.fold_pass},
                   {"omega_d": 0.5, "amplitude_err": f"<= {tol:g}", "omega_nl_pp0": 1.0,
                    "zero_multiplicity": 2, "fold_gamma_0.5": True, "fold_gamma_0": False}, tol)


DEFECT_DEFAULTS = {
    "family": [80.0, 160.0, 320.0, 640.0],
    "reference_L": 1280.0,
    "second_guess_width": 1.5,
    "second_guess_shift": 1.0,
}


def _defect_params(ctx):
    """Defect parameters: the ScalingReport schema defaults plus ``ctx['defect']`` overrides."""
    extra = dict(ctx["defect"])
    own = {k: extra.pop(k, v) for k, v in DEFECT_DEFAULTS.items()}
    errors = []
    schema = SCHEMAS[Experiment.SCALING_REPORT]
    unknown = sorted(set(extra) - set(schema))
    if unknown:
        raise ValueError(f"unknown defect parameters {unknown}")
    p = {k: _coerce(k, prm, extra.get(k, prm.default), errors) for k, prm in schema.items()}
    if errors:
        raise ValueError("; ".join(errors))
    p["family"] = [float(x) for x in own["family"]]
    p["reference_L"] = float(own["reference_L"])
    return p, own


def criterion_9(ctx):
    tol = _tol(ctx, 9)
    p, own = _defect_params(ctx)
    log = []
    needed = sorted(set(p["family"]) | {p["reference_L"]})
    try:
        run = compute_family(p, log=log.append, schedule=needed)
    except DefectError as exc:
        rec = _record(9, False, {}, {}, {}, tol, ["no defect located; continuation log follows", *log, repr(exc)])
        rec.status, rec.passed = "SKIPPED", None
        return rec
    rep = scaling_from_family(run, p["family"], p["reference_L"], p["x_core"])

    # uniqueness: a second, different guess at the starting length
    g = run.start.grid
    U2 = defect_bvp.build_initial_guess(run.wt, g, width=own["second_guess_width"], profile="blend")
    U2 = fourier.shift(U2, own["second_guess_shift"], axis=1)
    om2 = initial_frequency(run.wt.omega_d, run.reduced, g.L, p["core_offset"])
    d2 = defect_bvp.newton_solve(run.system, g, U2, om2, tol=p["tol"],
                                 omega_d=run.wt.omega_d, orientation=run.reduced.orientation)
    alpha, mismatch = defect_bvp.check_uniqueness_mod_translation(run.start, d2)

    by_L = {round(d.L, 9): d for d in run.members}
    fam = [by_L[round(L, 9)] for L in p["family"]]
    residual = max(d.residual_norm for d in fam)
    orders = [d.observed_order() for d in fam]
    quad = all(o >= 1.5 for o in orders)
    rev = max(defect_bvp.check_reversibility(d, "Rpi") for d in fam)
    checks = {
        "residual": residual <= tol,
        "quadratic_tail": quad,
        "reversibility": rev <= 1e-6,
        "uniqueness": mismatch <= 1e-6,
        "epsilon_slope": abs(rep.fitted_exponent + 1.0) <= 0.05,
        "distance_slope": abs(rep.distance_exponent + 2.0) <= 0.15 * 2.0,
        "y_slope": abs(rep.y_exponent + 1.0) <= 0.15,
        "drift_positive": rep.phase_drift_fit[0] > 0,
    }
    tables = scaling_tables(rep)
    rows = []
    for d in run.members:
        rows.append([d.L, d.omega, d.epsilon_star, d.residual_norm, d.newton_iters, d.observed_order(),
                     defect_bvp.check_reversibility(d, "Rpi"), defect_bvp.check_reversibility(d, "R0")])
    tables["family"] = Table(["L", "omega", "epsilon_star", "residual", "newton_iters", "observed_order",
                              "reversibility_Rpi", "reversibility_R0"], rows)
    tables["uniqueness"] = Table(["L", "guess_shift", "alpha_hat", "mismatch", "omega_1", "omega_2"],
                                 [[g.L, own["second_guess_shift"], alpha, mismatch, run.start.omega, d2.omega]])
    measured = {
        "max_residual": residual, "min_observed_order": min(orders), "max_reversibility": rev,
        "uniqueness_mismatch": mismatch, "epsilon_star_exponent": rep.fitted_exponent,
        "normalized_constant": rep.normalized_constant, "distance_exponent": rep.distance_exponent,
        "y_exponent": rep.y_exponent, "phase_drift_log_slope": rep.phase_drift_fit[0],
        "kappa": run.reduced.kappa, "N_x": p["N_x"], "N_tau": p["N_tau"],
    }
    expected = {"max_residual": f"<= {tol:g}", "min_observed_order": ">= 1.5",
                "max_reversibility": "<= 1e-6", "uniqueness_mismatch": "<= 1e-6",
                "epsilon_star_exponent": "-1 +- 5%", "normalized_constant": math.pi / 2,
                "distance_exponent": "-2 +- 15%", "y_exponent": "-1 +- 15%",
                "phase_drift_log_slope": "> 0 (reduced flow: 1/kappa)"}
    failed = [k for k, v in checks.items() if not v]
    notes = list(run.log) + rep.notes + ([f"failed checks: {failed}"] if failed else [])
    return _record(9, not failed, tables, measured, expected, tol, notes)


def criterion_10(ctx):
    """Rerun criteria 1-9 in a scratch directory and compare every CSV byte for byte."""
    first = ctx.get("written")
    if not first:
        rec = _record(10, False, {}, {}, {}, 0.0, ["no CSV output from the first pass to compare"])
        rec.status, rec.passed = "SKIPPED", None
        return rec
    with tempfile.TemporaryDirectory() as tmp:
        sub = dict(ctx)
        sub["only"] = [n for n in ctx["selected"] if n != 10]
        sub["determinism"] = "skip"
        recs = _run_criteria(sub)
        second = {p.name: p.read_bytes() for p in write_tables(recs, tmp)}
    first_bytes = {p.name: p.read_bytes() for p in first}
    names = sorted(set(first_bytes) | set(second))
    rows = [[n, int(n in first_bytes), int(n in second),
             int(first_bytes.get(n) == second.get(n))] for n in names]
    same = all(r[-1] for r in rows)
    return _record(10, same, {"main": Table(["file", "in_first", "in_second", "identical"], rows)},
                   {"files_compared": len(names), "identical": sum(r[-1] for r in rows)},
                   {"identical": len(names)}, 0.0)


CHECKS: dict[int, Callable] = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
                               5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
                               9: criterion_9}


def _run_criteria(ctx, on_record=None) -> list[ResultRecord]:
    out = []
    for n in sorted(CHECKS):
        name, claim, _, budget = CRITERIA[n]
        if n not in ctx["only"]:
            rec = ResultRecord(Experiment.ACCEPTANCE.value, name, {}, claim, status="SKIPPED",
                               criterion=n, budget_seconds=budget, notes=["not selected"])
        else:
            start = time.perf_counter()
            try:
                rec = CHECKS[n](ctx)
            except Exception as exc:  # report the failing criterion, keep going
                rec = _record(n, False, {}, {"error": repr(exc)}, {}, _tol(ctx, n),
                              traceback.format_exc().splitlines()[-3:])
            rec.seconds = time.perf_counter() - start
            if budget is not None and rec.status == "PASS" and rec.seconds > budget:
                rec.status, rec.passed = "FAIL", False
                rec.notes.append(f"runtime {rec.seconds:.1f} s exceeds the {budget:g} s budget")
        out.append(rec)
        if on_record is not None:
            on_record(rec)
    return out


def run_acceptance(config: ExperimentConfig, jobs: int = 1, write: bool = True,
                   on_record: Callable | None = None) -> list[ResultRecord]:
    """Run the suite described by an ``Acceptance`` configuration.

    Criterion 10 reruns every other selected criterion and compares the CSV
    bytes, so it roughly doubles the running time; set
    ``parameters.determinism = "skip"`` to leave it out.
    """
    p = config.parameters
    only = [int(x) for x in p["only"]] or list(range(1, 11))
    ctx = {"seed": config.seed, "tolerances": dict(p["tolerances"]), "defect": dict(p["defect"]),
           "only": only, "selected": only, "determinism": p["determinism"], "jobs": jobs}
    records = _run_criteria(ctx, on_record)
    out_dir = Path(config.output_dir)
    written = write_tables(records, out_dir) if write else []
    ctx["written"] = written
    name, claim, _, _ = CRITERIA[10]
    if 10 in only and p["determinism"] == "full":
        start = time.perf_counter()
        rec = criterion_10(ctx)
        rec.seconds = time.perf_counter() - start
    else:
        rec = ResultRecord(Experiment.ACCEPTANCE.value, name, {}, claim, status="SKIPPED", criterion=10,
                           notes=["determinism rerun not requested"])
    records.append(rec)
    if on_record is not None:
        on_record(rec)
    if write:
        write_tables([rec], out_dir)
        write_summary(records, out_dir, config)
    return records
