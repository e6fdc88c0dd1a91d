"""Truncated contact defects in a quintic Ginzburg-Landau model.

Run with ``python3 demos/defect_family.py`` (about 20 seconds).  Steps:

1. find the homogeneous oscillation and its dispersion curvatures;
2. solve for the defect on [-20, 20] from a blend of two half-period
   shifted oscillations;
3. continue in L and watch omega - omega_d shrink like 1/L^2.
"""
import math

from truncdefect import defect_bvp as db
from truncdefect import models, wave_trains
from truncdefect.harness import initial_frequency

system = models.default_defect_model()
wt = wave_trains.find_wave_train(system, wave_trains.circle_guess(), 16)
disp = wave_trains.dispersion(system, wt)
rc = wave_trains.reduced_coefficients(disp)
print(f"omega_d = {wt.omega_d:.12f}")
print(f"omega_nl''(0) = {disp.omega_nl_pp0:.5f}, lambda_lin''(0) = {disp.lambda_lin_pp0:.5f}, "
      f"kappa = {rc.kappa:.5f}")

grid = db.SpaceTimeGrid(20.0, 512, 16, 0.078)
guess = db.build_initial_guess(wt, grid, width=2.0, profile="blend")
start = db.newton_solve(system, grid, guess, initial_frequency(wt.omega_d, rc, 20.0, 6.0),
                        omega_d=wt.omega_d, orientation=rc.orientation)
print(f"L = 20: {start.newton_iters} Newton steps, residuals "
      + " ".join(f"{r:.1e}" for r in start.history[-4:]))
print(f"time-shift symmetry defect {db.check_reversibility(start, 'Rpi'):.1e}")

family = [start] + db.continue_in_L(system, start, [40.0, 80.0, 160.0, 320.0])
print("L      omega - omega_d     eps*      eps* (L+6) sqrt(scale)")
for d in family:
    eps = d.epsilon_star
    print(f"{d.L:<6g} {d.omega - wt.omega_d:<19.6e} {eps:<9.6f} "
          f"{eps * (d.L + 6.0) * math.sqrt(rc.eps_sq_scale):.5f}")
print(f"pi/2 = {math.pi / 2:.5f}")
