"""Passage through a saddle-node ghost, one leg at a time.

Run with ``python3 demos/passage_time.py``.  The script walks through the
scalar problem y' = eps^2 + y^2 + g(y, eps^2):

1. for g = 0 the half-leg time is arctan(delta/eps)/eps, so eps*T -> pi/2;
2. a cubic term in g adds eps*log(eps) to each half leg, with opposite
   signs on the two sides of the ghost, so the full passage has no log;
3. inverting L = T(eps) gives eps* L -> pi/2 for long passages.
"""
import math

import numpy as np

from truncdefect import scalar_saddle as ss
from truncdefect.scalar_saddle import Leg

zero, cubic = ss.zero_field(), ss.cubic_field()

print("eps        T_+ (ODE)            arctan(d/eps)/eps    eps*T_+")
for eps in (1e-1, 1e-2, 1e-3, 1e-4):
    T = ss.travel_time_direct(zero, eps, 0.5).T
    print(f"{eps:<10.0e} {T:<20.12f} {math.atan(0.5 / eps) / eps:<20.12f} {eps * T:.10f}")

# the closed form from the cubic normal form agrees with direct integration
nf = ss.fit_normal_form(cubic)
for eps in (1e-2, 1e-3):
    direct = ss.travel_time_direct(cubic, eps, 0.5).T
    closed = ss.travel_time_partial_fraction(nf, eps, 0.5).T
    print(f"cubic g, eps={eps:g}: direct {direct:.12f}  partial fractions {closed:.12f}")

# log terms: each half leg carries +-eps log eps, the full passage none
grid = np.geomspace(1e-4, 1e-2, 12)
lc = ss.log_cancellation(cubic, grid, 0.5)
print(f"coefficient of eps*log(eps): plus leg {lc.plus:+.5f}, minus leg {lc.minus:+.5f}, "
      f"sum {lc.total:+.2e}")
even = ss.extract_log_coefficient(ss.quartic_field(), np.geomspace(1e-3, 1e-1, 9), 0.5)
print(f"even g: largest |eta| on the grid {even.max_abs_eta:.2e}")

# long passages select small eps
print("L        eps*           eps* L")
for L in (100.0, 400.0, 1600.0, 6400.0):
    r = ss.solve_epsilon_for_length(zero, L, 0.5, Leg.MINUS_TO_ZERO)
    print(f"{L:<8g} {r.epsilon_star:<14.8e} {r.epsilon_star * L:.6f}")
print(f"pi/2 = {math.pi / 2:.6f}")
