"""The slow phase flow alpha' = y, y' = omega + y^2 + g(y, omega).

Run with ``python3 demos/center_flow.py``.  The anchored trajectory starts at
y = -delta0 and reaches y = 0 after a length L(eps); along the way the phase
alpha drifts by about log(eps).  At eps = 0 the orbit never arrives and the
phase keeps drifting like -log x.
"""
import math

from truncdefect import center_flow as cf
from truncdefect import scalar_saddle as ss

field = ss.cubic_field()
print("eps       L(eps)         eps*L        alpha drift    drift/log(eps)")
for eps in (1e-1, 3e-2, 1e-2, 3e-3, 1e-3):
    rep = cf.passage_report(field, eps)
    print(f"{eps:<9g} {rep.L_of_eps:<14.6f} {rep.scaled_length:<12.8f} {rep.alpha_drift:<14.8f} "
          f"{rep.alpha_drift / math.log(eps):.6f}")

for name, f in (("g = 0", ss.zero_field()), ("g = y^3", field), ("g = y^4", ss.quartic_field())):
    fit = cf.phase_drift_log_check(f)
    print(f"eps = 0, {name}: alpha ~ {fit.slope:+.4f} log x {fit.intercept:+.4f} (rms {fit.residual:.1e})")

# reversibility (alpha, y)(x) -> (alpha, -y)(-x) needs g even in y
print(f"reverser defect, even g: {cf.reverser_defect(ss.quartic_field(), 1e-3, (0.0, 0.2), 1.0):.1e}")
print(f"reverser defect, cubic g: {cf.reverser_defect(field, 1e-3, (0.0, 0.2), 1.0):.1e}")
