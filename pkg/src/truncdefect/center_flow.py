"""Reduced flow on the two-dimensional center manifold.

The slow dynamics near the circle of equilibria reads

    alpha' = y,        y' = omega_star + y**2 + g(y, omega_star)

where ``alpha`` is the phase along the circle and ``y`` its rate.  The phase
is carried as a real-valued lift so that logarithmic drift can be measured;
it is reduced modulo ``2*pi`` only when samples are handed out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import Blowup, EventNotReached
from .scalar_saddle import DEFAULT_ATOL, DEFAULT_RTOL, SaddleField

TWO_PI = 2.0 * math.pi


@dataclass
class CenterTrajectory:
    """Solution of the reduced flow with dense output.

    ``x``, ``alpha`` (lifted) and ``y`` hold the integrator's accepted steps;
    ``sol`` evaluates ``(alpha, y)`` anywhere on the span.
    """

    x: np.ndarray
    alpha: np.ndarray
    y: np.ndarray
    omega_star: float
    field_ref: SaddleField
    sol: object = None
    x_events: tuple = ()

    @property
    def samples(self):
        """``(x, alpha mod 2*pi, y)`` triples."""
        return [(float(a), float(b % TWO_PI), float(c)) for a, b, c in zip(self.x, self.alpha, self.y)]

    def __call__(self, x):
        """Lifted ``(alpha, y)`` at ``x``."""
        return self.sol(x)

    def drift(self, a: float, b: float) -> float:
        """Lifted phase change ``alpha(b) - alpha(a)``."""
        return float(self.sol(b)[0] - self.sol(a)[0])


def _rhs(field, omega):
    def f(x, s):
        y = s[1]
        return [y, omega + y * y + field.g_eval(y, omega)]
    return f


def integrate_center(field: SaddleField, omega_star: float, start, span, stop_at_y=None,
                     rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> CenterTrajectory:
    """Integrate the reduced flow from ``start = (alpha, y)`` over ``span``.

    ``span`` may run backwards.  When ``stop_at_y`` is given the integration
    terminates at the first crossing of that level and the crossing abscissa is
    stored in ``x_events``.

    Raises
    ------
    Blowup
        If ``y`` leaves ``[-2 delta0, 2 delta0]``.
    """
    lim = 2 * field.delta0
    alpha0, y0 = float(start[0]), float(start[1])
    if abs(y0) > lim:
        raise Blowup(f"start y={y0} outside [-{lim}, {lim}]")

    def leave(x, s):
        return lim - abs(s[1])

    leave.terminal = True
    events = [leave]
    if stop_at_y is not None:
        def hit(x, s):
            return s[1] - stop_at_y
        hit.terminal = True
        events.append(hit)

    sol = integrate.solve_ivp(_rhs(field, omega_star), tuple(span), [alpha0, y0], method="DOP853",
                              rtol=rtol, atol=atol, events=events, dense_output=True)
    if sol.status == -1:
        raise Blowup(sol.message)
    if len(sol.t_events[0]):
        raise Blowup(f"y left the validity window at x={sol.t_events[0][0]:.6g}")
    hits = tuple(float(t) for t in sol.t_events[1]) if stop_at_y is not None else ()
    return CenterTrajectory(sol.t, sol.y[0], sol.y[1], omega_star, field, sol.sol, hits)


@dataclass
class PassageReport:
    L_of_eps: float
    alpha_drift: float
    eps: float
    trajectory: CenterTrajectory

    @property
    def scaled_length(self) -> float:
        return self.eps * self.L_of_eps


def passage_report(field: SaddleField, eps: float, delta0: float | None = None) -> PassageReport:
    """Anchored solution with ``y(0) = 0`` and ``y(-L) = -delta0``.

    Built by integrating backwards from ``(alpha, y) = (0, 0)``, so
    ``alpha_drift = alpha(0) - alpha(-L) = -alpha(-L)``.
    """
    delta0 = field.delta0 if delta0 is None else delta0
    if eps <= 0:
        raise EventNotReached("eps must be positive for a finite passage")
    omega = eps * eps
    ys = np.linspace(-delta0, 0.0, 201)
    fmin = float(np.min(field.rhs(ys, eps)))
    x_max = 2.0 * delta0 / fmin + 1.0
    traj = integrate_center(field, omega, (0.0, 0.0), (0.0, -x_max), stop_at_y=-delta0)
    if not traj.x_events:
        raise EventNotReached("backward integration never reached -delta0")
    L = -traj.x_events[0]
    return PassageReport(L, -float(traj(-L)[0]), eps, traj)


def alpha_drift_quadrature(field: SaddleField, eps: float, delta0: float) -> float:
    """``integral y dx = integral y / F(y) dy`` over ``[-delta0, 0]``."""
    val, _ = integrate.quad(lambda y: y / field.rhs(y, eps), -delta0, 0.0, epsabs=0.0, epsrel=1e-13,
                            limit=400)
    return val


def local_expansion_check(field: SaddleField, eps: float, delta0: float | None = None,
                          inner: float = 0.05, n: int = 400):
    """Normalised residuals of the two local expansions of the anchored solution.

    Returns ``(err_near_zero, err_near_boundary)``.  Near ``x = 0`` the residual
    of ``y = eps**2 x`` is divided by ``eps**4 x**2`` on ``inner < |x| < 1/3``
    (the inner cut keeps the ratio away from 0/0).  Near ``x = -L`` the
    residual of ``y = -delta0 + F(-delta0) x`` is divided by
    ``eps**2 |x| + delta0**3 x**2`` on ``0 < x < 1``.  For ``eps = 0`` only the
    boundary expansion exists and ``err_near_zero`` is NaN.
    """
    delta0 = field.delta0 if delta0 is None else delta0
    xs = np.linspace(0.0, 1.0, n + 1)[1:]
    slope = float(field.rhs(-delta0, eps))
    if eps == 0:
        traj = integrate_center(field, 0.0, (0.0, -delta0), (0.0, 1.0))
        y_b = traj(xs)[1]
        err_zero = float("nan")
    else:
        rep = passage_report(field, eps, delta0)
        L = rep.L_of_eps
        y_b = rep.trajectory(-L + xs)[1]
        fwd = integrate_center(field, eps * eps, (0.0, 0.0), (0.0, 1.0 / 3.0))
        xz = np.linspace(inner, 1.0 / 3.0, n)
        y_pos = fwd(xz)[1]
        y_neg = rep.trajectory(-xz)[1]
        w = eps**4 * xz**2
        err_zero = float(max(np.max(np.abs(y_pos - eps**2 * xz) / w),
                             np.max(np.abs(y_neg + eps**2 * xz) / w)))
    resid = np.abs(y_b - (-delta0 + slope * xs))
    err_bound = float(np.max(resid / (eps**2 * xs + delta0**3 * xs**2)))
    return err_zero, err_bound


@dataclass(frozen=True)
class LogFit:
    slope: float
    intercept: float
    residual: float


def phase_drift_log_check(field: SaddleField, x_range=(10.0, 1000.0), x0: float | None = None,
                          y0: float | None = None, n: int = 400) -> LogFit:
    """Fit the lifted phase of the ``eps = 0`` orbit against ``log x``.

    The orbit starts at ``y(x0) = y0``; by default ``y0 = -delta0`` and
    ``x0 = 1/delta0``, which is the point where the pure quadratic orbit
    ``-1/x`` has that value.  ``residual`` is the root-mean-square deviation
    from the fitted line on a geometric grid.
    """
    y0 = -field.delta0 if y0 is None else y0
    x0 = -1.0 / y0 if x0 is None else x0
    traj = integrate_center(field, 0.0, (0.0, y0), (x0, x_range[1]))
    xs = np.geomspace(x_range[0], x_range[1], n)
    alpha = traj(xs)[0]
    X = np.column_stack([np.log(xs), np.ones_like(xs)])
    coef, *_ = np.linalg.lstsq(X, alpha, rcond=None)
    resid = float(np.sqrt(np.mean((X @ coef - alpha) ** 2)))
    return LogFit(float(coef[0]), float(coef[1]), resid)


def reverser_defect(field: SaddleField, omega: float, start, h: float) -> float:
    """Check the reversibility ``(alpha, y)(x) -> (alpha, -y)(-x)``.

    Integrates ``start`` forward by ``h`` and reflects, then reflects
    ``start`` and integrates backward by ``h``; returns the distance between
    the two end points.  Vanishes to integrator tolerance when ``g`` is even
    in ``y``.
    """
    a0, y0 = float(start[0]), float(start[1])
    fwd = integrate_center(field, omega, (a0, y0), (0.0, h))
    a1, y1 = fwd(h)
    bwd = integrate_center(field, omega, (a0, -y0), (0.0, -h))
    a2, y2 = bwd(-h)
    return float(math.hypot(a1 - a2, -y1 - y2))
