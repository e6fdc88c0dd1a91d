"""Passage times through a non-degenerate saddle-node.

Everything here concerns the scalar field

    y' = eps**2 + y**2 + g(y, eps**2)

in the regime without equilibria (eps > 0): direct integration with event
location, the cubic normal form and its partial-fraction travel time,
extraction of the ``eta(eps) * log(eps)`` term, and inversion of the
passage time to find the parameter that produces a prescribed length.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import (
    DomainError,
    EventNotReached,
    GridTooCoarse,
    NoBracket,
    NonMonotone,
    OrderTooLow,
    RootIsolationFailure,
)

# Coefficients of g that must vanish for the fold to be non-degenerate,
# keyed by (power of y, power of omega).
_FORBIDDEN = ((0, 0), (1, 0), (2, 0), (0, 1), (1, 1))

DEFAULT_RTOL = 1e-12
DEFAULT_ATOL = 1e-15


class Leg(str, enum.Enum):
    MINUS_TO_ZERO = "MinusToZero"
    ZERO_TO_PLUS = "ZeroToPlus"
    FULL = "Full"


class Method(str, enum.Enum):
    DIRECT_ODE = "DirectODE"
    PARTIAL_FRACTION = "PartialFraction"


@dataclass(frozen=True)
class SaddleField:
    """Higher-order part ``g`` of the unfolded saddle-node.

    Parameters
    ----------
    g_eval : callable
        ``g_eval(y, omega)``, vectorised over numpy arrays.
    g_taylor : mapping
        Taylor coefficients ``{(i, j): c}`` of ``g`` at the origin, meaning
        ``c * y**i * omega**j``.  Absent entries up to ``taylor_order``
        (total degree) are zero.
    smoothness_order : int
        Differentiability class ``r`` of ``g``; must be at least 4.
    is_even_in_y : bool
        Declares ``g(-y, omega) == g(y, omega)``; verified on samples.
    taylor_order : int
        Total degree to which ``g_taylor`` is complete.
    delta0, eps0 : float
        Validity scales: legs use ``delta in [delta0/2, 2*delta0]`` and
        ``0 < eps <= eps0``.
    """

    g_eval: Callable
    g_taylor: Mapping[tuple[int, int], float] = dc_field(default_factory=dict)
    smoothness_order: int = 5
    is_even_in_y: bool = False
    taylor_order: int = 5
    delta0: float = 0.5
    eps0: float = 0.1
    name: str = "g"

    def __post_init__(self):
        if self.smoothness_order < 4:
            raise ValueError("smoothness_order must be >= 4")
        if self.taylor_order < 5:
            raise ValueError("g_taylor must be complete to total order >= 5")
        for key in _FORBIDDEN:
            if abs(self.g_taylor.get(key, 0.0)) > 1e-12:
                raise ValueError(f"g_taylor{key} must vanish at a non-degenerate fold")
        if self.is_even_in_y:
            rng = np.random.default_rng(7)
            y = rng.uniform(-2 * self.delta0, 2 * self.delta0, 32)
            w = rng.uniform(0.0, self.eps0**2, 32)
            lhs = np.asarray(self.g_eval(y, w), dtype=float)
            rhs = np.asarray(self.g_eval(-y, w), dtype=float)
            if not np.allclose(lhs, rhs, rtol=1e-12, atol=1e-14):
                raise ValueError("field declared even in y but g(-y) != g(y)")

    @classmethod
    def polynomial(cls, coeffs: Mapping[tuple[int, int], float] | None = None, **kwargs):
        """Field whose ``g`` is the polynomial ``sum c * y**i * omega**j``."""
        coeffs = {k: float(v) for k, v in (coeffs or {}).items() if v != 0.0}
        items = tuple(coeffs.items())

        def g_eval(y, omega):
            y = np.asarray(y, dtype=float)
            omega = np.asarray(omega, dtype=float)
            out = np.zeros(np.broadcast(y, omega).shape)
            for (i, j), c in items:
                out = out + c * y**i * omega**j
            return out if out.ndim else float(out)

        order = max([i + j for i, j in coeffs] + [5])
        even = all(i % 2 == 0 for i, _ in coeffs)
        kwargs.setdefault("is_even_in_y", even)
        kwargs.setdefault("smoothness_order", 10**6)
        kwargs.setdefault("name", _poly_name(coeffs))
        return cls(g_eval=g_eval, g_taylor=coeffs, taylor_order=order, **kwargs)

    def rhs(self, y, eps):
        """Right-hand side ``eps**2 + y**2 + g(y, eps**2)``."""
        w = eps * eps
        return w + y * y + self.g_eval(y, w)

    def g_y(self, y, omega, h=1e-6):
        """Derivative of ``g`` in ``y`` by a fourth-order central difference."""
        ge = self.g_eval
        return (8 * (ge(y + h, omega) - ge(y - h, omega))
                - (ge(y + 2 * h, omega) - ge(y - 2 * h, omega))) / (12 * h)

    @property
    def g_yyy0(self) -> float:
        """``g_yyy(0, 0)`` read from the Taylor table."""
        return 6.0 * self.g_taylor.get((3, 0), 0.0)


def _poly_name(coeffs):
    if not coeffs:
        return "0"
    terms = []
    for (i, j), c in sorted(coeffs.items()):
        mono = "*".join(p for p in (f"y^{i}" if i else "", f"w^{j}" if j else "") if p)
        terms.append(f"{c:g}*{mono}" if c != 1 else mono)
    return " + ".join(terms)


def zero_field(**kwargs) -> SaddleField:
    return SaddleField.polynomial({}, **kwargs)


def cubic_field(c: float = 1.0, **kwargs) -> SaddleField:
    return SaddleField.polynomial({(3, 0): c}, **kwargs)


def quartic_field(c: float = 1.0, **kwargs) -> SaddleField:
    return SaddleField.polynomial({(4, 0): c}, **kwargs)


@dataclass(frozen=True)
class TravelTimeResult:
    T: float
    epsilon: float
    delta: float
    leg: Leg
    method: Method
    err_estimate: float

    @property
    def scaled(self) -> float:
        """``eps * T``."""
        return self.epsilon * self.T


# ---------------------------------------------------------------------------
# direct integration


def integrate_to_event(field: SaddleField, epsilon: float, y0: float, y_target: float,
                       x_max: float, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL):
    """Integrate ``y' = F(y)`` from ``y(0) = y0`` until ``y = y_target``.

    Returns ``(x_hit, solution)`` where ``solution`` is the scipy result with
    dense output.  Uses DOP853; the crossing is located by root-finding on the
    dense interpolant.
    """
    lim = 2 * field.delta0
    if abs(y0) > lim * (1 + 1e-12) or abs(y_target) > lim * (1 + 1e-12):
        raise DomainError(f"|y0|, |y_target| must be <= {lim}")
    if x_max <= 0:
        raise ValueError("x_max must be positive")
    if y_target == y0:
        return 0.0, None

    direction = 1.0 if y_target > y0 else -1.0

    def event(x, y):
        return y[0] - y_target

    event.terminal = True
    event.direction = direction

    sol = integrate.solve_ivp(lambda x, y: field.rhs(y, epsilon), (0.0, x_max), [y0],
                              method="DOP853", rtol=rtol, atol=atol, events=event,
                              dense_output=True)
    if sol.status == -1:
        raise EventNotReached(f"integration failed: {sol.message}")
    hits = sol.t_events[0]
    if len(hits) == 0:
        raise EventNotReached(f"y never reached {y_target} before x = {x_max}")
    return float(hits[0]), sol


def _leg_bounds(leg: Leg, delta: float):
    leg = Leg(leg)
    if leg is Leg.MINUS_TO_ZERO:
        return -delta, 0.0
    if leg is Leg.ZERO_TO_PLUS:
        return 0.0, delta
    return -delta, delta


def _check_leg(field: SaddleField, epsilon: float, delta: float, leg: Leg):
    d0 = field.delta0
    if not (d0 / 2 * (1 - 1e-12) <= delta <= 2 * d0 * (1 + 1e-12)):
        raise DomainError(f"delta={delta} outside [{d0 / 2}, {2 * d0}]")
    if epsilon > field.eps0 * (1 + 1e-12):
        raise DomainError(f"epsilon={epsilon} exceeds eps0={field.eps0}")
    lo, hi = _leg_bounds(leg, delta)
    ys = np.linspace(lo, hi, 401)
    fmin = float(np.min(field.rhs(ys, epsilon)))
    if epsilon <= 0 or fmin <= 0:
        raise NonMonotone("field vanishes on the leg; no finite travel time")
    return lo, hi, fmin


def travel_time_direct(field: SaddleField, epsilon: float, delta: float,
                       leg: Leg = Leg.ZERO_TO_PLUS, estimate_error: bool = True,
                       rtol: float = DEFAULT_RTOL) -> TravelTimeResult:
    """Travel time of the leg by direct ODE integration."""
    leg = Leg(leg)
    lo, hi, fmin = _check_leg(field, epsilon, delta, leg)
    x_max = 2.0 * (hi - lo) / fmin + 1.0
    T, _ = integrate_to_event(field, epsilon, lo, hi, x_max, rtol=rtol)
    err = 0.0
    if estimate_error:
        T_coarse, _ = integrate_to_event(field, epsilon, lo, hi, x_max, rtol=rtol * 100)
        err = abs(T - T_coarse)
    return TravelTimeResult(T, epsilon, delta, leg, Method.DIRECT_ODE, err)


def travel_time_quadrature(field: SaddleField, epsilon: float, delta: float,
                           leg: Leg = Leg.ZERO_TO_PLUS) -> float:
    """``integral dy / F(y)`` over the leg by adaptive Gauss-Kronrod."""
    lo, hi = _leg_bounds(leg, delta)
    pts = [0.0] if lo < 0 < hi else None
    val, _ = integrate.quad(lambda y: 1.0 / field.rhs(y, epsilon), lo, hi,
                            epsabs=0.0, epsrel=1e-13, limit=500, points=pts)
    return val


# ---------------------------------------------------------------------------
# normal form


def _pmul(p, q, nz, nw):
    out = np.zeros((nz + 1, nw + 1))
    for i in range(p.shape[0]):
        pi = p[i]
        if not pi.any():
            continue
        for j in range(min(q.shape[0], nz + 1 - i)):
            out[i + j] += np.convolve(pi, q[j])[: nw + 1]
    return out


def _poly_from_table(table, nz, nw):
    G = np.zeros((nz + 1, nw + 1))
    for (i, j), c in table.items():
        if i <= nz and j <= nw:
            G[i, j] = c
    return G


def _compose(G, Psi, nz, nw):
    """Coefficients of ``sum G[i, j] * Psi**i * omega**j``."""
    out = np.zeros((nz + 1, nw + 1))
    power = np.zeros((nz + 1, nw + 1))
    power[0, 0] = 1.0
    for i in range(G.shape[0]):
        if i > 0:
            power = _pmul(power, Psi, nz, nw)
        for j in range(G.shape[1]):
            if G[i, j] != 0.0:
                out[:, j:] += G[i, j] * power[:, : nw + 1 - j]
    return out


def _polyval1(coeffs, w):
    return sum(c * w**k for k, c in enumerate(coeffs))


@dataclass
class NormalForm:
    """Cubic normal form ``z' = c0(w) + z**2 (1 + a(w)) + z**3 b(w)``.

    ``y = Psi(z; w)`` with ``Psi[i, j]`` the coefficient of ``z**i w**j``
    and ``Psi'(0; w) = 1``.  ``c0(w) = w + O(w**2)`` absorbs the
    reparametrisation of the unfolding parameter.
    """

    a_coeffs: np.ndarray
    b_coeffs: np.ndarray
    psi: np.ndarray
    c0_coeffs: np.ndarray = dc_field(default_factory=lambda: np.array([0.0, 1.0]))
    order: int = 5
    residual: float = 0.0

    @classmethod
    def exact(cls, a=(0.0,), b=(0.0,)):
        """A field already in normal form, with identity transformation."""
        psi = np.zeros((2, 1))
        psi[1, 0] = 1.0
        return cls(np.asarray(a, float), np.asarray(b, float), psi)

    def a(self, w):
        return _polyval1(self.a_coeffs, w)

    def b(self, w):
        return _polyval1(self.b_coeffs, w)

    def c0(self, w):
        return _polyval1(self.c0_coeffs, w)

    def rhs(self, z, w):
        return self.c0(w) + z * z * (1 + self.a(w)) + z**3 * self.b(w)

    def psi_eval(self, z, w):
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for i in range(self.psi.shape[0]):
            out = out + _polyval1(self.psi[i], w) * z**i
        return out

    def psi_dz(self, z, w):
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for i in range(1, self.psi.shape[0]):
            out = out + i * _polyval1(self.psi[i], w) * z ** (i - 1)
        return out

    def delta_tilde_map(self, delta, w):
        """Solve ``Psi(delta_tilde, w) = delta`` by Newton from ``delta``."""
        z = float(delta)
        for _ in range(50):
            step = (float(self.psi_eval(z, w)) - delta) / float(self.psi_dz(z, w))
            z -= step
            if abs(step) <= 1e-15 * max(1.0, abs(z)):
                break
        return z


def fit_normal_form(field: SaddleField, order: int = 5) -> NormalForm:
    """Formal cubic normal form of ``field`` up to weighted degree ``order``.

    ``z`` has weight 1 and ``w`` weight 2.  The quadratic coefficient of
    ``Psi`` is fixed to zero, which makes the order-by-order system square.
    """
    if order < 4 or field.taylor_order < order:
        raise OrderTooLow(f"need 4 <= order <= taylor order ({field.taylor_order})")
    K = order
    nz, nw = K, K // 2
    G = _poly_from_table(field.g_taylor, nz, nw)
    # F(y, w) = w + y**2 + g
    F = G.copy()
    F[0, 1] += 1.0
    F[2, 0] += 1.0

    slots = []  # (kind, i, j)
    slots += [("psi", 0, j) for j in range(1, nw + 1) if 2 * j <= K - 1]
    slots += [("psi", i, j) for i in range(3, K) for j in range(nw + 1) if i + 2 * j <= K - 1]
    slots += [("c0", 0, j) for j in range(2, nw + 1) if 2 * j <= K]
    slots += [("a", 0, j) for j in range(1, nw + 1) if 2 + 2 * j <= K]
    slots += [("b", 0, j) for j in range(nw + 1) if 3 + 2 * j <= K]
    eqs = [(i, j) for i in range(K + 1) for j in range(nw + 1) if 2 <= i + 2 * j <= K]

    def unpack(x):
        Psi = np.zeros((nz + 1, nw + 1))
        Psi[1, 0] = 1.0
        a = np.zeros(nw + 1)
        b = np.zeros(nw + 1)
        c0 = np.zeros(nw + 1)
        c0[1] = 1.0
        for val, (kind, i, j) in zip(x, slots):
            if kind == "psi":
                Psi[i, j] = val
            elif kind == "a":
                a[j] = val
            elif kind == "b":
                b[j] = val
            else:
                c0[j] = val
        return Psi, a, b, c0

    def residual(x):
        Psi, a, b, c0 = unpack(x)
        N = np.zeros((nz + 1, nw + 1))
        N[0] = c0
        N[2] = a
        N[2, 0] += 1.0
        N[3] = b
        dPsi = np.zeros_like(Psi)
        dPsi[:-1] = Psi[1:] * np.arange(1, nz + 1)[:, None]
        E = _compose(F, Psi, nz, nw) - _pmul(dPsi, N, nz, nw)
        return np.array([E[i, j] for i, j in eqs])

    x = np.zeros(len(slots))
    for _ in range(30):
        r = residual(x)
        if np.max(np.abs(r), initial=0.0) < 1e-14:
            break
        J = np.empty((len(eqs), len(slots)))
        h = 1e-6
        for k in range(len(slots)):
            e = np.zeros_like(x)
            e[k] = h
            J[:, k] = (residual(x + e) - residual(x - e)) / (2 * h)
        dx = np.linalg.lstsq(J, -r, rcond=None)[0]
        x = x + dx
        if np.max(np.abs(dx), initial=0.0) < 1e-15:
            break
    res = float(np.max(np.abs(residual(x)), initial=0.0))
    Psi, a, b, c0 = unpack(x)
    return NormalForm(a_coeffs=a, b_coeffs=b, psi=Psi, c0_coeffs=c0, order=K, residual=res)


# ---------------------------------------------------------------------------
# partial fractions


@dataclass(frozen=True)
class PartialFractionTerms:
    """Pieces of ``eps*T`` for one leg from ``z = 0`` to ``z = upper``."""

    roots: np.ndarray        # u1 (real), u2 (Im > 0), u3 = conj(u2)
    residues: np.ndarray     # A1, A2, A3
    tail: float              # I1, integral over [1, inf)
    tail_err: float
    real_root_part: float    # integral of A1/(u - u1) over [eps/upper, 1]
    pair_part: float         # log/arctan part over [eps/upper, 1]
    log_coefficient: float   # coefficient of log(eps) in eps*T, i.e. -A1

    @property
    def scaled_time(self):
        return self.tail + self.real_root_part + self.pair_part


def _cubic_roots(a, eps_b):
    roots = np.roots([1.0, 0.0, 1.0 + a, eps_b])
    k = int(np.argmin(np.abs(roots.imag)))
    u1 = roots[k]
    pair = np.delete(roots, k)
    if abs(u1.imag) > 1e-10 or np.min(np.abs(pair.imag)) < 0.5:
        raise RootIsolationFailure("cubic roots are not one real root plus a pair near +-i")
    u1 = float(u1.real)
    u2 = pair[np.argmax(pair.imag)]
    return u1, complex(u2)


def partial_fraction_terms(a: float, b: float, eps: float, upper: float) -> PartialFractionTerms:
    """Decompose ``eps * int_0^upper dz / (eps**2 + z**2 (1+a) + z**3 b)``."""
    u1, u2 = _cubic_roots(a, eps * b)
    u3 = u2.conjugate()
    roots = np.array([u1, u2, u3])
    A = roots / (3 * roots**2 + 1 + a)
    p = eps / upper
    if p - u1 <= 0 or 1 - u1 <= 0:
        raise RootIsolationFailure("real root lies inside the integration range")

    def integrand(u):
        return u / (u**3 + u * (1 + a) + eps * b)

    tail, tail_err = integrate.quad(integrand, 1.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    A1 = float(A[0].real)
    real_part = A1 * (math.log(1 - u1) - math.log(p - u1))
    # 2 Re[A2/(u - u2)] = (1/Im u2) (B s + C) / (s**2 + 1),  s = (u - Re u2)/Im u2
    B = 2 * A[1].real
    C = -2 * A[1].imag
    x2, y2 = u2.real, u2.imag

    def antideriv(u):
        s = (u - x2) / y2
        return 0.5 * B * math.log(s * s + 1) + C * math.atan(s)

    pair_part = antideriv(1.0) - antideriv(p)
    return PartialFractionTerms(roots, A, tail, tail_err, real_part, pair_part, -A1)


def _pf_time(nf: NormalForm, eps: float, z_start: float, z_end: float, w: float):
    """Travel time of the normal form between ``z_start < z_end``."""
    a, b, c0 = nf.a(w), nf.b(w), nf.c0(w)
    if c0 <= 0:
        raise RootIsolationFailure("reparametrised unfolding parameter is not positive")
    et = math.sqrt(c0)
    total = 0.0
    err = 0.0
    terms = []
    # split at z = 0; the negative side is the mirror problem with b -> -b
    if z_end > 0:
        t = partial_fraction_terms(a, b, et, z_end)
        terms.append(t)
        total += t.scaled_time
        err += t.tail_err
    if z_start < 0:
        t = partial_fraction_terms(a, -b, et, -z_start)
        terms.append(t)
        total += t.scaled_time
        err += t.tail_err
    # endpoints on the same side of zero (possible when Psi(0) != 0)
    if z_start > 0:
        total -= partial_fraction_terms(a, b, et, z_start).scaled_time
    if z_end < 0:
        total -= partial_fraction_terms(a, -b, et, -z_end).scaled_time
    return total / et, err / et, terms


def travel_time_partial_fraction(nf: NormalForm, epsilon: float, delta: float,
                                 leg: Leg = Leg.ZERO_TO_PLUS) -> TravelTimeResult:
    """Travel time from the closed-form partial-fraction antiderivatives."""
    leg = Leg(leg)
    if epsilon <= 0:
        raise RootIsolationFailure("epsilon must be positive")
    w = epsilon * epsilon
    lo, hi = _leg_bounds(leg, delta)
    z_lo = nf.delta_tilde_map(lo, w) if lo != 0.0 else nf.delta_tilde_map(0.0, w)
    z_hi = nf.delta_tilde_map(hi, w) if hi != 0.0 else nf.delta_tilde_map(0.0, w)
    T, err, _ = _pf_time(nf, epsilon, z_lo, z_hi, w)
    return TravelTimeResult(T, epsilon, delta, leg, Method.PARTIAL_FRACTION, err)


# ---------------------------------------------------------------------------
# log-term extraction


def fit_log_term(eps: Sequence[float], values: Sequence[float]):
    """Least-squares fit ``values ~ eta1 eps log eps + c1 eps + c2 eps^2 + c3 eps^3``.

    Returns ``(eta1, coeffs, cond)`` where ``cond`` is the condition number
    of the column-scaled design matrix.
    """
    e = np.asarray(eps, dtype=float)
    v = np.asarray(values, dtype=float)
    X = np.column_stack([e * np.log(e), e, e**2, e**3])
    scale = np.linalg.norm(X, axis=0)
    Xs = X / scale
    coef, *_ = np.linalg.lstsq(Xs, v, rcond=None)
    coef = coef / scale
    cond = float(np.linalg.cond(Xs))
    return float(coef[0]), coef, cond


@dataclass
class LogCoefficientEstimate:
    eta_samples: list
    slope_at_zero: float
    zeta_samples: list
    delta: float = 0.0
    leg: Leg = Leg.ZERO_TO_PLUS

    @property
    def max_abs_eta(self) -> float:
        return max(abs(e) for _, e in self.eta_samples)


def _scaled_time(field, eps, delta, leg):
    return eps * travel_time_direct(field, eps, delta, leg, estimate_error=False).T


def extract_log_coefficient(field: SaddleField, epsilon_grid: Sequence[float], delta: float,
                            leg: Leg = Leg.ZERO_TO_PLUS, stencil: int = 4,
                            max_cond: float = 1e8) -> LogCoefficientEstimate:
    """Estimate ``eta(eps)`` in ``eps*T = eta log eps + pi/2 + zeta``.

    At each grid point a local regression on ``eps * 2**-k`` (k < stencil)
    isolates the ``eps log eps`` column from the smooth part.
    """
    grid = np.sort(np.asarray(epsilon_grid, dtype=float))
    if grid.size < 8 or grid[-1] / grid[0] < 10 * (1 - 1e-12):
        raise GridTooCoarse("epsilon grid needs >= 8 points spanning a decade")
    leg = Leg(leg)
    offset = math.pi if leg is Leg.FULL else math.pi / 2
    cache = {}

    def st(e):
        if e not in cache:
            cache[e] = _scaled_time(field, e, delta, leg)
        return cache[e]

    eta_samples, zeta_samples = [], []
    for e in grid:
        pts = e * 2.0 ** -np.arange(stencil)
        vals = [st(p) - offset for p in pts]
        eta1, _, cond = fit_log_term(pts, vals)
        if cond > max_cond:
            raise GridTooCoarse(f"regression conditioning {cond:.3g} exceeds {max_cond:.3g}")
        eta = eta1 * e
        eta_samples.append((float(e), float(eta)))
        zeta_samples.append((float(e), float(delta), float(st(e) - offset - eta * math.log(e))))
    e0, eta0 = eta_samples[0]
    return LogCoefficientEstimate(eta_samples, eta0 / e0, zeta_samples, delta, leg)


@dataclass(frozen=True)
class LogCancellation:
    plus: float
    minus: float
    total: float


def log_cancellation(field: SaddleField, epsilon_grid: Sequence[float], delta: float) -> LogCancellation:
    """Coefficient of ``eps log eps`` in each half leg and in their sum."""
    e = np.asarray(epsilon_grid, dtype=float)
    tp = np.array([_scaled_time(field, x, delta, Leg.ZERO_TO_PLUS) for x in e])
    tm = np.array([_scaled_time(field, x, delta, Leg.MINUS_TO_ZERO) for x in e])
    plus = fit_log_term(e, tp - math.pi / 2)[0]
    minus = fit_log_term(e, tm - math.pi / 2)[0]
    total = fit_log_term(e, tp + tm - math.pi)[0]
    return LogCancellation(plus, minus, total)


# ---------------------------------------------------------------------------
# inversion


@dataclass(frozen=True)
class EpsilonStarResult:
    L: float
    delta: float
    epsilon_star: float
    residual: float
    derivative: float


def _solve_eps(field, L, delta, leg, rtol):
    def T(e):
        return travel_time_direct(field, e, delta, leg, estimate_error=False, rtol=rtol).T

    hi = field.eps0
    T_hi = T(hi)
    if T_hi > L:
        raise NoBracket(f"T(eps0) = {T_hi:.6g} exceeds L = {L}; L below validity threshold")
    lo = min(hi, 0.5 * (math.pi / 2) / L)
    while T(lo) <= L:
        lo *= 0.5
        if lo < 1e-14:
            raise NoBracket("could not bracket epsilon from below")
    eps = optimize.brentq(lambda e: T(e) - L, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                          maxiter=200)
    # Newton polish with a centred difference slope
    h = eps * 1e-6
    dT = (T(eps + h) - T(eps - h)) / (2 * h)
    r = T(eps) - L
    cand = eps - r / dT
    if abs(T(cand) - L) < abs(r):
        eps = cand
    return eps, abs(T(eps) - L)


def solve_epsilon_for_length(field: SaddleField, L: float, delta: float,
                             leg: Leg = Leg.MINUS_TO_ZERO, rel_step: float = 1e-3,
                             rtol: float = DEFAULT_RTOL) -> EpsilonStarResult:
    """Find the unique ``eps*`` with ``T(eps*; delta) = L``."""
    d0 = field.delta0
    if not (d0 / 2 * (1 - 1e-12) <= delta <= d0 * (1 + 1e-12)):
        raise DomainError(f"delta={delta} outside [{d0 / 2}, {d0}]")
    leg = Leg(leg)
    eps, res = _solve_eps(field, L, delta, leg, rtol)
    h = rel_step * L
    e_plus, _ = _solve_eps(field, L + h, delta, leg, rtol)
    e_minus, _ = _solve_eps(field, L - h, delta, leg, rtol)
    return EpsilonStarResult(L, delta, eps, res, (e_plus - e_minus) / (2 * h))


def fit_inverse_constant(Ls: Sequence[float], eps_stars: Sequence[float]):
    """Fit ``eps* L = c + c1/L + c2/L**2`` and return ``(c, coeffs)``."""
    L = np.asarray(Ls, dtype=float)
    y = np.asarray(eps_stars, dtype=float) * L
    ncol = min(3, len(L))
    X = np.column_stack([L ** -k for k in range(ncol)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return float(coef[0]), coef


# ---------------------------------------------------------------------------
# eps = 0 asymptotics


def asymptote_profile(field: SaddleField, x_range=(10.0, 1000.0), x0: float = 1.0,
                      y0: float = -0.5, n: int = 4000):
    """Samples ``(x, y(x))`` of the ``eps = 0`` solution with ``y(x0) = y0``."""
    if y0 >= 0:
        raise DomainError("need y(x0) < 0 so that y -> 0 as x grows")
    x_end = float(x_range[1])
    sol = integrate.solve_ivp(lambda x, y: y * y + field.g_eval(y, 0.0), (x0, x_end), [y0],
                              method="DOP853", rtol=DEFAULT_RTOL, atol=1e-16, dense_output=True)
    if not sol.success:
        raise EventNotReached(sol.message)
    xs = np.geomspace(x_range[0], x_end, n)
    return xs, sol.sol(xs)[0]


def asymptote_check(field: SaddleField, x_range=(10.0, 1000.0), x0: float = 1.0,
                    y0: float = -0.5, weight: str = "auto") -> float:
    """Weighted sup of ``|y(x) + 1/x|`` on ``x_range`` at ``eps = 0``.

    ``weight`` is ``"x2"``, ``"x2/logx"`` or ``"auto"``; the latter picks
    ``x2`` exactly when ``g_yyy(0, 0) = 0``.
    """
    if weight == "auto":
        weight = "x2" if field.g_yyy0 == 0.0 else "x2/logx"
    xs, ys = asymptote_profile(field, x_range, x0, y0)
    dev = np.abs(ys + 1.0 / xs)
    if weight == "x2":
        w = xs**2
    elif weight == "x2/logx":
        w = xs**2 / np.log(xs)
    else:
        raise ValueError(f"unknown weight {weight!r}")
    return float(np.max(w * dev))
