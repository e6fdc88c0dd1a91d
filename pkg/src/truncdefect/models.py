"""Built-in reaction-diffusion systems in real two-component form.

Both built-ins are gauge-equivariant complex equations

    A_t = D A_xx + A G(|A|^2),     G(s) = sum_k c_k s^k,  c_k complex,

written for ``u = (Re A, Im A)``.  The lambda-omega system has
``G(s) = (1 + i omega0) - (1 + i gamma) s``; the cubic-quintic
Ginzburg-Landau system carries a linear, a cubic and a quintic coefficient.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np


@dataclass
class ReactionDiffusionSystem:
    """``u_t = D u_xx + f(u)`` with ``u`` in ``R^d``.

    ``f`` and ``jac`` act on arrays whose last axis has length ``d`` and
    return shapes ``(..., d)`` and ``(..., d, d)``.
    """

    d: int
    D: np.ndarray
    f: Callable
    jac: Callable
    name: str = "system"
    gauge_coeffs: tuple | None = None
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.D = np.asarray(self.D, dtype=float).reshape(-1)
        if self.d < 2:
            raise ValueError("dimension must be at least 2")
        if self.D.shape != (self.d,) or np.any(self.D <= 0):
            raise ValueError("D must be a positive diagonal of length d")

    def jacobian_error(self, n: int = 16, seed: int = 0, h: float = 1e-6) -> float:
        """Largest deviation between ``jac`` and central differences of ``f``."""
        rng = np.random.default_rng(seed)
        u = rng.uniform(-1.2, 1.2, (n, self.d))
        J = self.jac(u)
        err = 0.0
        for k in range(self.d):
            e = np.zeros(self.d)
            e[k] = h
            col = (self.f(u + e) - self.f(u - e)) / (2 * h)
            err = max(err, float(np.max(np.abs(col - J[..., :, k]))))
        return err

    # analytic references for gauge-equivariant systems -------------------

    def _G(self, s, deriv=0):
        c = np.asarray(self.gauge_coeffs, dtype=complex)
        p = np.polynomial.polynomial.Polynomial(c)
        for _ in range(deriv):
            p = p.deriv()
        return p(s)

    def homogeneous_amplitude_squared(self) -> float:
        """Positive root ``s0`` of ``Re G(s) = 0`` with ``Re G'(s0) < 0``."""
        if self.gauge_coeffs is None:
            raise ValueError("system has no gauge polynomial")
        c = np.asarray(self.gauge_coeffs, dtype=complex).real
        roots = np.polynomial.polynomial.polyroots(c)
        good = [r.real for r in roots if abs(r.imag) < 1e-12 and r.real > 0
                and self._G(r.real, 1).real < 0]
        if not good:
            raise ValueError("no stable homogeneous oscillation")
        return float(min(good))

    def reference_omega_d(self) -> float:
        return float(self._G(self.homogeneous_amplitude_squared()).imag)

    def reference_omega_nl_pp0(self) -> float:
        """``2 Im G'(s0) / Re G'(s0)``; valid when ``D`` is the identity."""
        g1 = self._G(self.homogeneous_amplitude_squared(), 1)
        return float(2 * g1.imag / g1.real)


def _gauge_system(coeffs: Sequence[complex], D, name: str, meta=None) -> ReactionDiffusionSystem:
    c = np.asarray(coeffs, dtype=complex)
    dc = np.arange(1, len(c)) * c[1:]

    def G(s, cc):
        out = np.zeros_like(s, dtype=complex)
        for k in range(len(cc) - 1, -1, -1):
            out = out * s + cc[k]
        return out

    def f(u):
        u = np.asarray(u, dtype=float)
        a = u[..., 0] + 1j * u[..., 1]
        val = a * G(np.abs(a) ** 2, c)
        return np.stack([val.real, val.imag], axis=-1)

    def jac(u):
        u = np.asarray(u, dtype=float)
        x, y = u[..., 0], u[..., 1]
        a = x + 1j * y
        s = x * x + y * y
        g = G(s, c)
        gp = G(s, dc) if len(dc) else np.zeros_like(g)
        w = a * gp  # d(A G)/ds
        J = np.empty(u.shape[:-1] + (2, 2))
        J[..., 0, 0] = g.real + 2 * x * w.real
        J[..., 0, 1] = -g.imag + 2 * y * w.real
        J[..., 1, 0] = g.imag + 2 * x * w.imag
        J[..., 1, 1] = g.real + 2 * y * w.imag
        return J

    return ReactionDiffusionSystem(2, np.asarray(D, float), f, jac, name, tuple(c), meta or {})


@dataclass(frozen=True)
class LambdaOmegaParams:
    omega0: float = 1.0
    gamma: float = 0.5
    D: tuple = (1.0, 1.0)

    def __post_init__(self):
        if min(self.D) <= 0:
            raise ValueError("D entries must be positive")


@dataclass(frozen=True)
class CGLQuinticParams:
    """Complex coefficients given as ``(real, imag)`` pairs."""

    linear: tuple = (0.5, 2.4)
    cubic: tuple = (0.0, -3.4)
    quintic: tuple = (-0.5, 2.0)
    D: tuple = (1.0, 1.0)

    def __post_init__(self):
        if min(self.D) <= 0:
            raise ValueError("D entries must be positive")
        if self.quintic[0] >= 0:
            raise ValueError("quintic coefficient needs negative real part")


def lambda_omega(params: LambdaOmegaParams = LambdaOmegaParams()) -> ReactionDiffusionSystem:
    """``f(A) = (1 + i omega0) A - (1 + i gamma) |A|^2 A``."""
    coeffs = (1 + 1j * params.omega0, -(1 + 1j * params.gamma))
    return _gauge_system(coeffs, params.D, f"lambda-omega(omega0={params.omega0}, gamma={params.gamma})",
                         {"params": params})


def cgl_quintic(params: CGLQuinticParams = CGLQuinticParams()) -> ReactionDiffusionSystem:
    """``f(A) = l A + c |A|^2 A + q |A|^4 A`` with complex ``l, c, q``.

    The defaults are the sweep-selected parameter set that hosts a contact
    defect: ``Re G(s) = (1 - s^2)/2`` and
    ``Im G(s) = 1 + 2 (s - 0.7)(s - 1)``, so that ``|A| = 1``, the
    homogeneous frequency is 1, and ``Im G`` dips below it for
    ``0.7 < s < 1``.
    """
    coeffs = (complex(*params.linear), 0.0, complex(*params.cubic), 0.0, complex(*params.quintic))
    # G is a polynomial in s = |A|^2: G(s) = l + c s + q s^2
    g = (coeffs[0], coeffs[2], coeffs[4])
    return _gauge_system(g, params.D, "cgl-quintic", {"params": params})


def default_defect_model() -> ReactionDiffusionSystem:
    return cgl_quintic(CGLQuinticParams())


def rotation(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def gauge_defect(system: ReactionDiffusionSystem, n: int = 32, seed: int = 0) -> float:
    """Sampled ``max |f(R u) - R f(u)|`` over random rotations ``R``."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.2, 1.2, (n, 2))
    err = 0.0
    for phi in rng.uniform(0, 2 * np.pi, 8):
        R = rotation(phi)
        err = max(err, float(np.max(np.abs(system.f(u @ R.T) - system.f(u) @ R.T))))
    return err
