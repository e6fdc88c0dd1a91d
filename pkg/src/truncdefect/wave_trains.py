"""Homogeneous oscillations, dispersion relations and hypothesis checks.

A wave train with wavenumber ``k`` is ``u(x, t) = W(k x + omega t)`` with
``W`` ``2 pi``-periodic, so that

    omega W' = k^2 D W'' + f(W).

At ``k = 0`` this is the spatially homogeneous oscillation whose
``tau``-translates form the circle of equilibria of the spatial dynamics.
All periodic functions are represented by their values on ``n`` equispaced
collocation nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from . import fourier
from .errors import BranchCrossing, ContinuationStall, NewtonDiverged, SingularJacobian
from .models import ReactionDiffusionSystem


@dataclass
class WaveTrain:
    """Periodic orbit ``W`` sampled on ``N_tau`` nodes with frequency ``omega_d``."""

    values: np.ndarray  # (N_tau, d)
    omega_d: float
    residual: float
    N_tau: int
    k: float = 0.0
    phase_value: float = 0.0
    history: list = dc_field(default_factory=list)

    @property
    def fourier_coeffs(self) -> np.ndarray:
        """Centred complex coefficients ``c_n``, ``|n| < N_tau/2``, shape ``(2K+1, d)``."""
        return fourier.coefficients(self.values)

    @property
    def tau(self) -> np.ndarray:
        return fourier.nodes(self.N_tau)

    def __call__(self, tau) -> np.ndarray:
        return fourier.evaluate(self.fourier_coeffs, tau)

    def derivative(self) -> np.ndarray:
        return fourier.differentiate(self.values, axis=0)

    def translate(self, alpha: float) -> "WaveTrain":
        """The translate ``W(. + alpha)``."""
        return WaveTrain(fourier.shift(self.values, alpha), self.omega_d, self.residual,
                         self.N_tau, self.k, self.phase_value)

    @property
    def amplitude(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)


def _sample_guess(guess, n, d):
    tau = fourier.nodes(n)
    if callable(guess):
        vals = np.asarray(guess(tau), dtype=float)
    else:
        vals = np.asarray(guess, dtype=float)
    if vals.shape == (d, n):
        vals = vals.T
    if vals.shape != (n, d):
        raise ValueError(f"guess must sample to shape ({n}, {d})")
    return vals


def _newton_periodic(system, values, omega, ref, k=0.0, tol=1e-12, max_iter=40):
    n, d = values.shape
    Dt = fourier.diff_matrix(n)
    Dtt = Dt @ Dt
    I_d = np.eye(d)
    A_t = np.kron(Dt, I_d)
    A_tt = np.kron(Dtt, np.diag(system.D))
    ref_t = (Dt @ ref).ravel()
    w = 2 * np.pi / n
    U = values.copy()
    hist = []

    def resid(U, om):
        r = om * (Dt @ U) - k * k * (Dtt @ U) * system.D - system.f(U)
        ph = w * np.dot((U - ref).ravel(), ref_t)
        return np.concatenate([r.ravel(), [ph]])

    for it in range(max_iter):
        R = resid(U, omega)
        nr = float(np.max(np.abs(R)))
        hist.append(nr)
        if nr < tol:
            return U, omega, hist
        Jf = system.jac(U)
        J = np.zeros((n * d + 1, n * d + 1))
        J[:-1, :-1] = omega * A_t - k * k * A_tt
        for m in range(n):
            J[m * d:(m + 1) * d, m * d:(m + 1) * d] -= Jf[m]
        J[:-1, -1] = (Dt @ U).ravel()
        J[-1, :-1] = w * ref_t
        if np.linalg.cond(J) > 1e14:
            raise SingularJacobian("translation kernel not removed by the phase condition")
        step = np.linalg.solve(J, -R)
        U = U + step[:-1].reshape(n, d)
        omega = omega + step[-1]
        if not np.all(np.isfinite(U)) or nr > 1e8:
            break
    raise NewtonDiverged(f"no convergence after {max_iter} iterations (residual {hist[-1]:.3g})")


def find_wave_train(system: ReactionDiffusionSystem, guess, N_tau: int = 32,
                    omega_guess: float | None = None, tol: float = 1e-12,
                    max_iter: int = 40) -> WaveTrain:
    """Homogeneous oscillation ``omega_d W' = f(W)`` by Fourier-collocation Newton.

    Parameters
    ----------
    guess : callable or array
        ``guess(tau)`` returning shape ``(N_tau, d)`` (or ``(d, N_tau)``), or
        the samples themselves.  The phase condition
        ``<W - guess, guess'> = 0`` fixes the translate.
    omega_guess : float, optional
        Defaults to the projection of ``f(guess)`` on ``guess'``.
    """
    if N_tau < 8:
        raise ValueError("N_tau must be at least 8")
    G = _sample_guess(guess, N_tau, system.d)
    Gt = fourier.differentiate(G)
    if omega_guess is None:
        omega_guess = float(np.sum(system.f(G) * Gt) / np.sum(Gt * Gt))
    U, om, hist = _newton_periodic(system, G, omega_guess, G, 0.0, tol, max_iter)
    Dt = fourier.diff_matrix(N_tau)
    res = float(np.max(np.abs(om * (Dt @ U) - system.f(U))))
    ph = float(2 * np.pi / N_tau * np.sum((U - G) * Gt))
    return WaveTrain(U, float(om), res, N_tau, 0.0, ph, hist)


def circle_guess(radius: float = 1.0) -> Callable:
    """``tau -> radius (cos tau, sin tau)``; the orbit of a gauge-equivariant system."""
    return lambda tau: radius * np.column_stack([np.cos(tau), np.sin(tau)])


# ---------------------------------------------------------------------------
# dispersion


@dataclass
class DispersionData:
    omega_nl_samples: list = dc_field(default_factory=list)
    omega_nl_pp0: float = float("nan")
    lambda_lin_samples: list = dc_field(default_factory=list)
    lambda_lin_pp0: float = float("nan")
    second_differences: dict = dc_field(default_factory=dict)

    def merge(self, other: "DispersionData") -> "DispersionData":
        out = DispersionData(**self.__dict__)
        if other.omega_nl_samples:
            out.omega_nl_samples = other.omega_nl_samples
            out.omega_nl_pp0 = other.omega_nl_pp0
        if other.lambda_lin_samples:
            out.lambda_lin_samples = other.lambda_lin_samples
            out.lambda_lin_pp0 = other.lambda_lin_pp0
        out.second_differences = {**self.second_differences, **other.second_differences}
        return out


def second_derivative_at_zero(grid: Sequence[float], values: Sequence[float]):
    """Symmetric second differences at 0 with Richardson extrapolation.

    Returns ``(estimate, {h: D2(h)})``.  With two or more symmetric steps the
    two largest are combined to cancel the ``h**2`` error term.
    """
    table = {float(g): float(np.real(v)) for g, v in zip(grid, values)}
    if 0.0 not in table:
        raise ValueError("grid must contain 0")
    f0 = table[0.0]
    steps = sorted(h for h in table if h > 0 and -h in table)
    if not steps:
        raise ValueError("grid must be symmetric about 0")
    d2 = {h: (table[h] - 2 * f0 + table[-h]) / (h * h) for h in steps}
    if len(steps) == 1:
        return d2[steps[0]], d2
    ha, hb = steps[-1], steps[-2]
    est = (ha * ha * d2[hb] - hb * hb * d2[ha]) / (ha * ha - hb * hb)
    return float(est), d2


def _outward_order(grid):
    g = sorted(float(x) for x in grid)
    pos = [x for x in g if x > 0]
    neg = sorted((x for x in g if x < 0), reverse=True)
    return pos, neg


def nonlinear_dispersion(system: ReactionDiffusionSystem, wt: WaveTrain,
                         k_grid: Sequence[float] = (-0.2, -0.1, 0.0, 0.1, 0.2),
                         tol: float = 1e-12) -> DispersionData:
    """``omega_nl(k)`` by continuation in ``k`` from the homogeneous oscillation."""
    pos, neg = _outward_order(k_grid)
    samples = {0.0: wt.omega_d}
    for branch in (pos, neg):
        U, om = wt.values, wt.omega_d
        for k in branch:
            try:
                U, om, _ = _newton_periodic(system, U, om, U, k, tol)
            except (NewtonDiverged, SingularJacobian) as exc:
                raise ContinuationStall(f"Newton failed at k={k}: {exc}") from exc
            samples[k] = float(om)
    ks = sorted(samples)
    est, d2 = second_derivative_at_zero(ks, [samples[k] for k in ks])
    return DispersionData(omega_nl_samples=[(k, samples[k]) for k in ks], omega_nl_pp0=est,
                          second_differences={"omega_nl": d2})


def floquet_exponents(system: ReactionDiffusionSystem, wt: WaveTrain, ell: float,
                      rtol: float = 1e-12) -> np.ndarray:
    """Floquet exponents in time units of ``v_tau = (-ell^2 D + f'(W)) v / omega_d``."""
    d = system.d
    coeffs = wt.fourier_coeffs
    K = (coeffs.shape[0] - 1) // 2
    ks = np.arange(-K, K + 1)
    Dm = np.diag(system.D)

    def rhs(tau, y):
        W = np.real(np.exp(1j * ks * tau) @ coeffs)
        A = (system.jac(W) - ell * ell * Dm) / wt.omega_d
        return (A @ y.reshape(d, d)).ravel()

    sol = integrate.solve_ivp(rhs, (0.0, 2 * np.pi), np.eye(d).ravel(), method="DOP853",
                              rtol=rtol, atol=1e-14)
    M = sol.y[:, -1].reshape(d, d)
    rho = np.linalg.eigvals(M)
    return wt.omega_d * np.log(rho.astype(complex)) / (2 * np.pi)


def linear_dispersion(system: ReactionDiffusionSystem, wt: WaveTrain,
                      l_grid: Sequence[float] = (-0.2, -0.1, 0.0, 0.1, 0.2),
                      min_gap: float = 1e-8) -> DispersionData:
    """Track the Floquet branch through ``lambda_lin(0) = 0`` over ``l_grid``."""
    pos, neg = _outward_order(l_grid)
    lam0 = floquet_exponents(system, wt, 0.0)
    j = int(np.argmin(np.abs(lam0)))
    samples = {0.0: complex(lam0[j])}
    for branch in (pos, neg):
        prev = samples[0.0]
        for ell in branch:
            lam = floquet_exponents(system, wt, ell)
            dist = np.abs(lam - prev)
            order = np.argsort(dist)
            if len(lam) > 1 and abs(lam[order[1]] - lam[order[0]]) < min_gap:
                raise BranchCrossing(f"tracked exponent collides with another at ell={ell}")
            prev = complex(lam[order[0]])
            samples[ell] = prev
    ls = sorted(samples)
    est, d2 = second_derivative_at_zero(ls, [samples[x].real for x in ls])
    return DispersionData(lambda_lin_samples=[(x, samples[x]) for x in ls], lambda_lin_pp0=est,
                          second_differences={"lambda_lin": d2})


def dispersion(system, wt, k_grid=(-0.2, -0.1, 0.0, 0.1, 0.2),
               l_grid=(-0.2, -0.1, 0.0, 0.1, 0.2)) -> DispersionData:
    return nonlinear_dispersion(system, wt, k_grid).merge(linear_dispersion(system, wt, l_grid))


@dataclass(frozen=True)
class ReducedCoefficients:
    """``y' = unfold * (omega - omega_d) + kappa * y**2`` on the center manifold.

    ``orientation`` is ``+1`` when equilibria vanish for ``omega > omega_d``.
    ``eps_sq_scale`` converts ``omega - omega_d`` into the normalised
    ``eps**2`` of the scalar saddle-node.
    """

    kappa: float
    unfold: float
    orientation: int
    eps_sq_scale: float


def reduced_coefficients(disp: DispersionData) -> ReducedCoefficients:
    lpp, wpp = disp.lambda_lin_pp0, disp.omega_nl_pp0
    kappa = wpp / lpp
    unfold = -2.0 / lpp
    orientation = 1 if unfold * kappa > 0 else -1
    return ReducedCoefficients(kappa, unfold, orientation, -2.0 * wpp / (lpp * lpp))


# ---------------------------------------------------------------------------
# spatial dynamics and hypotheses


def spatial_operator(system: ReactionDiffusionSystem, values: np.ndarray, omega: float):
    """Nonlinear spatial-dynamics field ``G(u, v) = (v, D^-1 (omega u_tau - f(u)))``.

    Returns a function on flat vectors ``(u, v)`` of length ``2 n d``.
    """
    n, d = values.shape
    Dt = fourier.diff_matrix(n)
    Dinv = 1.0 / system.D

    def G(p):
        u = p[: n * d].reshape(n, d)
        v = p[n * d:].reshape(n, d)
        w = (omega * (Dt @ u) - system.f(u)) * Dinv
        return np.concatenate([v.ravel(), w.ravel()])

    return G


def spatial_linearization(system: ReactionDiffusionSystem, wt: WaveTrain) -> np.ndarray:
    """Matrix of the linearised spatial dynamics at the homogeneous oscillation."""
    n, d = wt.values.shape
    Dt = fourier.diff_matrix(n)
    B = wt.omega_d * np.kron(Dt, np.eye(d))
    Jf = system.jac(wt.values)
    for m in range(n):
        B[m * d:(m + 1) * d, m * d:(m + 1) * d] -= Jf[m]
    B = B / np.tile(system.D, n)[:, None]
    N = n * d
    M = np.zeros((2 * N, 2 * N))
    M[:N, N:] = np.eye(N)
    M[N:, :N] = B
    return M


def reverser_matrices(n: int, d: int):
    """``R0: (u, v)(tau) -> (u, -v)(tau)`` and ``Rpi: (u, v)(tau) -> (u, -v)(tau + pi)``."""
    N = n * d
    R0 = np.diag(np.concatenate([np.ones(N), -np.ones(N)]))
    S = np.kron(np.roll(np.eye(n), n // 2, axis=1), np.eye(d))
    Rpi = np.zeros((2 * N, 2 * N))
    Rpi[:N, :N] = S
    Rpi[N:, N:] = -S
    return R0, Rpi


@dataclass
class HypothesisReport:
    zero_multiplicity: int
    spectral_gap: float
    omega_nl_pp0_nonzero: bool
    lambda_lin_pp0_nonzero: bool
    reversers_verified: bool
    kernel_dims: list = dc_field(default_factory=list)
    omega_nl_pp0: float = float("nan")
    lambda_lin_pp0: float = float("nan")
    reverser_defects: dict = dc_field(default_factory=dict)

    @property
    def double_zero_pass(self) -> bool:
        return self.zero_multiplicity == 2 and self.spectral_gap > 0

    @property
    def fold_pass(self) -> bool:
        return self.omega_nl_pp0_nonzero and self.lambda_lin_pp0_nonzero

    def summary(self) -> dict:
        return {"double_zero": self.double_zero_pass, "reversers": self.reversers_verified,
                "fold_nondegenerate": self.fold_pass,
                "zero_multiplicity": self.zero_multiplicity, "spectral_gap": self.spectral_gap,
                "omega_nl_pp0": self.omega_nl_pp0, "lambda_lin_pp0": self.lambda_lin_pp0}


def zero_eigenvalue_multiplicity(M: np.ndarray, rel_tol: float = 1e-8, max_power: int = 4):
    """Algebraic multiplicity of 0 from ``dim ker M^k`` until it stabilises."""
    dims = []
    P = np.eye(M.shape[0])
    for _ in range(max_power):
        P = P @ M
        s = np.linalg.svd(P, compute_uv=False)
        dims.append(int(np.sum(s < rel_tol * s[0])))
        if len(dims) > 1 and dims[-1] == dims[-2]:
            break
    return dims[-1], dims


def check_hypotheses(system: ReactionDiffusionSystem, wt: WaveTrain,
                     disp: DispersionData | None = None, threshold: float = 1e-3,
                     seed: int = 0) -> HypothesisReport:
    """Computable shadows of the zero-eigenvalue, reversibility and fold hypotheses."""
    if disp is None:
        disp = dispersion(system, wt)
    M = spatial_linearization(system, wt)
    mult, dims = zero_eigenvalue_multiplicity(M)
    ev = np.linalg.eigvals(M)
    rest = ev[np.argsort(np.abs(ev))][mult:]
    gap = float(np.min(np.abs(rest.real))) if rest.size else float("inf")

    n, d = wt.values.shape
    G = spatial_operator(system, wt.values, wt.omega_d)
    R0, Rpi = reverser_matrices(n, d)
    rng = np.random.default_rng(seed)
    defects = {}
    for name, R in (("R0", R0), ("Rpi", Rpi)):
        worst = 0.0
        for _ in range(4):
            p = rng.normal(size=2 * n * d)
            lhs = G(R @ p)
            worst = max(worst, float(np.max(np.abs(lhs + R @ G(p))) / max(1.0, np.max(np.abs(lhs)))))
        defects[name] = worst
    return HypothesisReport(
        zero_multiplicity=mult,
        spectral_gap=gap,
        omega_nl_pp0_nonzero=bool(abs(disp.omega_nl_pp0) > threshold),
        lambda_lin_pp0_nonzero=bool(abs(disp.lambda_lin_pp0) > threshold),
        reversers_verified=bool(max(defects.values()) <= 1e-10),
        kernel_dims=dims,
        omega_nl_pp0=disp.omega_nl_pp0,
        lambda_lin_pp0=disp.lambda_lin_pp0,
        reverser_defects=defects,
    )
