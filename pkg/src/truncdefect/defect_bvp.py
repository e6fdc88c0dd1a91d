"""Truncated contact defects as time-periodic boundary-value problems.

Unknowns are the samples ``U[j, m, :] = u(x_j, tau_m)`` on a symmetric
space grid times a Fourier collocation grid in ``tau``, together with the
frequency ``omega``.  The equations are

    omega u_tau - D u_xx - f(u) = 0        on [-L, L] x S^1,
    u_x(+-L, tau) = 0,
    <u - u_ref, d/dtau u_ref> = 0  at x = L (fixes the tau-translate).

Space
    The nodes are the image of a uniform grid ``s_j`` on ``[-1, 1]`` under
    ``x = L s - (b / pi) sin(pi s)``, which clusters points near the core.
    Derivatives use fourth-order centred differences in ``s`` and the chain
    rule.  Because ``dx/ds`` is even about ``s = +-1``, even reflection across
    the end points represents the Neumann condition exactly, so every Newton
    iterate satisfies the discrete boundary condition.

Time
    Spectral differentiation in ``tau``.  The nonlinearity is evaluated on a
    three-times finer ``tau`` grid and projected back, which removes aliasing
    up to quintic terms.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np
from scipy import interpolate, optimize, sparse
from scipy.linalg import lapack

from . import fourier
from .errors import (
    ContinuationStall,
    FitAmbiguous,
    InsufficientFamily,
    NewtonDiverged,
    ShapeMismatch,
    SingularJacobian,
)
from .models import ReactionDiffusionSystem
from .wave_trains import WaveTrain

DEALIAS_FACTOR = 3


# ---------------------------------------------------------------------------
# grid


def _fd_matrices(n: int, h: float):
    """Fourth-order first and second ``s``-derivatives with even reflection at both ends."""
    c1 = {-2: 1.0, -1: -8.0, 1: 8.0, 2: -1.0}
    c2 = {-2: -1.0, -1: 16.0, 0: -30.0, 1: 16.0, 2: -1.0}
    rows, cols, v1, v2 = [], [], [], []
    for j in range(n):
        for off in (-2, -1, 0, 1, 2):
            k = j + off
            if k < 0:
                k = -k
            elif k > n - 1:
                k = 2 * (n - 1) - k
            rows.append(j)
            cols.append(k)
            v1.append(c1.get(off, 0.0) / (12 * h))
            v2.append(c2[off] / (12 * h * h))
    D1 = sparse.csr_matrix((v1, (rows, cols)), shape=(n, n))
    D2 = sparse.csr_matrix((v2, (rows, cols)), shape=(n, n))
    D1.sum_duplicates()
    D2.sum_duplicates()
    D1.eliminate_zeros()
    return D1, D2


def _log_cosh(v):
    return np.logaddexp(v, -v) - math.log(2.0)


@dataclass
class SpaceTimeGrid:
    """Symmetric mapped grid on ``[-L, L]`` times ``N_tau`` collocation nodes.

    The map from the uniform computational grid ``s in [-1, 1]`` is

        x(s) = A s + B Phi(s),     Phi'(s) = (1 + tanh((|s| - s_c) / w)) / 2,

    with ``A = core_spacing (N_x - 1) / 2`` and ``B`` chosen so that
    ``x(1) = L``.  Inside the core the nodes are uniform with spacing
    ``core_spacing`` and move with ``L`` only through ``B Phi(s)``, which is
    about ``B (w/2) exp(-2 (s_c - |s|) / w)``; the tails absorb any change of
    length.  Continuation in ``L`` can then move a solution to a longer grid
    node by node without interpolating the defect core.
    ``core_spacing=None`` gives the uniform grid.
    """

    L: float
    N_x: int
    N_tau: int
    core_spacing: float | None = None
    core_fraction: float = 0.45
    ramp: float = 0.045

    def __post_init__(self):
        if self.N_x < 64 or self.N_tau < 8 or self.N_tau % 2:
            raise ValueError("need N_x >= 64 and even N_tau >= 8")
        if self.L <= 0:
            raise ValueError("L must be positive")
        if not 0 < self.core_fraction < 1 or self.ramp <= 0:
            raise ValueError("need 0 < core_fraction < 1 and ramp > 0")
        self.s = np.linspace(-1.0, 1.0, self.N_x)
        self.h_s = 2.0 / (self.N_x - 1)
        sc, w = self.core_fraction, self.ramp
        t = np.abs(self.s)
        step = 0.5 * (1.0 + np.tanh((t - sc) / w))
        Phi = 0.5 * (t + w * (_log_cosh((t - sc) / w) - _log_cosh(-sc / w)))
        Phi1 = 0.5 * (1.0 + w * (_log_cosh((1.0 - sc) / w) - _log_cosh(-sc / w)))
        if self.core_spacing is None:
            A, B = self.L, 0.0
        else:
            A = self.core_spacing * (self.N_x - 1) / 2.0
            B = (self.L - A) / Phi1
        self.A, self.B = A, B
        self.x_nodes = A * self.s + B * np.sign(self.s) * Phi
        self.x_nodes[0], self.x_nodes[-1] = -self.L, self.L
        if self.N_x % 2:
            self.x_nodes[self.N_x // 2] = 0.0
        self.x_s = A + B * step
        self.x_ss = np.sign(self.s) * B * 0.5 / (w * np.cosh((t - sc) / w) ** 2)
        if np.any(self.x_s <= 0):
            raise ValueError("core spacing too coarse for this length and node count")
        D1, D2 = _fd_matrices(self.N_x, self.h_s)
        self.Dx = (sparse.diags(1.0 / self.x_s) @ D1).tocsr()
        self.Dxx = (sparse.diags(1.0 / self.x_s**2) @ D2
                    - sparse.diags(self.x_ss / self.x_s**3) @ D1).tocsr()
        # trapezoid weights in x
        wts = np.full(self.N_x, self.h_s)
        wts[0] = wts[-1] = self.h_s / 2
        self.x_weights = wts * self.x_s
        self.tau = fourier.nodes(self.N_tau)

    def same_core(self, other: "SpaceTimeGrid") -> bool:
        """True when node-by-node transfer between the grids keeps the core fixed."""
        return (self.N_x == other.N_x and self.N_tau == other.N_tau
                and self.core_spacing is not None and other.core_spacing is not None
                and math.isclose(self.core_spacing, other.core_spacing, rel_tol=1e-12)
                and self.core_fraction == other.core_fraction and self.ramp == other.ramp)

    def resized(self, L: float) -> "SpaceTimeGrid":
        return SpaceTimeGrid(L, self.N_x, self.N_tau, self.core_spacing, self.core_fraction, self.ramp)


# ---------------------------------------------------------------------------
# solution container


@dataclass
class TruncatedDefect:
    grid: SpaceTimeGrid
    U: np.ndarray  # (N_x, N_tau, d)
    omega: float
    residual_norm: float
    newton_iters: int
    history: list = dc_field(default_factory=list)
    omega_d: float | None = None
    orientation: int = 1
    bc_residual: float = 0.0
    phase_value: float = 0.0
    seconds: float = 0.0

    @property
    def L(self) -> float:
        return self.grid.L

    @property
    def epsilon_star(self) -> float:
        """``sqrt(orientation * (omega - omega_d))``."""
        if self.omega_d is None:
            raise ValueError("omega_d unknown")
        gap = self.orientation * (self.omega - self.omega_d)
        return math.sqrt(gap) if gap > 0 else -math.sqrt(-gap)

    def observed_order(self, floor: float = 1e-12) -> float:
        """Convergence order ``log(r2/r1) / log(r1/r0)`` of the last three iterates.

        Residuals below ``floor`` are treated as round-off, except that the
        final iterate is always kept: when it sits at round-off the true
        contraction is at least as strong, so the estimate is a lower bound.
        """
        h = list(self.history)
        while len(h) >= 2 and h[-2] <= floor:
            h.pop()
        if len(h) < 3 or h[-3] <= floor:
            return float("nan")
        r0, r1, r2 = h[-3:]
        if not (r0 > r1 > r2):
            return float("nan")
        return math.log(r2 / r1) / math.log(r1 / r0)


# ---------------------------------------------------------------------------
# residual and Jacobian


class _Discretisation:
    def __init__(self, system: ReactionDiffusionSystem, grid: SpaceTimeGrid):
        self.system, self.grid = system, grid
        n = grid.N_tau
        self.Dt = fourier.diff_matrix(n)
        self.T, self.P = fourier.resample_matrices(n, DEALIAS_FACTOR * n)

    def nonlinearity(self, U):
        fine = np.einsum("qm,jmc->jqc", self.T, U)
        return np.einsum("mq,jqc->jmc", self.P, self.system.f(fine)), fine

    def residual(self, U, omega, ref=None):
        g = self.grid
        Ut = np.einsum("mk,jkc->jmc", self.Dt, U)
        Uxx = (g.Dxx @ U.reshape(g.N_x, -1)).reshape(U.shape)
        F, _ = self.nonlinearity(U)
        R = omega * Ut - Uxx * self.system.D - F
        out = R.ravel()
        if ref is not None:
            out = np.concatenate([out, [self.phase(U, ref)]])
        return out

    def phase_weights(self, ref):
        """Weights of the phase row, supported on the last ``x`` slice."""
        g = self.grid
        w = np.zeros(ref.shape)
        w[-1] = (self.Dt @ ref[-1]) * (2 * np.pi / g.N_tau)
        return w.ravel()

    def phase(self, U, ref):
        return float(np.dot((U - ref).ravel(), self.phase_weights(ref)))

    def jacobian_blocks(self, U, omega):
        """Sparse ``d R / d U`` without the frequency column."""
        g, sysm = self.grid, self.system
        n, d, nx = g.N_tau, sysm.d, g.N_x
        nd = n * d
        _, fine = self.nonlinearity(U)
        Jf = sysm.jac(fine)  # (nx, M, d, d)
        # block_j[m, a, k, b] = omega Dt[m, k] delta_ab - sum_q P[m, q] Jf[j, q, a, b] T[q, k]
        blocks = -np.einsum("mq,jqab,qk->jmakb", self.P, Jf, self.T)
        blocks += omega * np.einsum("mk,ab->makb", self.Dt, np.eye(d))[None]
        blocks = blocks.reshape(nx, nd, nd)
        A = sparse.bsr_matrix((blocks, np.arange(nx), np.arange(nx + 1)), shape=(nx * nd, nx * nd))
        return A.tocsr() - sparse.kron(g.Dxx, sparse.diags(np.tile(sysm.D, n)), format="csr")

    def extended_system(self, U, omega, ref):
        """Banded Jacobian and residual with the frequency replicated per node.

        Node ``j`` carries unknowns ``(U_j, omega_j)``; its extra equation is
        ``omega_j - omega_{j+1} = 0`` except on the last node, where it is the
        phase condition.  The bordered system becomes banded.
        """
        g = self.grid
        nx, nd = g.N_x, g.N_tau * self.system.d
        b = nd + 1
        A = self.jacobian_blocks(U, omega).tocoo()
        ext = lambda idx: (idx // nd) * b + idx % nd  # noqa: E731
        rows = [ext(A.row)]
        cols = [ext(A.col)]
        vals = [A.data]
        Ut = np.einsum("mk,jkc->jmc", self.Dt, U).reshape(nx, nd)
        jj = np.repeat(np.arange(nx), nd)
        rows.append(jj * b + np.tile(np.arange(nd), nx))
        cols.append(jj * b + nd)
        vals.append(Ut.ravel())
        js = np.arange(nx - 1)
        rows += [js * b + nd, js * b + nd]
        cols += [js * b + nd, (js + 1) * b + nd]
        vals += [np.ones(nx - 1), -np.ones(nx - 1)]
        w = self.phase_weights(ref).reshape(nx, nd)[-1]
        rows.append(np.full(nd, (nx - 1) * b + nd))
        cols.append((nx - 1) * b + np.arange(nd))
        vals.append(w)
        r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
        J = sparse.csr_matrix((v, (r, c)), shape=(nx * b, nx * b))
        return J, self.extended_residual(U, omega, ref)

    def extended_residual(self, U, omega, ref):
        nx, nd = self.grid.N_x, self.grid.N_tau * self.system.d
        R = np.zeros((nx, nd + 1))
        R[:, :nd] = self.residual(U, omega).reshape(nx, nd)
        R[-1, nd] = self.phase(U, ref)
        return R.ravel()


class _BandedLU:
    """LAPACK banded LU of a sparse matrix with small bandwidth."""

    def __init__(self, J: sparse.spmatrix):
        coo = J.tocoo()
        off = coo.row - coo.col
        self.kl, self.ku = int(max(off.max(), 0)), int(max(-off.min(), 0))
        n = J.shape[0]
        ab = np.zeros((2 * self.kl + self.ku + 1, n))
        ab[self.kl + self.ku + coo.row - coo.col, coo.col] = coo.data
        self.lub, self.piv, info = lapack.dgbtrf(ab, self.kl, self.ku)
        if info > 0:
            raise SingularJacobian(f"zero pivot at position {info}")

    def solve(self, rhs):
        x, info = lapack.dgbtrs(self.lub, self.kl, self.ku, rhs, self.piv)
        return x


def assemble_residual(system: ReactionDiffusionSystem, grid: SpaceTimeGrid, U: np.ndarray,
                      omega: float, ref: np.ndarray | None = None) -> np.ndarray:
    """Interior rows of ``omega u_tau - D u_xx - f(u)`` plus the phase row when ``ref`` is given.

    The Neumann rows are built into the reflected stencils, so the discrete
    ``u_x(+-L)`` vanishes identically; :func:`boundary_residual` reports it.
    """
    U = np.asarray(U, dtype=float)
    if U.shape != (grid.N_x, grid.N_tau, system.d):
        raise ShapeMismatch(f"U has shape {U.shape}, expected {(grid.N_x, grid.N_tau, system.d)}")
    if ref is not None and np.shape(ref) != U.shape:
        raise ShapeMismatch("reference has the wrong shape")
    return _Discretisation(system, grid).residual(U, omega, ref)


def boundary_residual(grid: SpaceTimeGrid, U: np.ndarray) -> float:
    """``max |u_x(+-L, tau)|`` from the discrete derivative operator."""
    Ux = (grid.Dx @ U.reshape(grid.N_x, -1))
    return float(max(np.max(np.abs(Ux[0])), np.max(np.abs(Ux[-1]))))


def _bordered_step(J, R, n_x, nd, shape):
    lu = _BandedLU(J)
    step = lu.solve(-R)
    step += lu.solve(-R - J @ step)
    if not np.all(np.isfinite(step)):
        raise SingularJacobian("non-finite Newton step")
    step = step.reshape(n_x, nd + 1)
    return step[:, :nd].reshape(shape), float(step[0, nd])


def newton_solve(system: ReactionDiffusionSystem, grid: SpaceTimeGrid, U0: np.ndarray,
                 omega0: float, ref: np.ndarray | None = None, tol: float = 1e-10,
                 max_iter: int = 30, omega_d: float | None = None,
                 orientation: int = 1, pseudo_time: float = 0.0) -> TruncatedDefect:
    """Newton iteration for ``(U, omega)``.

    The bordered system is made banded by replicating ``omega`` on every
    node (see ``_Discretisation.extended_system``) and solved by a LAPACK
    banded LU with one round of iterative refinement.

    Parameters
    ----------
    pseudo_time : float
        Initial shift ``sigma`` for pseudo-transient continuation.  With
        ``sigma > 0`` the step solves ``(J + sigma I_U) dz = -R``, where
        ``I_U`` is the identity on the field unknowns, and ``sigma`` follows
        the residual (switched evolution relaxation) until it drops below
        ``1e-12``, after which plain Newton steps finish the solve.  This
        damps the slow phase-diffusion modes of long domains, whose Jacobian
        eigenvalues scale like ``L**-2``.  With ``sigma = 0`` a step that
        raises the residual is halved up to six times.

    Raises
    ------
    NewtonDiverged
        If the residual is above ``tol`` after ``max_iter`` iterations or the
        line search fails.
    SingularJacobian
        On a zero pivot or a non-finite step.
    """
    start = time.perf_counter()
    U = np.array(U0, dtype=float)
    if U.shape != (grid.N_x, grid.N_tau, system.d):
        raise ShapeMismatch(f"U0 has shape {U.shape}")
    ref = U.copy() if ref is None else np.asarray(ref, dtype=float)
    disc = _Discretisation(system, grid)
    omega = float(omega0)
    nd = grid.N_tau * system.d
    shift_diag = None
    sigma = float(pseudo_time)
    if sigma > 0:
        mask = np.zeros((grid.N_x, nd + 1))
        mask[:, :nd] = 1.0
        shift_diag = sparse.diags(mask.ravel())
    R = disc.extended_residual(U, omega, ref)
    hist = [float(np.max(np.abs(R)))]
    it = 0
    while hist[-1] > tol:
        if it >= max_iter:
            raise NewtonDiverged(f"residual {hist[-1]:.3g} after {max_iter} iterations")
        it += 1
        J, _ = disc.extended_system(U, omega, ref)
        if sigma > 0:
            J = J + sigma * shift_diag
        dU, dom = _bordered_step(J, R, grid.N_x, nd, U.shape)
        if sigma > 0:
            U_new, om_new = U + dU, omega + dom
            R_new = disc.extended_residual(U_new, om_new, ref)
            r_new = float(np.max(np.abs(R_new)))
            if not np.isfinite(r_new) or r_new > 10 * hist[-1]:
                sigma *= 10.0  # reject and take a shorter pseudo-time step
                continue
            sigma *= r_new / hist[-1]
            if sigma < 1e-12:
                sigma = 0.0
        else:
            lam = 1.0
            for _ in range(7):
                U_new = U + lam * dU
                om_new = omega + lam * dom
                R_new = disc.extended_residual(U_new, om_new, ref)
                r_new = float(np.max(np.abs(R_new)))
                if r_new < hist[-1] or r_new < tol:
                    break
                lam *= 0.5
            else:
                raise NewtonDiverged(f"line search failed at residual {hist[-1]:.3g}")
        U, omega, R = U_new, om_new, R_new
        hist.append(r_new)
    return TruncatedDefect(grid, U, omega, hist[-1], it, hist, omega_d, orientation,
                           boundary_residual(grid, U), disc.phase(U, ref),
                           time.perf_counter() - start)


# ---------------------------------------------------------------------------
# initial guesses and continuation


def build_initial_guess(wt: WaveTrain, grid: SpaceTimeGrid, jump: float = math.pi,
                        width: float | None = None, profile: str = "phase") -> np.ndarray:
    """Phase-jump ansatz built from the homogeneous oscillation.

    ``profile="phase"`` gives ``W(tau + theta(x))`` with
    ``theta = (jump/2) tanh(x/width)``.  ``profile="blend"`` mixes the two
    asymptotic translates ``W(tau -+ jump/2)`` with weights ``(1 -+ tanh)/2``;
    for ``jump = pi`` it satisfies ``u(-x, tau) = u(x, tau + pi)`` exactly.
    """
    width = grid.L / 4 if width is None else width
    if not 0 < width < grid.L / 2 + 1e-12:
        raise ValueError("width must lie in (0, L/2)")
    x = grid.x_nodes
    th = np.tanh(x / width)
    tau = grid.tau
    if profile == "phase":
        theta = 0.5 * jump * th
        return np.stack([wt(tau + t) for t in theta])
    if profile == "blend":
        left = wt(tau - 0.5 * jump)
        right = wt(tau + 0.5 * jump)
        return 0.5 * ((1 - th)[:, None, None] * left[None] + (1 + th)[:, None, None] * right[None])
    raise ValueError(f"unknown profile {profile!r}")


def _stretch_map(t, L_new, L_old, core):
    """Smooth increasing map of ``[0, L_new]`` onto ``[0, L_old]``.

    Its slope is ``1 - (1 - q) S(t)`` with ``S`` a tanh step at ``core``, so it
    is close to the identity inside the core.
    """
    w = 0.5 * core

    def int_S(z):
        lc = lambda v: np.logaddexp(v, -v) - np.log(2.0)  # noqa: E731
        return 0.5 * (z + w * (lc((z - core) / w) - lc(-core / w)))

    k = (L_new - L_old) / int_S(L_new)
    return t - k * int_S(t)


def regrid(defect: TruncatedDefect, grid: SpaceTimeGrid, core: float = 5.0,
           mode: str = "auto") -> np.ndarray:
    """Transfer a solution to ``grid``.

    ``mode="index"`` copies values node by node, which requires grids with
    the same fixed core (:meth:`SpaceTimeGrid.same_core`); the tails are then
    stretched along with the domain and the core is not interpolated at all.
    ``mode="stretch"`` uses clamped cubic splines and a smooth map that leaves
    ``|x| < core`` nearly fixed while compressing the tails onto the old
    tails.  ``mode="pad"`` extends the old solution by its boundary values.
    ``mode="auto"`` picks ``index`` when possible and ``stretch`` otherwise.
    """
    old = defect.grid
    if grid.N_tau != old.N_tau:
        raise ShapeMismatch("regridding in tau is not supported")
    if mode == "auto":
        mode = "index" if grid.same_core(old) else "stretch"
    if mode == "index":
        if not grid.same_core(old):
            raise ShapeMismatch("index transfer needs grids with the same core")
        return defect.U.copy()
    flat = defect.U.reshape(old.N_x, -1)
    spline = interpolate.CubicSpline(old.x_nodes, flat, axis=0, bc_type="clamped")
    x = grid.x_nodes
    if mode == "pad":
        xo = np.clip(x, -old.L, old.L)
    elif mode == "stretch":
        xo = np.sign(x) * _stretch_map(np.abs(x), grid.L, old.L, min(core, 0.25 * old.L))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return spline(xo).reshape(grid.N_x, *defect.U.shape[1:])


def continue_in_L(system: ReactionDiffusionSystem, defect: TruncatedDefect,
                  L_schedule: Sequence[float], grid: SpaceTimeGrid | None = None,
                  tol: float = 1e-10, max_iter: int = 400, max_ratio: float = 2.0,
                  core_offset: float = 6.0, pseudo_time: float = 1e-3,
                  callback=None) -> list:
    """Re-converge the defect along an increasing schedule of half-lengths.

    Parameters
    ----------
    grid : SpaceTimeGrid, optional
        Template for the continuation grids (only ``L`` changes).  Defaults
        to the grid of ``defect``.  With a fixed-core template every step
        after the first is a node-by-node transfer.
    max_ratio : float
        Steps longer than this factor are split geometrically; only the
        members at the scheduled lengths are returned.
    core_offset : float
        The frequency guess follows ``omega - omega_d ~ (L + core_offset)**-2``,
        the shape of the passage law with an effective core width.
    pseudo_time : float
        Initial pseudo-time shift passed to :func:`newton_solve`.
    callback : callable, optional
        Called with every converged defect, including intermediate steps.

    Raises
    ------
    ContinuationStall
        If Newton fails at some length; ``last_good_L`` records the last
        converged half-length.
    """
    if any(b <= a for a, b in zip(L_schedule, L_schedule[1:])):
        raise ValueError("L_schedule must be increasing")
    template = defect.grid if grid is None else grid
    out = []
    prev, older = defect, None
    for L in L_schedule:
        nsub = max(1, math.ceil(math.log(L / prev.L) / math.log(max_ratio) - 1e-9)) if L > prev.L else 1
        for Ls in np.geomspace(prev.L, L, nsub + 1)[1:]:
            g = template.resized(float(Ls))
            U0 = regrid(prev, g)
            if older is not None and g.same_core(older.grid) and g.same_core(prev.grid):
                # secant in node-index space, linear in log L
                theta = math.log(Ls / prev.L) / math.log(prev.L / older.L)
                U0 = U0 + theta * (prev.U - older.U)
            om0 = prev.omega
            if prev.omega_d is not None:
                om0 = prev.omega_d + (prev.omega - prev.omega_d) * (
                    (prev.L + core_offset) / (Ls + core_offset)) ** 2
            try:
                d = newton_solve(system, g, U0, om0, tol=tol, max_iter=max_iter,
                                 omega_d=prev.omega_d, orientation=prev.orientation,
                                 pseudo_time=pseudo_time)
            except (NewtonDiverged, SingularJacobian) as exc:
                raise ContinuationStall(f"failed at L={Ls:g}: {exc}", last_good_L=prev.L) from exc
            if callback is not None:
                callback(d)
            prev, older = d, prev
        out.append(prev)
    return out


# ---------------------------------------------------------------------------
# symmetry and uniqueness


def check_reversibility(defect: TruncatedDefect, reverser: str = "Rpi") -> float:
    """Sup-norm defect of ``u(x, tau) = u(-x, tau + shift)`` and ``u_x(x) = -u_x(-x)``.

    ``shift`` is 0 for ``R0`` and ``pi`` for ``Rpi``.
    """
    g = defect.grid
    U = defect.U
    roll = {"R0": 0, "Rpi": g.N_tau // 2}[reverser]
    mirrored = np.roll(U[::-1], -roll, axis=1)
    Ux = (g.Dx @ U.reshape(g.N_x, -1)).reshape(U.shape)
    Ux_m = np.roll(Ux[::-1], -roll, axis=1)
    return float(max(np.max(np.abs(U - mirrored)), np.max(np.abs(Ux + Ux_m))))


def _best_shift(a: np.ndarray, b: np.ndarray, axis: int = 1):
    """Shift ``alpha`` minimising the L2 distance between ``a(. + alpha)`` and ``b``."""
    ca = np.fft.fft(a, axis=axis)
    cb = np.fft.fft(b, axis=axis)
    cross = np.sum(np.conj(cb) * ca, axis=tuple(i for i in range(a.ndim) if i != axis))
    n = a.shape[axis]
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0

    def corr(alpha):
        return -float(np.real(np.sum(cross * np.exp(1j * k * alpha))))

    grid = np.linspace(0, 2 * np.pi, 8 * n, endpoint=False)
    vals = [corr(t) for t in grid]
    i = int(np.argmin(vals))
    h = grid[1] - grid[0]
    res = optimize.minimize_scalar(corr, bracket=(grid[i] - h, grid[i], grid[i] + h), tol=1e-14)
    return float(res.x % (2 * np.pi))


def check_uniqueness_mod_translation(d1: TruncatedDefect, d2: TruncatedDefect):
    """``(alpha_hat, mismatch)`` with ``d1(tau + alpha_hat)`` closest to ``d2``."""
    if d1.U.shape != d2.U.shape or not np.allclose(d1.grid.x_nodes, d2.grid.x_nodes):
        raise ShapeMismatch("defects live on different grids")
    alpha = _best_shift(d1.U, d2.U, axis=1)
    diff = fourier.shift(d1.U, alpha, axis=1) - d2.U
    return alpha, float(np.max(np.abs(diff)))


# ---------------------------------------------------------------------------
# phase coordinates


@dataclass
class PhaseCoordinates:
    x_samples: np.ndarray
    alpha_L: np.ndarray
    y_L: np.ndarray
    fit_residuals: np.ndarray


def _phase_fit(u: np.ndarray, W: np.ndarray, ambiguity_tol: float):
    """Best ``alpha`` with ``u(tau) ~ W(tau + alpha)`` and the rms misfit."""
    n = u.shape[0]
    cu = np.fft.fft(u, axis=0)
    cw = np.fft.fft(W, axis=0)
    cross = np.sum(np.conj(cu) * cw, axis=1)
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0
    norm = float(np.sum(np.abs(cu) ** 2 + np.abs(cw) ** 2)) / n**2

    def obj(alpha):
        return norm - 2.0 * float(np.real(np.sum(cross * np.exp(1j * k * alpha)))) / n**2

    grid = np.linspace(0, 2 * np.pi, 16 * n, endpoint=False)
    vals = np.array([obj(t) for t in grid])
    i = int(np.argmin(vals))
    # local minima of the periodic sample sequence
    mins = np.where((vals <= np.roll(vals, 1)) & (vals <= np.roll(vals, -1)))[0]
    spread = float(vals.max() - vals.min())
    others = [vals[j] for j in mins if abs(((grid[j] - grid[i] + np.pi) % (2 * np.pi)) - np.pi) > 0.5]
    if spread < ambiguity_tol or (others and min(others) - vals[i] < ambiguity_tol * max(spread, 1.0)):
        raise FitAmbiguous("phase fit has no unique minimum")
    h = grid[1] - grid[0]
    res = optimize.minimize_scalar(obj, bracket=(grid[i] - h, grid[i], grid[i] + h), tol=1e-14)
    return float(res.x), math.sqrt(max(obj(res.x), 0.0))


def extract_phase_coordinates(defect: TruncatedDefect, wt: WaveTrain, x_min: float = 4.0,
                              x_max: float | None = None, ambiguity_tol: float = 1e-6) -> PhaseCoordinates:
    """Lifted phase ``alpha_L`` and its derivative ``y_L`` on ``x_min <= x <= x_max``.

    ``alpha_L(x)`` minimises the ``tau``-mean-square distance between
    ``u_L(x, .)`` and ``W(. + alpha)``; successive values are lifted onto the
    nearest branch.  ``y_L`` is the derivative of a clamped-free cubic spline
    through the lifted samples.

    Raises
    ------
    FitAmbiguous
        If the fit at some requested ``x`` has no unique minimum (for example
        where the oscillation amplitude vanishes).
    """
    g = defect.grid
    x_max = g.L if x_max is None else x_max
    sel = np.where((g.x_nodes >= x_min - 1e-12) & (g.x_nodes <= x_max + 1e-12))[0]
    if sel.size < 4:
        raise FitAmbiguous("fewer than four samples in the requested window")
    W = wt(g.tau)
    alphas, res = [], []
    for j in sel:
        a, r = _phase_fit(defect.U[j], W, ambiguity_tol)
        alphas.append(a)
        res.append(r)
    alpha = np.unwrap(np.array(alphas))
    xs = g.x_nodes[sel]
    y = interpolate.CubicSpline(xs, alpha).derivative()(xs)
    return PhaseCoordinates(xs, alpha, y, np.array(res))


def phase_coordinates_of_trivial(defect: TruncatedDefect, wt: WaveTrain) -> PhaseCoordinates:
    return extract_phase_coordinates(defect, wt, x_min=-defect.L)


# ---------------------------------------------------------------------------
# scaling report


@dataclass
class ScalingReport:
    family: list  # (L, epsilon_star, omega)
    fitted_constant: float
    fitted_exponent: float
    normalized_constant: float
    derivative_ratios: list
    distance_to_reference: list
    distance_global_alignment: list
    distance_exponent: float
    y_deviation: list
    y_exponent: float
    phase_drift: list
    phase_drift_fit: tuple
    alpha_deviation: list
    reference_L: float
    reference_error: float
    orientation: int
    notes: list = dc_field(default_factory=list)


def _loglog_slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def sup_orbit_distance(d: TruncatedDefect, ref: TruncatedDefect, per_x: bool = True) -> float:
    """Sup over ``x`` of the distance from ``u_L(x)`` to the ``tau``-orbit of ``ref(x)``.

    ``ref`` is interpolated onto the nodes of ``d``.  With ``per_x=False`` a
    single translate is used for all ``x``.
    """
    g = d.grid
    flat = ref.U.reshape(ref.grid.N_x, -1)
    spline = interpolate.CubicSpline(ref.grid.x_nodes, flat, axis=0, bc_type="clamped")
    R = spline(g.x_nodes).reshape(d.U.shape)
    if not per_x:
        alpha = _best_shift(R, d.U, axis=1)
        return float(np.max(np.abs(fourier.shift(R, alpha, axis=1) - d.U)))
    worst = 0.0
    for j in range(g.N_x):
        alpha = _best_shift(R[j], d.U[j], axis=0)
        worst = max(worst, float(np.max(np.abs(fourier.shift(R[j], alpha, axis=0) - d.U[j]))))
    return worst


def verify_scaling_laws(family: Sequence[TruncatedDefect], wt: WaveTrain,
                    reference: TruncatedDefect | None = None, eps_sq_scale: float = 1.0,
                    x_core: float = 4.0) -> ScalingReport:
    """Fit the scaling laws of a dyadic family of truncated defects.

    Parameters
    ----------
    family : sequence of TruncatedDefect
        At least four members with distinct ``L``.
    reference : TruncatedDefect, optional
        Stand-in for the defect on the whole line; defaults to the largest
        member, which is then excluded from the distance fits.
    eps_sq_scale : float
        Converts ``omega - omega_d`` into the normalised ``eps**2`` of the
        reduced saddle-node, so that ``normalized_constant`` is comparable
        with the scalar passage constant.
    """
    fam = sorted(family, key=lambda d: d.L)
    if len(fam) < 4:
        raise InsufficientFamily("need at least four members")
    notes = []
    if reference is None:
        reference = fam[-1]
        fam_d = fam[:-1]
        notes.append("reference is the largest member")
    else:
        fam_d = [d for d in fam if d.L < reference.L]
    Ls = np.array([d.L for d in fam])
    eps = np.array([d.epsilon_star for d in fam])
    if np.any(np.diff(eps) >= 0):
        notes.append("epsilon_star is not strictly decreasing")
    slope = _loglog_slope(Ls, eps)
    X = np.column_stack([np.ones_like(Ls), 1 / Ls, 1 / Ls**2])[:, : min(3, len(Ls) - 1)]
    const = float(np.linalg.lstsq(X, eps * Ls, rcond=None)[0][0])
    norm_const = const * math.sqrt(eps_sq_scale)
    # derivative of eps* against -c/L^2 at interior midpoints
    ratios = []
    for i in range(len(Ls) - 1):
        Lm = math.sqrt(Ls[i] * Ls[i + 1])
        fd = (eps[i + 1] - eps[i]) / (Ls[i + 1] - Ls[i])
        # secant slope of c/(L + l0) between the two points equals -c/(L_i L_{i+1})
        ratios.append((float(Lm), float(fd / (-const / (Ls[i] * Ls[i + 1])))))

    dist = [(d.L, sup_orbit_distance(d, reference)) for d in fam_d]
    dist_g = [(d.L, sup_orbit_distance(d, reference, per_x=False)) for d in fam_d]
    d_exp = _loglog_slope([a for a, _ in dist], [b for _, b in dist])

    pc_ref = extract_phase_coordinates(reference, wt, x_min=x_core)
    y_ref = interpolate.CubicSpline(pc_ref.x_samples, pc_ref.y_L)
    a_ref = interpolate.CubicSpline(pc_ref.x_samples, pc_ref.alpha_L)
    y_dev, drift, a_dev = [], [], []
    for d in fam:
        pc = extract_phase_coordinates(d, wt, x_min=x_core)
        drift.append((d.L, float(abs(pc.alpha_L[-1] - pc.alpha_L[0]))))
        if d.L < reference.L:
            y_dev.append((d.L, float(np.max(np.abs(y_ref(pc.x_samples) - pc.y_L)))))
            rel = a_ref(pc.x_samples) - a_ref(pc.x_samples[0]) - (pc.alpha_L - pc.alpha_L[0])
            a_dev.append((d.L, float(np.max(np.abs(rel)))))
    y_exp = _loglog_slope([a for a, _ in y_dev], [b for _, b in y_dev])
    A = np.column_stack([np.log([a for a, _ in drift]), np.ones(len(drift))])
    coef, *_ = np.linalg.lstsq(A, [b for _, b in drift], rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - np.array([b for _, b in drift])) ** 2)))

    # surrogate error: distance between the two largest members on the smaller domain
    if len(fam) >= 2 and fam[-1] is not reference:
        ref_err = sup_orbit_distance(fam[-1], reference)
    else:
        ref_err = sup_orbit_distance(fam[-2], fam[-1])
    return ScalingReport(
        family=[(d.L, d.epsilon_star, d.omega) for d in fam],
        fitted_constant=const,
        fitted_exponent=slope,
        normalized_constant=norm_const,
        derivative_ratios=ratios,
        distance_to_reference=dist,
        distance_global_alignment=dist_g,
        distance_exponent=d_exp,
        y_deviation=y_dev,
        y_exponent=y_exp,
        phase_drift=drift,
        phase_drift_fit=(float(coef[0]), float(coef[1]), resid),
        alpha_deviation=a_dev,
        reference_L=reference.L,
        reference_error=ref_err,
        orientation=fam[0].orientation,
        notes=notes,
    )
