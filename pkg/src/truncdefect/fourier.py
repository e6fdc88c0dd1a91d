"""Fourier collocation on the circle ``tau in [0, 2 pi)`` with an even node count."""
from __future__ import annotations

import numpy as np


def nodes(n: int) -> np.ndarray:
    if n % 2:
        raise ValueError("node count must be even")
    return 2 * np.pi * np.arange(n) / n


def diff_matrix(n: int) -> np.ndarray:
    """Spectral first-derivative matrix; annihilates the Nyquist mode."""
    h = 2 * np.pi / n
    k = np.arange(n)
    diff = k[:, None] - k[None, :]
    with np.errstate(divide="ignore"):
        D = 0.5 * (-1.0) ** diff / np.tan(diff * h / 2)
    D[diff == 0] = 0.0
    return D


def differentiate(values: np.ndarray, axis: int = 0) -> np.ndarray:
    """Spectral derivative along ``axis`` (Nyquist mode dropped)."""
    n = values.shape[axis]
    c = np.fft.fft(values, axis=axis)
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0
    shape = [1] * values.ndim
    shape[axis] = n
    return np.real(np.fft.ifft(1j * k.reshape(shape) * c, axis=axis))


def resample_matrices(n: int, m: int):
    """Interpolation ``T`` (n -> m nodes) and projection ``P`` (m -> n).

    The Nyquist coefficient of the coarse grid is split evenly between
    wavenumbers ``+-n/2`` on interpolation and summed back on projection,
    so that ``P @ T`` is the identity.
    """
    if m < n or m % 2:
        raise ValueError("fine grid must be even and not coarser")
    Fn = np.fft.fft(np.eye(n), axis=0)  # coefficients of unit vectors
    kn = np.fft.fftfreq(n, 1.0 / n).astype(int)
    C = np.zeros((m, n), dtype=complex)
    for row, k in enumerate(kn):
        if abs(k) == n // 2:
            C[n // 2 % m] += 0.5 * Fn[row]
            C[-(n // 2) % m] += 0.5 * Fn[row]
        else:
            C[k % m] += Fn[row]
    T = np.real(np.fft.ifft(C, axis=0) * (m / n))
    Fm = np.fft.fft(np.eye(m), axis=0)
    Cn = np.zeros((n, m), dtype=complex)
    for k in range(-(n // 2) + 1, n // 2):
        Cn[k % n] = Fm[k % m]
    Cn[n // 2] = Fm[(n // 2) % m] + Fm[-(n // 2) % m]
    P = np.real(np.fft.ifft(Cn, axis=0) * (n / m))
    return T, P


def coefficients(values: np.ndarray) -> np.ndarray:
    """Complex coefficients ``c_k`` for ``k = -(n/2 - 1) .. n/2 - 1`` along axis 0."""
    n = values.shape[0]
    c = np.fft.fft(values, axis=0) / n
    ks = np.arange(-(n // 2) + 1, n // 2)
    return c[ks % n]


def evaluate(coeffs: np.ndarray, tau) -> np.ndarray:
    """Evaluate the trigonometric polynomial with centred coefficients at ``tau``."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    K = (coeffs.shape[0] - 1) // 2
    ks = np.arange(-K, K + 1)
    E = np.exp(1j * np.outer(tau, ks))
    return np.real(E @ coeffs)


def shift(values: np.ndarray, alpha: float, axis: int = 0) -> np.ndarray:
    """Samples of ``u(tau + alpha)`` given samples of ``u`` on the nodes."""
    n = values.shape[axis]
    c = np.fft.fft(values, axis=axis)
    k = np.fft.fftfreq(n, 1.0 / n)
    phase = np.exp(1j * k * alpha)
    phase[n // 2] = np.cos(n // 2 * alpha)
    shape = [1] * values.ndim
    shape[axis] = n
    return np.real(np.fft.ifft(c * phase.reshape(shape), axis=axis))
