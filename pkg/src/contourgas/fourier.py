"""Periodic spectral helpers on an equispaced grid t_j = 2 pi j / M.

M is always even. The Nyquist mode is treated as a pure cosine: it is
dropped by odd operators (derivatives) and kept by even ones (|k|).
"""
import numpy as np


def nodes(M):
    return 2 * np.pi * np.arange(M) / M


def wavenumbers(M):
    """Integer wavenumbers in FFT order; the Nyquist entry is -M/2."""
    return np.fft.fftfreq(M, 1.0 / M)


def _real_if(f, out):
    return out.real if np.isrealobj(f) else out


def ddt(f):
    """Spectral derivative along the last axis."""
    f = np.asarray(f)
    M = f.shape[-1]
    k = wavenumbers(M)
    k[M // 2] = 0.0
    return _real_if(f, np.fft.ifft(1j * k * np.fft.fft(f, axis=-1), axis=-1))


def abs_k(f):
    """Apply the multiplier |k| (Nyquist kept as a cosine)."""
    f = np.asarray(f)
    M = f.shape[-1]
    k = np.abs(wavenumbers(M))
    return _real_if(f, np.fft.ifft(k * np.fft.fft(f, axis=-1), axis=-1))


def abs_k_matrix(M):
    """Dense circulant matrix of the |k| multiplier."""
    k = np.abs(wavenumbers(M))
    col = np.fft.ifft(k).real
    idx = (np.arange(M)[:, None] - np.arange(M)[None, :]) % M
    return col[idx]


def mean(f):
    return np.mean(f, axis=-1)


def periodic_sinc(x, M):
    """Cardinal function of even-M trigonometric interpolation."""
    x = np.asarray(x, dtype=float)
    half = np.sin(0.5 * x)
    out = np.ones_like(x)
    small = np.abs(half) < 1e-14
    xs = x[~small]
    out[~small] = np.sin(0.5 * M * xs) / (M * np.tan(0.5 * xs))
    return out


def interp_matrix(targets, M):
    """Matrix E with (E f)_i = trigonometric interpolant of f at targets[i]."""
    targets = np.asarray(targets, dtype=float)
    return periodic_sinc(targets[:, None] - nodes(M)[None, :], M)


def interpolate(f, targets):
    f = np.asarray(f)
    return interp_matrix(targets, f.shape[-1]) @ f


def cumulative_integral(f):
    """Spectral antiderivative F(t_j) = int_0^{t_j} f dt."""
    f = np.asarray(f, dtype=float)
    M = f.size
    k = wavenumbers(M)
    F = np.fft.fft(f)
    c0 = F[0].real / M
    G = np.zeros_like(F)
    nz = k != 0
    nz[M // 2] = False
    G[nz] = F[nz] / (1j * k[nz])
    periodic = np.fft.ifft(G).real
    return c0 * nodes(M) + periodic - periodic[0]


def tail_ratio(f, width=2):
    """Largest |Fourier coefficient| among the top `width` modes, relative to the max."""
    F = np.abs(np.fft.fft(np.asarray(f)))
    M = F.size
    peak = F.max()
    if peak == 0.0:
        return 0.0
    k = np.abs(wavenumbers(M))
    return F[k > M // 2 - width].max() / peak
