"""Signal-processing kernels: preprocessing, Goertzel, DFT oracle, radix-2 FFT, monopulse."""

from __future__ import annotations

import numpy as np


def mti_mean_removal(frame: np.ndarray) -> np.ndarray:
    """Remove the fast-time mean of every chirp, then the slow-time mean of every sample index.

    Works on any array whose last two axes are (chirp, sample).
    """
    x = np.asarray(frame, dtype=np.float64)
    x = x - x.mean(axis=-1, keepdims=True)
    return x - x.mean(axis=-2, keepdims=True)


def minmax_normalize(frame: np.ndarray, axes=None) -> np.ndarray:
    """Scale to [0, 1] over ``axes`` (whole array by default); a flat input maps to zeros."""
    x = np.asarray(frame, dtype=np.float64)
    lo = x.min(axis=axes, keepdims=True)
    span = x.max(axis=axes, keepdims=True) - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (x - lo) / safe, 0.0)


def preprocess(frame: np.ndarray) -> np.ndarray:
    """MTI mean removal followed by whole-frame min-max normalisation."""
    return minmax_normalize(mti_mean_removal(frame))


def preprocess_frames(frames: np.ndarray) -> np.ndarray:
    """Vectorised :func:`preprocess` for an array [frame][antenna][chirp][sample]."""
    return minmax_normalize(mti_mean_removal(frames), axes=(1, 2, 3))


def wrap_phase(phi):
    """Wrap to the half-open interval (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(phi, dtype=np.float64), 2 * np.pi)


def _check_bin(k, n):
    if not 0 <= k < n:
        raise ValueError(f"bin {k} out of range for length {n}")


def naive_dft_bin(samples, k: int) -> complex:
    x = np.asarray(samples, dtype=np.float64)
    n = x.shape[-1]
    _check_bin(k, n)
    total = 0j
    for i in range(n):
        total += x[i] * complex(np.cos(2 * np.pi * k * i / n), -np.sin(2 * np.pi * k * i / n))
    return total


def naive_dft(samples) -> np.ndarray:
    """Full DFT by direct matrix summation (oracle, O(N^2))."""
    x = np.asarray(samples)
    n = x.shape[-1]
    idx = np.arange(n)
    w = np.exp(-2j * np.pi * np.outer(idx, idx) / n)
    return x @ w.T


def goertzel(samples, k: int) -> complex:
    """Single DFT bin X[k] via the second-order Goertzel recursion."""
    x = np.asarray(samples, dtype=np.float64)
    n = x.shape[-1]
    _check_bin(k, n)
    w = 2 * np.pi * k / n
    coeff = 2 * np.cos(w)
    s1 = s2 = 0.0
    for v in x:
        s1, s2 = v + coeff * s1 - s2, s1
    # e^{jwN} = 1, so s[N-1] e^{jw} - s[N-2] already carries the forward-DFT phase
    return complex(s1 * np.cos(w) - s2, s1 * np.sin(w))


def goertzel_many(samples: np.ndarray, k) -> np.ndarray:
    """Goertzel over the last axis for many vectors at once.

    ``k`` is a scalar or an integer array broadcastable to ``samples.shape[:-1]``.
    """
    x = np.asarray(samples, dtype=np.float64)
    n = x.shape[-1]
    k = np.asarray(k)
    if np.any(k < 0) or np.any(k >= n):
        raise ValueError(f"bin out of range for length {n}")
    w = 2 * np.pi * k / n
    coeff = np.broadcast_to(2 * np.cos(w), x.shape[:-1])
    s1 = np.zeros(x.shape[:-1])
    s2 = np.zeros(x.shape[:-1])
    for i in range(n):
        s0 = x[..., i] + coeff * s1 - s2
        s2 = s1
        s1 = s0
    return s1 * np.exp(1j * w) - s2


def _is_pow2(n: int) -> bool:
    return n >= 1 and not n & (n - 1)


def fft_radix2(x: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Iterative decimation-in-time radix-2 FFT along the last axis."""
    a = np.asarray(x, dtype=np.complex128)
    n = a.shape[-1]
    if not _is_pow2(n):
        raise ValueError(f"length {n} is not a power of two")
    bits = n.bit_length() - 1
    rev = np.array([int(format(i, f"0{bits}b")[::-1], 2) if bits else 0 for i in range(n)])
    a = a[..., rev].copy()
    sign = 1.0 if inverse else -1.0
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        blocks = a.reshape(a.shape[:-1] + (n // size, size))
        even = blocks[..., :half].copy()
        odd = blocks[..., half:] * tw
        blocks[..., :half] = even + odd
        blocks[..., half:] = even - odd
        a = blocks.reshape(a.shape)
        size *= 2
    if inverse:
        a = a / n
    return a


def ifft_radix2(x: np.ndarray) -> np.ndarray:
    return fft_radix2(x, inverse=True)


def range_fft(chirp: np.ndarray) -> np.ndarray:
    """Positive-frequency half of the fast-time spectrum (bins 0..N/2-1)."""
    x = np.asarray(chirp, dtype=np.float64)
    return fft_radix2(x)[..., : x.shape[-1] // 2]


def doppler_fft(chirp_coefficients: np.ndarray) -> np.ndarray:
    """Slow-time spectrum of the per-chirp coefficients at one range bin."""
    return fft_radix2(chirp_coefficients)


def monopulse_angle(phase_diff, spacing_wavelengths: float = 0.5):
    """Arrival angle from an inter-antenna phase difference (already wrapped)."""
    if spacing_wavelengths <= 0:
        raise ValueError("spacing must be positive")
    arg = np.clip(np.asarray(phase_diff, dtype=np.float64) / (2 * np.pi * spacing_wavelengths), -1.0, 1.0)
    out = np.arcsin(arg)
    return float(out) if out.ndim == 0 else out
