"""Spectra and low-pass filtering for real/synthetic signal comparison.

The FFT is an iterative radix-2 Cooley-Tukey transform (pipeline windows
are always 256 or 4096 samples).  The low-pass filter is a Hamming
windowed sinc FIR applied zero-phase with edge-replication padding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class Spectrum:
    """One-sided magnitude spectrum of a real window of length n."""

    magnitudes: np.ndarray  # length n//2 + 1
    bin_hz: float
    n: int

    def __post_init__(self) -> None:
        magnitudes = np.asarray(self.magnitudes, dtype=np.float64)
        object.__setattr__(self, "magnitudes", magnitudes)
        if magnitudes.ndim != 1 or magnitudes.size != self.n // 2 + 1:
            raise ParameterError(
                f"expected {self.n // 2 + 1} magnitudes, got {magnitudes.size}"
            )
        if (magnitudes < 0).any():
            raise ParameterError("magnitudes must be non-negative")

    @property
    def frequencies_hz(self) -> np.ndarray:
        return np.arange(self.magnitudes.size) * self.bin_hz


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def fft_complex(x: np.ndarray) -> np.ndarray:
    """Full complex DFT of a power-of-two-length array, radix-2 in-place."""
    a = np.asarray(x, dtype=np.complex128).copy()
    n = a.size
    if a.ndim != 1 or not _is_pow2(n):
        raise ParameterError(f"FFT length must be a power of two, got {a.shape}")
    if n == 1:
        return a

    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    a = a[rev]

    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = a.reshape(n // size, size)
        even = blocks[:, :half]
        odd = blocks[:, half:] * twiddle
        upper = even + odd
        lower = even - odd
        blocks[:, :half] = upper
        blocks[:, half:] = lower
        size *= 2
    return a


def fft_magnitude(window: np.ndarray, rate_hz: float) -> Spectrum:
    """One-sided magnitude spectrum |Y_k| for k = 0..N/2."""
    window = np.asarray(window, dtype=np.float64)
    if not rate_hz > 0:
        raise ParameterError(f"rate_hz must be positive, got {rate_hz}")
    spectrum = fft_complex(window)
    n = window.size
    return Spectrum(np.abs(spectrum[: n // 2 + 1]), rate_hz / n, n)


def design_lowpass(cutoff_hz: float, rate_hz: float, taps: int = 101) -> np.ndarray:
    """Hamming windowed-sinc low-pass coefficients, normalized to DC gain 1."""
    if taps < 1 or taps % 2 == 0:
        raise ParameterError(f"taps must be odd and positive, got {taps}")
    if not 0 < cutoff_hz < rate_hz / 2:
        raise ParameterError(
            f"cutoff {cutoff_hz} Hz must lie in (0, Nyquist={rate_hz / 2} Hz)"
        )
    m = (taps - 1) // 2
    n = np.arange(taps) - m
    fc = cutoff_hz / rate_hz  # cycles per sample
    ideal = 2.0 * fc * np.sinc(2.0 * fc * n)
    if taps == 1:
        window = np.ones(1)
    else:
        window = 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(taps) / (taps - 1))
    h = ideal * window
    return h / h.sum()


def frequency_response(h: np.ndarray, freq_hz: float, rate_hz: float) -> complex:
    """H(f) = sum_k h[k] exp(-2*pi*i*f*k/rate) of an FIR design."""
    k = np.arange(len(h))
    return complex(np.sum(h * np.exp(-2j * np.pi * freq_hz * k / rate_hz)))


def lowpass_fir(
    window: np.ndarray, cutoff_hz: float, rate_hz: float, taps: int = 101
) -> np.ndarray:
    """Zero-phase low-pass filtering; output length equals input length.

    The input is extended by replicating its edge samples for half the
    filter length on each side, which avoids amplitude droop at window
    boundaries; the first and last (taps-1)/2 output samples still carry
    that transient.
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 1 or window.size == 0:
        raise ParameterError("window must be a non-empty 1-D array")
    h = design_lowpass(cutoff_hz, rate_hz, taps)
    m = (taps - 1) // 2
    padded = np.concatenate(
        [np.full(m, window[0]), window, np.full(m, window[-1])]
    )
    return np.convolve(padded, h, mode="valid")


def dominant_frequency(spectrum: Spectrum) -> float:
    """Frequency of the strongest non-DC bin; ties go to the lower bin."""
    mags = spectrum.magnitudes
    if mags.size < 2:
        raise ParameterError("spectrum has no non-DC bins")
    return float((1 + int(np.argmax(mags[1:]))) * spectrum.bin_hz)
