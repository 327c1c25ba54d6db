"""Signal sources and windowing: sinusoid generation, CSV ingestion,
linear resampling, and segmentation into fixed-length windows."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError


@dataclass(frozen=True)
class TimeSeries:
    """A rate-stamped 1-D array of amplitude samples."""

    samples: np.ndarray
    rate_hz: float
    label: str = ""

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ParameterError("samples must be a non-empty 1-D array")
        if not np.isfinite(samples).all():
            raise ParameterError("samples contain non-finite values")
        if not self.rate_hz > 0:
            raise ParameterError(f"rate_hz must be positive, got {self.rate_hz}")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.rate_hz


@dataclass(frozen=True)
class WindowSet:
    """A stack of equal-length windows cut or synthesised from a signal."""

    windows: np.ndarray  # (count, window_len)
    rate_hz: float
    provenance: str = ""

    def __post_init__(self) -> None:
        windows = np.asarray(self.windows, dtype=np.float64)
        object.__setattr__(self, "windows", windows)
        if windows.ndim != 2 or windows.size == 0:
            raise ParameterError("windows must be a non-empty (count, window_len) array")
        if not np.isfinite(windows).all():
            raise ParameterError("windows contain non-finite values")
        if not self.rate_hz > 0:
            raise ParameterError(f"rate_hz must be positive, got {self.rate_hz}")

    def __len__(self) -> int:
        return self.windows.shape[0]

    @property
    def window_len(self) -> int:
        return self.windows.shape[1]


def _check_interval(name: str, lo: float, hi: float) -> None:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ParameterError(f"{name} bounds must be finite, got [{lo}, {hi}]")
    if lo > hi:
        raise ParameterError(f"{name} is empty: lo={lo} > hi={hi}")
    if lo <= 0:
        raise ParameterError(f"{name} bounds must be positive, got [{lo}, {hi}]")


def generate_sinusoids(
    count: int,
    window_len: int,
    amp_range: tuple[float, float] = (0.5, 1.0),
    freq_range_hz: tuple[float, float] = (1.0, 8.0),
    rate_hz: float = 256.0,
    seed: int = 0,
) -> WindowSet:
    """Synthesise ``count`` windows of A*sin(2*pi*f*n/rate + phi).

    Amplitude, frequency, and phase are drawn uniformly from their ranges
    (phase from [0, 2*pi)).  Window ``i`` uses its own generator seeded with
    ``seed + i``, so output is reproducible and windows may be generated in
    any order or in parallel.
    """
    if count < 1:
        raise ParameterError(f"count must be positive, got {count}")
    if window_len < 1:
        raise ParameterError(f"window_len must be positive, got {window_len}")
    if not rate_hz > 0:
        raise ParameterError(f"rate_hz must be positive, got {rate_hz}")
    _check_interval("amp_range", *amp_range)
    _check_interval("freq_range_hz", *freq_range_hz)
    if freq_range_hz[1] >= rate_hz / 2:
        raise ParameterError(
            f"frequency bound {freq_range_hz[1]} Hz is at or above Nyquist "
            f"({rate_hz / 2} Hz)"
        )

    n = np.arange(window_len, dtype=np.float64)
    windows = np.empty((count, window_len), dtype=np.float64)
    for i in range(count):
        rng = np.random.default_rng(seed + i)
        amp = rng.uniform(amp_range[0], amp_range[1])
        freq = rng.uniform(freq_range_hz[0], freq_range_hz[1])
        phase = rng.uniform(0.0, 2.0 * np.pi)
        windows[i] = amp * np.sin(2.0 * np.pi * freq * n / rate_hz + phase)
    return WindowSet(windows, rate_hz, provenance=f"sin:count={count}:seed={seed}")


def load_csv(path: str | Path, rate_hz: float, label: str = "") -> TimeSeries:
    """Read a one-column CSV of amplitudes, one real per line.

    A single leading header line is skipped if its content does not parse
    as a number.  Raises FormatError naming the offending line for any
    non-numeric body line, and for an empty body.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    start = 0
    if lines:
        try:
            float(lines[0])
        except ValueError:
            start = 1
    values = []
    for lineno, line in enumerate(lines[start:], start=start + 1):
        try:
            values.append(float(line))
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: not a number: {line!r}") from None
    if not values:
        raise FormatError(f"{path}: no data lines")
    return TimeSeries(np.array(values, dtype=np.float64), rate_hz, label)


def resample_linear(series: TimeSeries, target_rate_hz: float) -> TimeSeries:
    """Resample by linear interpolation onto a grid of spacing 1/target_rate.

    The output has floor((len-1)*target/source) + 1 samples, so it never
    extrapolates beyond the last source sample.
    """
    if not target_rate_hz > 0:
        raise ParameterError(f"target_rate_hz must be positive, got {target_rate_hz}")
    src = series.samples
    if src.size < 2:
        raise ParameterError("resampling needs at least 2 samples")
    out_len = math.floor((src.size - 1) * target_rate_hz / series.rate_hz) + 1
    t_out = np.arange(out_len, dtype=np.float64) / target_rate_hz
    t_src = np.arange(src.size, dtype=np.float64) / series.rate_hz
    out = np.interp(t_out, t_src, src)
    return TimeSeries(out, target_rate_hz, series.label)


def segment(series: TimeSeries, window_len: int, stride: int | None = None) -> WindowSet:
    """Cut the series into windows at offsets 0, stride, 2*stride, ...

    A trailing partial window is dropped.  ``stride`` defaults to
    ``window_len`` (non-overlapping).
    """
    if stride is None:
        stride = window_len
    if window_len < 1:
        raise ParameterError(f"window_len must be positive, got {window_len}")
    if stride < 1:
        raise ParameterError(f"stride must be positive, got {stride}")
    src = series.samples
    if window_len > src.size:
        raise ParameterError(
            f"window_len {window_len} exceeds series length {src.size}"
        )
    count = (src.size - window_len) // stride + 1
    windows = np.stack([src[i * stride : i * stride + window_len] for i in range(count)])
    return WindowSet(
        windows, series.rate_hz, provenance=f"segment:{series.label}:stride={stride}"
    )
