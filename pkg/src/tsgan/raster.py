"""Bidirectional codec between fixed-length amplitude windows and 8-bit
grayscale raster images, plus bit-exact binary PGM (P5) file I/O.

Sample i of a window maps to pixel i in row-major order; the amplitude
range [lo, hi] of a QuantizationSpec maps affinely onto gray levels
0..255 with clamping, rounding half away from zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError

LEVELS = 256


@dataclass(frozen=True)
class QuantizationSpec:
    """Amplitude range mapped onto the 256 gray levels."""

    lo: float
    hi: float
    levels: int = LEVELS

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ParameterError(f"need lo < hi, got lo={self.lo}, hi={self.hi}")
        if self.levels != LEVELS:
            raise ParameterError(f"levels is fixed at {LEVELS}, got {self.levels}")

    @property
    def step(self) -> float:
        """Amplitude interval covered by one gray level."""
        return (self.hi - self.lo) / (LEVELS - 1)


@dataclass(frozen=True)
class RasterImage:
    """A width x height grid of 8-bit pixels with its decoding spec."""

    width: int
    height: int
    pixels: np.ndarray  # uint8, length width*height, row-major
    spec: QuantizationSpec

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ParameterError(f"bad image dims {self.width}x{self.height}")
        pixels = np.asarray(self.pixels, dtype=np.uint8)
        object.__setattr__(self, "pixels", pixels)
        if pixels.ndim != 1 or pixels.size != self.width * self.height:
            raise ParameterError(
                f"pixel count {pixels.size} != {self.width}x{self.height}"
            )


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round to nearest integer with halves away from zero (not banker's)."""
    values = np.asarray(values, dtype=np.float64)
    return np.where(values >= 0, np.floor(values + 0.5), np.ceil(values - 0.5))


def encode(
    window: np.ndarray, spec: QuantizationSpec, width: int, height: int
) -> RasterImage:
    """Quantize a window of width*height samples into a raster image.

    Samples are clamped to [spec.lo, spec.hi] before quantization, so
    out-of-range values saturate at gray 0 or 255.
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 1 or window.size != width * height:
        raise ParameterError(
            f"window length {window.size} != {width}x{height} = {width * height}"
        )
    clamped = np.clip(window, spec.lo, spec.hi)
    scaled = (clamped - spec.lo) / (spec.hi - spec.lo) * (LEVELS - 1)
    pixels = round_half_away(scaled).astype(np.uint8)
    return RasterImage(width, height, pixels, spec)


def decode(image: RasterImage) -> np.ndarray:
    """Map pixels back to amplitudes: lo + p/255 * (hi - lo), row-major."""
    spec = image.spec
    return spec.lo + image.pixels.astype(np.float64) / (LEVELS - 1) * (spec.hi - spec.lo)


def write_pgm(image: RasterImage, path: str | Path) -> None:
    """Write a binary PGM (P5, maxval 255) with a canonical 3-line header."""
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + image.pixels.tobytes())


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    while pos < len(data) and data[pos : pos + 1].isspace():
        pos += 1
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise FormatError("truncated PGM header")
    return data[start:pos], pos


def read_pgm(path: str | Path, spec: QuantizationSpec) -> RasterImage:
    """Read a binary PGM written by :func:`write_pgm`.

    Only P5 with maxval 255 is accepted; the pixel payload must match the
    header dimensions exactly.
    """
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {data[:2]!r})")
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _next_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise FormatError(f"{path}: bad header token {token!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"{path}: bad dimensions {width}x{height}")
    if maxval != 255:
        raise FormatError(f"{path}: unsupported maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    payload = data[pos:]
    if len(payload) != width * height:
        raise FormatError(
            f"{path}: expected {width * height} pixel bytes, got {len(payload)}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8)
    return RasterImage(width, height, pixels, spec)


def write_spec_sidecar(spec: QuantizationSpec, path: str | Path) -> None:
    """Write the dataset quantization range as a 3-line text sidecar."""
    Path(path).write_text(
        f"lo={spec.lo!r}\nhi={spec.hi!r}\nlevels={spec.levels}\n", encoding="utf-8"
    )


def read_spec_sidecar(path: str | Path) -> QuantizationSpec:
    """Read a sidecar written by :func:`write_spec_sidecar`."""
    entries = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"{path}: line {lineno}: expected key=value")
        entries[key.strip()] = value.strip()
    missing = {"lo", "hi", "levels"} - entries.keys()
    if missing:
        raise FormatError(f"{path}: missing keys {sorted(missing)}")
    try:
        lo, hi, levels = float(entries["lo"]), float(entries["hi"]), int(entries["levels"])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return QuantizationSpec(lo, hi, levels)
