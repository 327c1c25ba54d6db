"""Flat key = value pipeline configuration with CLI overrides.

Precedence is command line > config file > defaults.  The file format is
one ``key = value`` per line; blank lines and lines starting with ``#``
are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError


@dataclass
class PipelineConfig:
    """Every knob the pipeline commands read."""

    # dataset identity and layout
    name: str = "dataset"
    out_dir: str = "out"
    seed: int = 0

    # signal source: "sin" synthesises windows, "csv" ingests a recording
    source: str = "sin"
    csv_path: str = ""
    csv_rate_hz: float = 0.0
    resample_hz: float = 0.0  # 0 disables resampling
    count: int = 512
    window_len: int = 256
    stride: int = 0  # 0 means stride = window_len
    rate_hz: float = 256.0
    amp_lo: float = 0.5
    amp_hi: float = 1.0
    freq_lo: float = 1.0
    freq_hi: float = 8.0

    # rasterisation
    width: int = 16
    height: int = 16
    spec_mode: str = "computed"  # "computed" (dataset min/max) or "explicit"
    spec_lo: float = -1.0
    spec_hi: float = 1.0

    # training
    latent_dim: int = 64
    gen_hidden: str = "256,512"
    critic_hidden: str = "512,256"
    gp_lambda: float = 10.0
    n_critic: int = 5
    adam_lr: float = 1e-4
    adam_beta1: float = 0.0
    adam_beta2: float = 0.9
    epochs: int = 10
    batch_size: int = 32

    # metrics and filtering
    mmd_bandwidth: str = "median"  # "median" or a positive number
    cutoff_hz: float = 10.0
    taps: int = 101

    def hidden_sizes(self, key: str) -> tuple[int, ...]:
        raw = getattr(self, key)
        try:
            sizes = tuple(int(part) for part in str(raw).split(",") if part.strip())
        except ValueError:
            raise ConfigError(f"{key} must be a comma list of integers, got {raw!r}") from None
        if not sizes or any(s < 1 for s in sizes):
            raise ConfigError(f"{key} must name positive layer sizes, got {raw!r}")
        return sizes


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"config key {key!r} expects {kind}, got {raw!r}") from None


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    """Parse ``key = value`` lines into a {field: coerced value} dict."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, raw = stripped.partition("=")
        if not sep:
            raise ConfigError(f"{origin}: line {lineno}: expected key = value")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{origin}: line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw.strip())
    return values


def load_config(
    path: str | Path | None = None, overrides: dict | None = None
) -> PipelineConfig:
    """Build a config from defaults, an optional file, and CLI overrides."""
    values: dict = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8"), str(path)))
    for key, raw in (overrides or {}).items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, raw) if isinstance(raw, str) else raw
    return PipelineConfig(**values)
