"""Two-sample distances between real and generated image sets on raw
pixel features: Frechet distance between fitted Gaussians, unbiased
squared MMD with a Gaussian RBF kernel, and the exact 1-D Wasserstein-1
used to sanity-check critic-based estimates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError
from .raster import RasterImage


@dataclass(frozen=True)
class PixelFeatureSet:
    """Images flattened to rows of pixel values scaled to [0, 1]."""

    vectors: np.ndarray  # (count, dim)

    def __post_init__(self) -> None:
        vectors = np.asarray(self.vectors, dtype=np.float64)
        object.__setattr__(self, "vectors", vectors)
        if vectors.ndim != 2 or vectors.size == 0:
            raise ParameterError("vectors must be a non-empty (count, dim) array")
        if not np.isfinite(vectors).all():
            raise ParameterError("vectors contain non-finite values")
        if vectors.min() < 0 or vectors.max() > 1:
            raise ParameterError("pixel features must lie in [0, 1]")

    @classmethod
    def from_images(cls, images: Iterable[RasterImage]) -> "PixelFeatureSet":
        rows = [img.pixels.astype(np.float64) / 255.0 for img in images]
        if not rows:
            raise ParameterError("no images supplied")
        if len({r.size for r in rows}) != 1:
            raise ParameterError("images have mixed dimensions")
        return cls(np.stack(rows))

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class MetricReport:
    """Summary of a real-vs-generated comparison."""

    fid: float
    mmd: float
    n_real: int
    n_fake: int
    bandwidth: float
    w1_critic: float | None = None

    def __post_init__(self) -> None:
        if self.fid < 0:
            raise ParameterError(f"fid must be non-negative, got {self.fid}")
        if self.n_real < 2 or self.n_fake < 2:
            raise ParameterError("sample counts must be at least 2")


def matrix_sqrt_psd(s: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues that dip slightly negative from roundoff are clamped at 0.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {s.shape}")
    if np.abs(s - s.T).max() > 1e-9:
        raise ParameterError("matrix is not symmetric within 1e-9")
    sym = (s + s.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(sym)
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def _moments(features: PixelFeatureSet) -> tuple[np.ndarray, np.ndarray]:
    """Mean and shrunk unbiased covariance of a feature set."""
    x = features.vectors
    mu = x.mean(axis=0)
    centered = x - mu
    cov = centered.T @ centered / (x.shape[0] - 1)
    shrink = 1e-6 * np.trace(cov) / features.dim
    cov = cov + shrink * np.eye(features.dim)
    return mu, cov


def fid(real: PixelFeatureSet, fake: PixelFeatureSet) -> float:
    """Frechet distance between Gaussians fitted to the two pixel sets.

    ||mu_r - mu_f||^2 + Tr(S_r + S_f - 2 (S_r S_f)^(1/2)), with the cross
    square root computed as (S_f^(1/2) S_r S_f^(1/2))^(1/2) so only
    symmetric PSD square roots are needed.
    """
    if real.dim != fake.dim:
        raise ParameterError(f"feature dims differ: {real.dim} vs {fake.dim}")
    if len(real) < 2 or len(fake) < 2:
        raise ParameterError("fid needs at least 2 samples per set")
    mu_r, cov_r = _moments(real)
    mu_f, cov_f = _moments(fake)

    root_f = matrix_sqrt_psd(cov_f)
    inner = root_f @ cov_r @ root_f
    cross = matrix_sqrt_psd((inner + inner.T) / 2.0)

    diff = mu_r - mu_f
    value = float(diff @ diff + np.trace(cov_r) + np.trace(cov_f) - 2.0 * np.trace(cross))
    return max(value, 0.0)


def median_bandwidth(pooled: np.ndarray) -> float:
    """Median pairwise Euclidean distance over pooled vectors.

    Falls back to 1.0 (with a warning) when every pooled point coincides.
    """
    d2 = _pairwise_sq_dists(pooled, pooled)
    upper = d2[np.triu_indices(pooled.shape[0], k=1)]
    sigma = float(np.median(np.sqrt(np.clip(upper, 0.0, None))))
    if sigma == 0.0:
        warnings.warn("all pooled points coincide; falling back to bandwidth 1.0")
        return 1.0
    return sigma


def _pairwise_sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    xx = (x * x).sum(axis=1, keepdims=True)
    yy = (y * y).sum(axis=1, keepdims=True)
    return np.clip(xx + yy.T - 2.0 * x @ y.T, 0.0, None)


def mmd(
    real: PixelFeatureSet,
    fake: PixelFeatureSet,
    bandwidth: float | str = "median",
    kernel: str = "rbf",
) -> float:
    """Unbiased squared-MMD estimate between the two sets.

    The Gaussian RBF kernel exp(-||x-y||^2 / (2 sigma^2)) is the default,
    with sigma from the pooled median pairwise distance when ``bandwidth``
    is "median".  For equal sample counts the cross term excludes the
    i == j diagonal (the paired form of the U-statistic), so comparing a
    set against itself gives exactly zero.  The estimate may be slightly
    negative near zero.  A linear kernel (k(x,y) = x.y) is available for
    closed-form testing only.
    """
    if real.dim != fake.dim:
        raise ParameterError(f"feature dims differ: {real.dim} vs {fake.dim}")
    m, n = len(real), len(fake)
    if m < 2 or n < 2:
        raise ParameterError("mmd needs at least 2 samples per set")
    x, y = real.vectors, fake.vectors

    if kernel == "rbf":
        if bandwidth == "median":
            sigma = median_bandwidth(np.concatenate([x, y], axis=0))
        else:
            sigma = float(bandwidth)
            if not sigma > 0:
                raise ParameterError(f"bandwidth must be positive, got {sigma}")

        def kmat(a, b):
            return np.exp(-_pairwise_sq_dists(a, b) / (2.0 * sigma * sigma))

    elif kernel == "linear":

        def kmat(a, b):
            return a @ b.T

    else:
        raise ParameterError(f"unknown kernel {kernel!r}")

    kxx = kmat(x, x)
    kyy = kmat(y, y)
    kxy = kmat(x, y)
    term_x = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    term_y = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    if m == n:
        cross = (kxy.sum() - np.trace(kxy)) / (m * (n - 1))
    else:
        cross = kxy.sum() / (m * n)
    return float(term_x + term_y - 2.0 * cross)


def w1_exact_1d(a: Sequence[float], b: Sequence[float]) -> float:
    """Exact Wasserstein-1 between equal-size 1-D empirical distributions:
    the mean absolute difference of the sorted samples."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.size == 0:
        raise ParameterError("inputs must be non-empty 1-D arrays")
    if a.size != b.size:
        raise ParameterError(f"length mismatch: {a.size} vs {b.size}")
    return float(np.abs(np.sort(a) - np.sort(b)).mean())


__all__ = [
    "PixelFeatureSet",
    "MetricReport",
    "matrix_sqrt_psd",
    "fid",
    "mmd",
    "median_bandwidth",
    "w1_exact_1d",
]
