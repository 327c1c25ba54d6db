"""Single-channel time series synthesis with an image-based WGAN-GP.

Pipeline: segment a signal into fixed-length windows, rasterise each
window into an 8-bit grayscale image, train a gradient-penalty
Wasserstein GAN on the images, sample new images, decode them back to
time series, and low-pass filter the result.  Evaluation compares real
and generated sets with pixel-space Frechet distance, MMD, the critic's
Wasserstein-1 estimate, and FFT magnitude spectra.
"""

from .errors import (
    ConfigError,
    FormatError,
    NumericError,
    ParameterError,
    ShapeError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "FormatError",
    "NumericError",
    "ParameterError",
    "ShapeError",
    "__version__",
]
