"""Image quality metrics on [0, 1] data."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

from .types import Image, ValidationError

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _as_array(img) -> np.ndarray:
    if isinstance(img, Image):
        return img.data.astype(np.float64)
    return np.asarray(img, dtype=np.float64)


def mse(a, b) -> float:
    a, b = _as_array(a), _as_array(b)
    if a.shape != b.shape:
        raise ValidationError(f"resolution mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB, capped at 99."""
    err = mse(a, b)
    if err == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(1.0 / err), PSNR_CAP_DB)


def gaussian_kernel(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1-D Gaussian taps for the SSIM window."""
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return k / k.sum()


def _windowed(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Separable correlation, then crop to windows fully inside the image.
    r = (kernel.size - 1) // 2
    y = correlate1d(x, kernel, axis=0, mode="constant")
    y = correlate1d(y, kernel, axis=1, mode="constant")
    return y[r:-r, r:-r]


def _ssim_channel(x: np.ndarray, y: np.ndarray, kernel: np.ndarray) -> float:
    c1 = SSIM_K1 * SSIM_K1
    c2 = SSIM_K2 * SSIM_K2
    mu_x = _windowed(x, kernel)
    mu_y = _windowed(y, kernel)
    sxx = _windowed(x * x, kernel) - mu_x * mu_x
    syy = _windowed(y * y, kernel) - mu_y * mu_y
    sxy = _windowed(x * y, kernel) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim(a, b) -> float:
    """Mean structural similarity with an 11x11 Gaussian window
    (sigma 1.5) over fully interior windows, averaged across channels."""
    a, b = _as_array(a), _as_array(b)
    if a.shape != b.shape:
        raise ValidationError(f"resolution mismatch: {a.shape} vs {b.shape}")
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValidationError(
            f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    kernel = gaussian_kernel()
    if a.ndim == 2:
        return _ssim_channel(a, b, kernel)
    return float(
        np.mean([_ssim_channel(a[:, :, c], b[:, :, c], kernel) for c in range(a.shape[2])])
    )
