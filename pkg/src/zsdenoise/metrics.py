"""Image quality metrics and the shuffle-decorrelation validation report."""

import math
from dataclasses import dataclass, asdict

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import ops
from .imageio import validate_image


def psnr(a, b, data_range=1.0):
    a, b = validate_image(a), validate_image(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if data_range <= 0:
        raise ValueError("data_range must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range * data_range / mse)


def _gaussian_window(size=11, sigma=1.5):
    u = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-(u * u) / (2.0 * sigma * sigma))
    return k / k.sum()


def _filter_valid(x, k):
    win = sliding_window_view(x, len(k), axis=0) @ k
    return sliding_window_view(win, len(k), axis=1) @ k


def ssim(a, b, data_range=1.0, win_size=11, sigma=1.5, k1=0.01, k2=0.03):
    """Single-scale SSIM, Gaussian 11x11 window, mean over valid positions."""
    a, b = validate_image(a), validate_image(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if min(a.shape) < win_size:
        raise ValueError(f"image smaller than the {win_size}x{win_size} SSIM window")
    w = _gaussian_window(win_size, sigma)
    mu_a = _filter_valid(a, w)
    mu_b = _filter_valid(b, w)
    var_a = _filter_valid(a * a, w) - mu_a * mu_a
    var_b = _filter_valid(b * b, w) - mu_b * mu_b
    cov = _filter_valid(a * b, w) - mu_a * mu_b
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def cnr(image, roi_signal, roi_background):
    """|mean(signal) - mean(background)| / std(background), population std."""
    image = validate_image(image)
    h, w = image.shape
    roi_signal.validate(w, h)
    roi_background.validate(w, h)
    sig = image[roi_signal.slices()]
    bg = image[roi_background.slices()]
    std = float(bg.std())
    if std == 0.0:
        raise ValueError("background ROI has zero variance")
    return abs(float(sig.mean()) - float(bg.mean())) / std


def pearson(a, b):
    a = np.ravel(a) - np.mean(a)
    b = np.ravel(b) - np.mean(b)
    den = math.sqrt(float(a @ a) * float(b @ b))
    if den == 0.0:
        raise ValueError("zero-variance input to correlation")
    return float(a @ b) / den


def _radial_profile(spectrum):
    h, w = spectrum.shape
    cy, cx = h // 2, w // 2
    yy, xx = np.indices(spectrum.shape)
    r = np.round(np.hypot(yy - cy, xx - cx)).astype(int)
    rmax = min(h, w) // 2
    prof = np.array([spectrum[r == i].mean() for i in range(rmax)])
    return prof


@dataclass
class ShuffleValidationReport:
    content_correlation: float
    noise_correlation: float
    noise_frequency_correlation: float
    noise_local_correlation_mean: float

    def to_dict(self):
        return asdict(self)


def els_validation(g1, g2, shuffler="els", content_scale=3.0):
    """Content/noise decomposition correlations between the two downsampled
    views, after applying the given shuffler (``els`` or ``identity``).

    content = Gaussian low-pass at content_scale; noise = image - content.
    """
    g1, g2 = validate_image(g1), validate_image(g2)
    if g1.shape != g2.shape:
        raise ValueError("views must have equal dims")
    if content_scale <= 0:
        raise ValueError("content_scale must be positive")
    if shuffler == "els":
        g1, g2 = ops.els(g1), ops.els(g2)
    elif shuffler != "identity":
        raise ValueError(f"shuffler must be 'els' or 'identity', got {shuffler!r}")
    k = ops.gaussian_kernel_1d(content_scale)
    c1, c2 = ops.blur_reflect(g1, k), ops.blur_reflect(g2, k)
    n1, n2 = g1 - c1, g2 - c2

    sp1 = np.abs(np.fft.fftshift(np.fft.fft2(n1)))
    sp2 = np.abs(np.fft.fftshift(np.fft.fft2(n2)))

    # mean local correlation over non-overlapping 8x8 windows,
    # skipping near-zero-variance windows
    locs = []
    H, W = n1.shape
    for i in range(0, H - H % 8, 8):
        for j in range(0, W - W % 8, 8):
            w1 = n1[i : i + 8, j : j + 8]
            w2 = n2[i : i + 8, j : j + 8]
            if w1.var() < 1e-12 or w2.var() < 1e-12:
                continue
            locs.append(pearson(w1, w2))
    return ShuffleValidationReport(
        content_correlation=pearson(c1, c2),
        noise_correlation=pearson(n1, n2),
        noise_frequency_correlation=pearson(_radial_profile(sp1), _radial_profile(sp2)),
        noise_local_correlation_mean=float(np.mean(locs)) if locs else 0.0,
    )
