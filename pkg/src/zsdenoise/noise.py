"""Noise simulators for synthetic experiments.

Both are pure functions of (inputs, seed).
"""

import numpy as np

from .imageio import validate_image


def add_poisson_noise(clean, photons_per_pixel, seed):
    """Photon-count noise: each pixel v becomes Poisson(v * photons) / photons."""
    clean = validate_image(clean)
    if photons_per_pixel <= 0:
        raise ValueError("photon count must be positive")
    rng = np.random.default_rng(seed)
    counts = rng.poisson(clean * photons_per_pixel)
    return counts.astype(np.float64) / photons_per_pixel


def _box_filter(x, radius):
    """Mean over a (2r+1)^2 box, reflect boundary."""
    n = 2 * radius + 1
    k = np.full(n, 1.0 / n)
    from . import ops

    return ops.blur_reflect(x, k)


def add_correlated_gaussian_noise(clean, sigma, corr_radius, seed):
    """White Gaussian noise box-filtered over a (2r+1)^2 neighborhood and
    rescaled so its per-pixel std is sigma again, then added to the image."""
    clean = validate_image(clean)
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return clean.copy()
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=clean.shape)
    if corr_radius > 0:
        # box averaging of n^2 iid samples shrinks the std by 1/n
        noise = _box_filter(noise, corr_radius) * (2 * corr_radius + 1)
    return clean + noise
