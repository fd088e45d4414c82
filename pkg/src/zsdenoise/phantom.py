"""Head phantom rendering for synthetic experiments.

Renders the familiar ten-ellipse head phantom with low-contrast interior
intensities in [0, 1]. The bottom small ellipses and the tilted pair are
mirrored so the phantom is exactly left-right symmetric, which the test
suite relies on.
"""

import numpy as np

# (added intensity, a, b, x0, y0, phi degrees)
_ELLIPSES = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1600, 0.4100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0460, 0.0230, 0.08, -0.605, 0.0),
]


def shepp_logan(size):
    if size < 32:
        raise ValueError("phantom size must be >= 32")
    # pixel centers on [-1, 1]; row 0 is the top of the head
    xs = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    ys = 1.0 - (np.arange(size) + 0.5) / size * 2.0
    X, Y = np.meshgrid(xs, ys)
    img = np.zeros((size, size))
    for val, a, b, x0, y0, phi in _ELLIPSES:
        t = np.deg2rad(phi)
        xr = (X - x0) * np.cos(t) + (Y - y0) * np.sin(t)
        yr = -(X - x0) * np.sin(t) + (Y - y0) * np.cos(t)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += val
    return np.clip(img, 0.0, 1.0)
