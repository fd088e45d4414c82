"""Non-learned signal operators: downsampling pair, local shuffles,
Gaussian kernels, DoG, reflect-padded separable convolution and its adjoint.

All functions take and return 2-D float64 arrays.
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _require_even(img):
    H, W = img.shape
    if H % 2 or W % 2:
        raise ValueError(f"image dims must be even, got {H}x{W}")


def downsample_pair(y):
    """Stride-2 2x2 averages of complementary diagonals.

    For each block [[a, b], [c, d]]: g1 = 0.5*(b + c), g2 = 0.5*(a + d).
    """
    _require_even(y)
    a = y[0::2, 0::2]
    b = y[0::2, 1::2]
    c = y[1::2, 0::2]
    d = y[1::2, 1::2]
    return 0.5 * (b + c), 0.5 * (a + d)


def downsample_pair_adjoint(g1_bar, g2_bar, shape):
    """Adjoint of downsample_pair (transposed fixed kernels)."""
    out = np.zeros(shape)
    out[0::2, 1::2] += 0.5 * g1_bar
    out[1::2, 0::2] += 0.5 * g1_bar
    out[0::2, 0::2] += 0.5 * g2_bar
    out[1::2, 1::2] += 0.5 * g2_bar
    return out


def _swap_blocks(y, sel):
    """Apply the per-block pair swap selected by sel (0..5 over the pair
    order ab, ac, ad, bc, bd, cd) and reassemble the image."""
    a = y[0::2, 0::2]
    b = y[0::2, 1::2]
    c = y[1::2, 0::2]
    d = y[1::2, 1::2]
    na = np.where(sel == 0, b, np.where(sel == 1, c, np.where(sel == 2, d, a)))
    nb = np.where(sel == 0, a, np.where(sel == 3, c, np.where(sel == 4, d, b)))
    nc = np.where(sel == 1, a, np.where(sel == 3, b, np.where(sel == 5, d, c)))
    nd = np.where(sel == 2, a, np.where(sel == 4, b, np.where(sel == 5, c, d)))
    out = np.empty_like(y)
    out[0::2, 0::2] = na
    out[0::2, 1::2] = nb
    out[1::2, 0::2] = nc
    out[1::2, 1::2] = nd
    return out


def els(y):
    """Euclidean local shuffle: in each 2x2 block swap the intensity-closest
    pixel pair; ties resolved by the fixed pair order ab, ac, ad, bc, bd, cd."""
    _require_even(y)
    a = y[0::2, 0::2]
    b = y[0::2, 1::2]
    c = y[1::2, 0::2]
    d = y[1::2, 1::2]
    dists = np.stack(
        [
            np.abs(a - b),
            np.abs(a - c),
            np.abs(a - d),
            np.abs(b - c),
            np.abs(b - d),
            np.abs(c - d),
        ]
    )
    sel = np.argmin(dists, axis=0)  # argmin picks the first minimum: tie rule
    return _swap_blocks(y, sel)


def random_shuffle_2x2(y, seed):
    """Ablation shuffle: swap one uniformly chosen pair per 2x2 block."""
    _require_even(y)
    rng = np.random.default_rng(seed)
    sel = rng.integers(0, 6, size=(y.shape[0] // 2, y.shape[1] // 2))
    return _swap_blocks(y, sel)


def gaussian_kernel_1d(s):
    if s <= 0:
        raise ValueError("gaussian scale must be positive")
    h = math.ceil(3 * s)
    u = np.arange(-h, h + 1, dtype=np.float64)
    k = np.exp(-(u * u) / (2.0 * s * s))
    return k / k.sum()


def gaussian_kernel(s):
    """Square 2-D Gaussian kernel, half-width ceil(3s), sum exactly 1."""
    if s <= 0:
        raise ValueError("gaussian scale must be positive")
    h = math.ceil(3 * s)
    u = np.arange(-h, h + 1, dtype=np.float64)
    g = np.exp(-(u[:, None] ** 2 + u[None, :] ** 2) / (2.0 * s * s))
    return g / g.sum()


def reflect_indices(n, h):
    """Source indices for mirror (border not repeated) padding of length n
    by h on each side."""
    if n < 2 and h > 0:
        raise ValueError("reflect padding requires length >= 2")
    idx = np.abs(np.arange(-h, n + h))
    if n > 1:
        m = 2 * n - 2
        idx = idx % m
        idx = np.where(idx >= n, m - idx, idx)
    return idx


def _conv1d_axis(x, k, axis):
    """Valid correlation along axis of the reflect-padded input."""
    h = (len(k) - 1) // 2
    idx = reflect_indices(x.shape[axis], h)
    xpad = np.take(x, idx, axis=axis)
    win = sliding_window_view(xpad, len(k), axis=axis)
    return win @ k


def blur_reflect(x, k1d):
    """Separable convolution with reflect boundary handling."""
    return _conv1d_axis(_conv1d_axis(x, k1d, 0), k1d, 1)


def _conv1d_axis_adjoint(g, k, axis, n):
    """Adjoint of _conv1d_axis for an input of length n along axis."""
    h = (len(k) - 1) // 2
    # adjoint of the valid correlation: full convolution with the kernel
    pad = [(0, 0)] * g.ndim
    pad[axis] = (2 * h, 2 * h)
    gz = np.pad(g, pad)
    win = sliding_window_view(gz, len(k), axis=axis)
    gpad = win @ k[::-1]
    # adjoint of the reflect-pad gather: scatter-add along axis
    idx = reflect_indices(n, h)
    out = np.zeros(g.shape[:axis] + (n,) + g.shape[axis + 1 :])
    mv = np.moveaxis(out, axis, 0)
    np.add.at(mv, idx, np.moveaxis(gpad, axis, 0))
    return out


def blur_reflect_adjoint(g, k1d, shape):
    """Adjoint of blur_reflect for an input of the given shape."""
    g = _conv1d_axis_adjoint(g, k1d, 1, shape[1])
    return _conv1d_axis_adjoint(g, k1d, 0, shape[0])


def dog(y, s1, s2):
    """Difference of Gaussians: blur at scale s2 minus blur at scale s1."""
    k1 = gaussian_kernel_1d(s1)
    k2 = gaussian_kernel_1d(s2)
    return blur_reflect(y, k2) - blur_reflect(y, k1)
