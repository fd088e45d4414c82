"""Numba implementations of the bilateral-filter hot kernels.

Semantics (shared with kernels_numpy):

* the image is filtered with per-patch parameters: each pixel takes the
  (sigma_r, sigma_x, sigma_y, k) of the patch containing it,
* sigma_x weighs horizontal (column) offsets, sigma_y vertical (row) offsets,
* the window is (2k+1)x(2k+1) clipped to the image bounds,
* output = sum(v * w) / sum(w) with w = exp(-dx^2/2sx^2 - dy^2/2sy^2
  - (v-c)^2/2sr^2); the self term contributes weight 1.

The backward kernel returns gradients w.r.t. the input image and the three
per-patch sigma grids, given the upstream gradient of the output.
Accumulation order is fixed (row-major over pixels, then over the window),
so results are bit-deterministic.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def bilateral_forward(img, sr, sx, sy, kgrid, P):
    H, W = img.shape
    out = np.empty((H, W), dtype=np.float64)
    wsum = np.empty((H, W), dtype=np.float64)
    for x in range(H):
        px = x // P
        for y in range(W):
            py = y // P
            s_r = sr[px, py]
            s_x = sx[px, py]
            s_y = sy[px, py]
            k = kgrid[px, py]
            inv2sx = 1.0 / (2.0 * s_x * s_x)
            inv2sy = 1.0 / (2.0 * s_y * s_y)
            inv2sr = 1.0 / (2.0 * s_r * s_r)
            c = img[x, y]
            num = 0.0
            den = 0.0
            i0 = x - k if x - k > 0 else 0
            i1 = x + k + 1 if x + k + 1 < H else H
            j0 = y - k if y - k > 0 else 0
            j1 = y + k + 1 if y + k + 1 < W else W
            for i in range(i0, i1):
                di = i - x
                for j in range(j0, j1):
                    dj = j - y
                    v = img[i, j]
                    d = v - c
                    w = np.exp(-(dj * dj) * inv2sx - (di * di) * inv2sy - d * d * inv2sr)
                    num += v * w
                    den += w
            out[x, y] = num / den
            wsum[x, y] = den
    return out, wsum


@njit(cache=True)
def bilateral_backward(img, sr, sx, sy, kgrid, P, out, wsum, gout):
    H, W = img.shape
    gh, gw = sr.shape
    gimg = np.zeros((H, W), dtype=np.float64)
    gsr = np.zeros((gh, gw), dtype=np.float64)
    gsx = np.zeros((gh, gw), dtype=np.float64)
    gsy = np.zeros((gh, gw), dtype=np.float64)
    for x in range(H):
        px = x // P
        for y in range(W):
            gq = gout[x, y]
            if gq == 0.0:
                continue
            py = y // P
            s_r = sr[px, py]
            s_x = sx[px, py]
            s_y = sy[px, py]
            k = kgrid[px, py]
            inv2sx = 1.0 / (2.0 * s_x * s_x)
            inv2sy = 1.0 / (2.0 * s_y * s_y)
            inv2sr = 1.0 / (2.0 * s_r * s_r)
            invsx3 = 1.0 / (s_x * s_x * s_x)
            invsy3 = 1.0 / (s_y * s_y * s_y)
            invsr3 = 1.0 / (s_r * s_r * s_r)
            invsr2 = 1.0 / (s_r * s_r)
            c = img[x, y]
            o = out[x, y]
            den = wsum[x, y]
            i0 = x - k if x - k > 0 else 0
            i1 = x + k + 1 if x + k + 1 < H else H
            j0 = y - k if y - k > 0 else 0
            j1 = y + k + 1 if y + k + 1 < W else W
            for i in range(i0, i1):
                di = i - x
                for j in range(j0, j1):
                    dj = j - y
                    v = img[i, j]
                    d = v - c
                    w = np.exp(-(dj * dj) * inv2sx - (di * di) * inv2sy - d * d * inv2sr)
                    # direct dependence of the weighted average on v
                    gimg[i, j] += gq * w / den
                    # shared factor for all weight derivatives
                    t = gq * (v - o) / den * w
                    gsx[px, py] += t * (dj * dj) * invsx3
                    gsy[px, py] += t * (di * di) * invsy3
                    gsr[px, py] += t * (d * d) * invsr3
                    gimg[i, j] += t * (-d) * invsr2
                    gimg[x, y] += t * d * invsr2
    return gimg, gsr, gsx, gsy
