"""Pure-numpy fallback for the bilateral-filter hot kernels.

Same semantics as kernels_numba (see its docstring). Vectorized over
pixels, looping over window offsets; the per-pixel accumulation order over
offsets matches the numba loop order, so the two backends agree to
floating-point round-off.
"""

import numpy as np


def _pixel_fields(sr, sx, sy, kgrid, P):
    SR = np.repeat(np.repeat(sr, P, axis=0), P, axis=1)
    SX = np.repeat(np.repeat(sx, P, axis=0), P, axis=1)
    SY = np.repeat(np.repeat(sy, P, axis=0), P, axis=1)
    K = np.repeat(np.repeat(kgrid, P, axis=0), P, axis=1)
    return SR, SX, SY, K


def _offset_views(H, W, di, dj):
    """Slices so that dst[x,y] maps to src[x+di, y+dj] where in bounds."""
    dst_i = slice(max(0, -di), min(H, H - di))
    src_i = slice(max(0, di), min(H, H + di))
    dst_j = slice(max(0, -dj), min(W, W - dj))
    src_j = slice(max(0, dj), min(W, W + dj))
    return (dst_i, dst_j), (src_i, src_j)


def bilateral_forward(img, sr, sx, sy, kgrid, P):
    H, W = img.shape
    SR, SX, SY, K = _pixel_fields(sr, sx, sy, kgrid, P)
    inv2sx = 1.0 / (2.0 * SX * SX)
    inv2sy = 1.0 / (2.0 * SY * SY)
    inv2sr = 1.0 / (2.0 * SR * SR)
    num = np.zeros((H, W))
    den = np.zeros((H, W))
    kmax = int(K.max())
    for di in range(-kmax, kmax + 1):
        for dj in range(-kmax, kmax + 1):
            dst, src = _offset_views(H, W, di, dj)
            allowed = K[dst] >= max(abs(di), abs(dj))
            v = img[src]
            d = v - img[dst]
            w = np.exp(
                -(dj * dj) * inv2sx[dst] - (di * di) * inv2sy[dst] - d * d * inv2sr[dst]
            )
            w = np.where(allowed, w, 0.0)
            num[dst] += v * w
            den[dst] += w
    return num / den, den


def bilateral_backward(img, sr, sx, sy, kgrid, P, out, wsum, gout):
    H, W = img.shape
    gh, gw = sr.shape
    SR, SX, SY, K = _pixel_fields(sr, sx, sy, kgrid, P)
    inv2sx = 1.0 / (2.0 * SX * SX)
    inv2sy = 1.0 / (2.0 * SY * SY)
    inv2sr = 1.0 / (2.0 * SR * SR)
    gimg = np.zeros((H, W))
    gsr_pix = np.zeros((H, W))
    gsx_pix = np.zeros((H, W))
    gsy_pix = np.zeros((H, W))
    kmax = int(K.max())
    for di in range(-kmax, kmax + 1):
        for dj in range(-kmax, kmax + 1):
            dst, src = _offset_views(H, W, di, dj)
            allowed = K[dst] >= max(abs(di), abs(dj))
            v = img[src]
            d = v - img[dst]
            w = np.exp(
                -(dj * dj) * inv2sx[dst] - (di * di) * inv2sy[dst] - d * d * inv2sr[dst]
            )
            w = np.where(allowed, w, 0.0)
            gq = gout[dst]
            den = wsum[dst]
            gimg[src] += gq * w / den
            t = gq * (v - out[dst]) / den * w
            gsx_pix[dst] += t * (dj * dj) / SX[dst] ** 3
            gsy_pix[dst] += t * (di * di) / SY[dst] ** 3
            gsr_pix[dst] += t * (d * d) / SR[dst] ** 3
            gimg[src] += t * (-d) / SR[dst] ** 2
            gimg[dst] += t * d / SR[dst] ** 2
    # reduce pixel-level sigma gradients to the patch grid
    def _to_grid(a):
        return a.reshape(gh, P, gw, P).sum(axis=(1, 3))

    return gimg, _to_grid(gsr_pix), _to_grid(gsx_pix), _to_grid(gsy_pix)
