#!/usr/bin/env python3
"""Benchmark the bilateral-filter kernels: numba @njit loops vs the
pure-numpy fallback.

Times the forward pass and the forward+backward pair on square images of
several sizes, using sigma maps typical of a trained model. The numba
backend is warmed up once per shape so JIT compilation is excluded.

Usage:
    python benchmarks/bench_backends.py [--sizes 64,128,256] [--repeats 5]
"""

import argparse
import time

import numpy as np

from zsdenoise.backend import get_kernels

PATCH = 8


def _inputs(size, seed=0):
    rng = np.random.default_rng(seed)
    img = np.clip(0.5 + 0.1 * rng.standard_normal((size, size)), 0, 1)
    g = size // PATCH
    sr = np.full((g, g), 0.06) * (1 + 0.2 * rng.random((g, g)))
    sx = np.full((g, g), 1.1) * (1 + 0.2 * rng.random((g, g)))
    sy = np.full((g, g), 0.9) * (1 + 0.2 * rng.random((g, g)))
    kgrid = (2 * np.ceil(np.maximum(sx, sy) + 1)).astype(np.int64)
    return img, sr, sx, sy, kgrid


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(sizes, repeats):
    rows = []
    for size in sizes:
        img, sr, sx, sy, kgrid = _inputs(size)
        gout = np.ones_like(img)
        timings = {}
        for name in ("numba", "numpy"):
            k = get_kernels(name)
            out, wsum = k.bilateral_forward(img, sr, sx, sy, kgrid, PATCH)
            k.bilateral_backward(img, sr, sx, sy, kgrid, PATCH, out, wsum, gout)

            timings[name, "fwd"] = _time(
                lambda k=k: k.bilateral_forward(img, sr, sx, sy, kgrid, PATCH),
                repeats,
            )
            timings[name, "fwd+bwd"] = _time(
                lambda k=k, out=out, wsum=wsum: (
                    k.bilateral_forward(img, sr, sx, sy, kgrid, PATCH),
                    k.bilateral_backward(
                        img, sr, sx, sy, kgrid, PATCH, out, wsum, gout
                    ),
                ),
                repeats,
            )
        rows.append((size, timings))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="64,128,256")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]

    rows = bench(sizes, args.repeats)
    hdr = f"{'size':>6} {'pass':>8} {'numba (ms)':>12} {'numpy (ms)':>12} {'speedup':>8}"
    print(hdr)
    print("-" * len(hdr))
    for size, t in rows:
        for phase in ("fwd", "fwd+bwd"):
            nb = t["numba", phase] * 1e3
            npy = t["numpy", phase] * 1e3
            print(f"{size:>6} {phase:>8} {nb:>12.2f} {npy:>12.2f} {npy / nb:>7.1f}x")


if __name__ == "__main__":
    main()
