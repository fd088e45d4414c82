"""Kernel backend selection.

The spatially-varying bilateral filter dominates runtime. Two
implementations exist with identical semantics:

* ``numba`` -- @njit loops (default when numba imports cleanly)
* ``numpy`` -- vectorized pure-numpy fallback

Select explicitly with ``ZSDENOISE_BACKEND=numba|numpy``.
"""

import os

_VALID = ("numba", "numpy")


def _detect_default() -> str:
    try:
        import numba  # noqa: F401

        return "numba"
    except ImportError:
        return "numpy"


def backend_name() -> str:
    name = os.environ.get("ZSDENOISE_BACKEND", "").strip().lower()
    if not name:
        return _detect_default()
    if name not in _VALID:
        raise ValueError(f"ZSDENOISE_BACKEND must be one of {_VALID}, got {name!r}")
    return name


def get_kernels(name: str | None = None):
    """Return the kernel module for *name* (or the configured backend)."""
    name = name or backend_name()
    if name == "numba":
        from . import kernels_numba

        return kernels_numba
    from . import kernels_numpy

    return kernels_numpy
