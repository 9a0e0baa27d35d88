"""Backend selection for the numeric kernels.

Kernels in _kernels.py are written as plain Python loops over scalars and
ndarrays, compatible with numba's nopython mode. When numba is available and
CRMSBM_NUMBA is not "0", they are compiled with njit(cache=True); otherwise the
same source runs under CPython. Randomness used by buffer-fed kernels is drawn
outside the kernel, so those results are bit-identical across backends.
"""

import os

USE_NUMBA = os.environ.get("CRMSBM_NUMBA", "1") != "0"

if USE_NUMBA:
    try:
        from numba import njit as _njit
    except ImportError:
        USE_NUMBA = False


def jit(func):
    """njit-compile func when the compiled backend is active, else return func."""
    if USE_NUMBA:
        return _njit(cache=True)(func)
    return func


def python_impl(func):
    """Return the uncompiled implementation of a kernel (for benchmarks/tests)."""
    return getattr(func, "py_func", func)
