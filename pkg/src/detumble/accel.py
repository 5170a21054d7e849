"""Numba/numpy backend selection for the hot numerical kernels.

Every function in :mod:`detumble.kernels` is written as plain Python over
numpy arrays and decorated with :func:`jit`. By default the decorator is
numba's ``njit(cache=True)``; setting the environment variable
``DETUMBLE_NUMBA`` to ``0``/``false``/``off`` (or running without numba
installed) leaves the functions as ordinary Python, which is slow but
bit-identical in results. ``benchmarks/compare_backends.py`` times the two
paths against each other.

The flag is read once at import time; changing it afterwards has no effect.
"""

import os
import warnings

_FALSY = ("0", "false", "off", "no")


def _requested() -> bool:
    return os.environ.get("DETUMBLE_NUMBA", "1").strip().lower() not in _FALSY


USING_NUMBA = False

if _requested():
    try:
        from numba import njit as _njit

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        warnings.warn("numba not importable; falling back to pure-numpy kernels")


def jit(func):
    """Compile ``func`` with numba when enabled, else return it unchanged."""
    if USING_NUMBA:
        return _njit(cache=True)(func)
    return func
