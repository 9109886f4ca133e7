"""Numba switch.

Kernels are compiled with ``numba.njit`` unless the environment variable
``IRSBEAM_DISABLE_NUMBA`` is set to a truthy value or numba cannot be
imported, in which case the pure numpy/python fallbacks are used.
"""
import os

_FLAG = os.environ.get("IRSBEAM_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and _FLAG not in ("1", "true", "yes", "on")


def jit(fn):
    """Compile ``fn`` in nopython mode, or return it untouched if numba is off."""
    if not NUMBA_AVAILABLE:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def jitable(fn):
    """Plain Python function that jitted kernels may also call (inlined)."""
    if not NUMBA_AVAILABLE:
        return fn
    from numba.extending import register_jitable
    return register_jitable(fn)
