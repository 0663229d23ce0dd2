"""Numba switch for the hot iteration kernels.

Set ``HALPERN_CERT_NUMBA=0`` to force the pure-numpy code paths, e.g. to
debug a kernel or to run on a platform without numba.
"""
import os

_FLAG = os.environ.get("HALPERN_CERT_NUMBA", "1").strip().lower()

try:
    from numba import njit as _njit
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _FLAG not in ("0", "false", "no", "off")


def njit(func):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    if USE_NUMBA:
        return _njit(cache=True)(func)
    return func
