"""Kernel backend selection.

Hot kernels are written so that numba can compile them in nopython mode.
Set ``AUVGAME_NUMBA=0`` before import to run the plain numpy path instead
(useful for debugging and for the backend benchmark).
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("AUVGAME_NUMBA", "1").lower() not in (
    "0",
    "false",
    "no",
    "off",
)


def jit(func):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    if USE_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
