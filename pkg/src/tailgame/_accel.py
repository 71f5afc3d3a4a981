"""Optional numba acceleration.

Kernels are written in the subset of Python/numpy that numba can compile.
Set ``TAILGAME_NUMBA=0`` to run every kernel as plain Python/numpy; the
flag is read once, at import time.
"""

import os

_FLAG = os.environ.get("TAILGAME_NUMBA", "1").strip().lower()

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _FLAG not in ("0", "false", "off", "no")


def njit(func):
    """Compile ``func`` with numba when enabled, else return it unchanged.

    The undecorated function stays reachable as ``.py_func`` in both modes.
    """
    if USE_NUMBA:
        return numba.njit(cache=True)(func)
    func.py_func = func
    return func
