"""Numba dispatch.

Hot kernels are written once in loop style and compiled with ``njit`` when
numba is importable. Setting ``FUZZYDAG_DISABLE_JIT=1`` in the environment
selects the vectorized numpy implementations instead.
"""

import os

_DISABLED = os.environ.get("FUZZYDAG_DISABLE_JIT", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and not _DISABLED

numba_default = {
    "nogil": True,
    "cache": True,
    "fastmath": False,
    "error_model": "numpy",
}


def njit(func):
    """Compile ``func`` with numba if available, else return it untouched."""
    if not NUMBA_AVAILABLE:
        return func
    return numba.njit(**numba_default)(func)
