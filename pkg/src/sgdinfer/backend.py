"""Compute-lane selection.

The streaming loops exist twice: a numba-jitted fast lane and a plain
numpy/python lane with identical semantics (same RNG stream, same update
order). The env var SGDINFER_BACKEND picks the lane:

    SGDINFER_BACKEND=numba   force the jitted kernels (error if numba missing)
    SGDINFER_BACKEND=numpy   force the pure-python/numpy lane
    unset or "auto"          numba when importable, numpy otherwise
"""

import os

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

_ENV_VAR = "SGDINFER_BACKEND"


def active_backend() -> str:
    """Resolve the compute lane to one of {"numba", "numpy"}."""
    choice = os.environ.get(_ENV_VAR, "auto").strip().lower() or "auto"
    if choice == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    if choice == "numba":
        if not HAS_NUMBA:
            raise RuntimeError(
                f"{_ENV_VAR}=numba requested but numba is not importable"
            )
        return "numba"
    if choice == "numpy":
        return "numpy"
    raise ValueError(f"{_ENV_VAR} must be 'numba', 'numpy' or 'auto', got {choice!r}")
