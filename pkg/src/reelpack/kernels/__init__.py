"""Backend selection for the hot kernels.

The jitted backend is used when numba imports cleanly.  Set
REELPACK_BACKEND=numpy to force the pure-numpy fallback (or =numba to
insist on the jitted path and fail loudly if it is unavailable).
"""

from __future__ import annotations

import os

from . import numpy_backend

POLICY_FF = numpy_backend.POLICY_FF
POLICY_BF = numpy_backend.POLICY_BF
POLICY_INDEX = numpy_backend.POLICY_INDEX
POLICY_RANDOM = numpy_backend.POLICY_RANDOM
POLICY_TABULAR = numpy_backend.POLICY_TABULAR

try:
    from . import numba_backend

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba_backend = None
    _HAVE_NUMBA = False

_ENV_VAR = "REELPACK_BACKEND"


def active_backend_name() -> str:
    """Resolve the backend name from REELPACK_BACKEND (auto/numba/numpy)."""
    requested = os.environ.get(_ENV_VAR, "auto").strip().lower()
    if requested in ("", "auto"):
        return "numba" if _HAVE_NUMBA else "numpy"
    if requested == "numpy":
        return "numpy"
    if requested == "numba":
        if not _HAVE_NUMBA:
            raise RuntimeError(
                f"{_ENV_VAR}=numba requested but numba is not importable"
            )
        return "numba"
    raise RuntimeError(f"unrecognized {_ENV_VAR}={requested!r}; use numba or numpy")


def get_backend():
    """Module implementing the kernel API for the active backend."""
    return numba_backend if active_backend_name() == "numba" else numpy_backend
