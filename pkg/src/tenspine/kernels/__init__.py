"""Relaxation kernel backends.

The numba-compiled loop is the default; set ``TENSPINE_KERNEL=numpy`` to force
the pure-numpy fallback (used automatically when numba is unavailable).
"""

import os
import warnings

STATUS_CONVERGED = 0
STATUS_STEP_LIMIT = 1
STATUS_DIVERGED = 2

_choice = os.environ.get("TENSPINE_KERNEL", "").strip().lower()

if _choice == "numpy":
    from .numpy_backend import run_relax
    backend_name = "numpy"
elif _choice in ("", "numba"):
    try:
        from .numba_backend import run_relax
        backend_name = "numba"
    except ImportError:
        if _choice == "numba":
            warnings.warn("TENSPINE_KERNEL=numba requested but numba is not "
                          "importable; falling back to numpy")
        from .numpy_backend import run_relax
        backend_name = "numpy"
else:
    raise RuntimeError(
        f"TENSPINE_KERNEL must be 'numba' or 'numpy', got {_choice!r}")


def load_backend(name: str):
    """Import a specific backend module (for benchmarks and equivalence tests)."""
    if name == "numba":
        from . import numba_backend
        return numba_backend
    if name == "numpy":
        from . import numpy_backend
        return numpy_backend
    raise ValueError(f"unknown kernel backend {name!r}")
