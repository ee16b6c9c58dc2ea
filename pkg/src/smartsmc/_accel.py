"""Backend selection for the hot simulation kernels.

Set ``SMARTSMC_DISABLE_NUMBA=1`` (or ``SMARTSMC_BACKEND=numpy``) before import
to force the vectorised numpy path even when numba is installed.
"""

from __future__ import annotations

import functools
import os

_FLAG = os.environ.get("SMARTSMC_DISABLE_NUMBA", "").strip().lower()
_BACKEND = os.environ.get("SMARTSMC_BACKEND", "").strip().lower()

NUMBA_DISABLED = _FLAG in ("1", "true", "yes", "on") or _BACKEND == "numpy"

try:
    if NUMBA_DISABLED:
        raise ImportError("numba disabled by environment")
    from numba import njit

    NUMBA_OK = True
except ImportError:
    NUMBA_OK = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(f):
            @functools.wraps(f)
            def wrapper(*a, **kw):
                return f(*a, **kw)

            return wrapper

        return decorator


DEFAULT_BACKEND = "numba" if NUMBA_OK else "numpy"

__all__ = ["njit", "NUMBA_OK", "NUMBA_DISABLED", "DEFAULT_BACKEND"]
