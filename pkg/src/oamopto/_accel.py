"""Backend selection for the integration kernels.

Set ``OAMOPTO_DISABLE_NUMBA=1`` to force the pure-numpy kernels.
"""

import os

_DISABLED = os.environ.get("OAMOPTO_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None
NUMBA_ENABLED = HAVE_NUMBA and not _DISABLED


def njit(func):
    """Compile ``func`` in nopython mode when numba is installed, else return it unchanged."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def default_backend() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
