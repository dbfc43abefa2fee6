"""Backend selection for the accelerated kernels.

The hot numerical kernels (sojourn-step generation and the convolution
integrands) exist in two interchangeable implementations: a compiled one
built with :mod:`numba` and a pure NumPy/Python one.  The compiled path is
used whenever numba imports cleanly; setting the environment variable
``BLOCKTIME_NO_NUMBA`` to ``1`` (or ``true``/``yes``) before import forces
the fallback.  Both paths produce identical results; the flag only trades
speed for a lighter dependency footprint.
"""

from __future__ import annotations

import os

__all__ = ["NUMBA_DISABLED", "USING_NUMBA", "backend_name"]

NUMBA_DISABLED = os.environ.get("BLOCKTIME_NO_NUMBA", "").strip().lower() in {
    "1",
    "true",
    "yes",
}

if NUMBA_DISABLED:
    USING_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - depends on environment
        USING_NUMBA = False


def backend_name() -> str:
    """Name of the active kernel backend, for logs and run manifests."""
    return "numba" if USING_NUMBA else "numpy"
