"""Hot numerical kernels with compiled and pure-NumPy implementations.

Two families of kernels live here:

* sojourn-step generation for the broadcast chain (inverse-transform
  sampling of geometric waiting times from uniform draws), and
* the integrands of the two- and three-fold density convolutions, consumed
  by :func:`scipy.integrate.quad` / :func:`scipy.integrate.nquad`.

Each kernel has a numba implementation (``*_numba`` / ``*_lowlevel``) and a
NumPy/Python implementation (``*_numpy`` / ``*_python``).  The unsuffixed
names are bound to whichever backend :mod:`blocktime._accel` selected.  The
two implementations are exercised against each other in the test suite and
compared in ``benchmarks/bench_backends.py``; the step kernels agree
bit-for-bit and the integrands agree to floating-point roundoff.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import USING_NUMBA

__all__ = [
    "sojourn_steps",
    "sojourn_steps_numpy",
    "broadcast_totals",
    "broadcast_totals_numpy",
    "conv2_integrand",
    "conv2_integrand_python",
    "conv3_integrand",
    "conv3_integrand_python",
]


# ---------------------------------------------------------------------------
# Sojourn-step kernels
# ---------------------------------------------------------------------------
#
# Both kernels take a matrix ``u`` of uniform draws in [0, 1) with one row
# per broadcast run and one column per chain state, plus the per-state
# precomputed vector ``log1mp = log(1 - p_i)``.  The geometric step count in
# state ``i`` is ``max(1, ceil(log(1 - u) / log(1 - p_i)))``, the standard
# inversion of the geometric CDF.  The same float operations (log1p, divide,
# ceil) run in the same order in both implementations, so the integer
# outputs are identical, not merely close.


def sojourn_steps_numpy(u: np.ndarray, log1mp: np.ndarray) -> np.ndarray:
    """Geometric step counts, one per (run, state) pair, as int64."""
    steps = np.ceil(np.log1p(-u) / log1mp).astype(np.int64)
    np.maximum(steps, 1, out=steps)
    return steps


def broadcast_totals_numpy(u: np.ndarray, log1mp: np.ndarray) -> np.ndarray:
    """Total step count per run (row sum of :func:`sojourn_steps_numpy`)."""
    return sojourn_steps_numpy(u, log1mp).sum(axis=1, dtype=np.int64)


if USING_NUMBA:
    from numba import cfunc, njit, types

    @njit(cache=True)
    def sojourn_steps_numba(u, log1mp):  # pragma: no cover - compiled
        runs, m = u.shape
        out = np.empty((runs, m), dtype=np.int64)
        for r in range(runs):
            for j in range(m):
                s = int(math.ceil(math.log1p(-u[r, j]) / log1mp[j]))
                if s < 1:
                    s = 1
                out[r, j] = s
        return out

    @njit(cache=True)
    def broadcast_totals_numba(u, log1mp):  # pragma: no cover - compiled
        runs, m = u.shape
        out = np.empty(runs, dtype=np.int64)
        for r in range(runs):
            acc = 0
            for j in range(m):
                s = int(math.ceil(math.log1p(-u[r, j]) / log1mp[j]))
                if s < 1:
                    s = 1
                acc += s
            out[r] = acc
        return out

    sojourn_steps = sojourn_steps_numba
    broadcast_totals = broadcast_totals_numba
else:
    sojourn_steps = sojourn_steps_numpy
    broadcast_totals = broadcast_totals_numpy


# ---------------------------------------------------------------------------
# Convolution integrands
# ---------------------------------------------------------------------------
#
# ``conv2`` integrates f(x) f(t - x) over x; ``conv3`` integrates
# f(y) f(x) f(t - x - y) over (y inner, x outer), matching the argument
# order scipy's nquad passes to its callable.  ``f`` is the base density
# with location ``mu`` and scale ``eta``; products are formed in log space
# so deep-tail evaluations underflow to 0.0 instead of producing NaN.


def _log_base_pdf(x: float, mu: float, eta: float) -> float:
    z = (x - mu) / eta
    return -math.log(eta) - z - math.exp(-z)


def _conv2_python(x: float, t: float, mu: float, eta: float) -> float:
    return math.exp(_log_base_pdf(x, mu, eta) + _log_base_pdf(t - x, mu, eta))


def _conv3_python(y: float, x: float, t: float, mu: float, eta: float) -> float:
    return math.exp(
        _log_base_pdf(y, mu, eta)
        + _log_base_pdf(x, mu, eta)
        + _log_base_pdf(t - x - y, mu, eta)
    )


def conv2_integrand_python():
    """Integrand ``f(x) f(t-x)`` with signature ``(x, t, mu, eta)``."""
    return _conv2_python


def conv3_integrand_python():
    """Integrand ``f(y) f(x) f(t-x-y)`` with signature ``(y, x, t, mu, eta)``."""
    return _conv3_python


if USING_NUMBA:
    _log_base_pdf_jit = njit(cache=True)(_log_base_pdf)

    @cfunc(types.float64(types.intc, types.CPointer(types.float64)), cache=True)
    def _conv2_cfunc(n, xx):  # pragma: no cover - compiled
        x = xx[0]
        t = xx[1]
        mu = xx[2]
        eta = xx[3]
        return math.exp(
            _log_base_pdf_jit(x, mu, eta) + _log_base_pdf_jit(t - x, mu, eta)
        )

    @cfunc(types.float64(types.intc, types.CPointer(types.float64)), cache=True)
    def _conv3_cfunc(n, xx):  # pragma: no cover - compiled
        y = xx[0]
        x = xx[1]
        t = xx[2]
        mu = xx[3]
        eta = xx[4]
        return math.exp(
            _log_base_pdf_jit(y, mu, eta)
            + _log_base_pdf_jit(x, mu, eta)
            + _log_base_pdf_jit(t - x - y, mu, eta)
        )

    def conv2_integrand_lowlevel():
        """Compiled :func:`conv2_integrand_python` as a LowLevelCallable."""
        from scipy import LowLevelCallable

        return LowLevelCallable(_conv2_cfunc.ctypes)

    def conv3_integrand_lowlevel():
        """Compiled :func:`conv3_integrand_python` as a LowLevelCallable."""
        from scipy import LowLevelCallable

        return LowLevelCallable(_conv3_cfunc.ctypes)

    conv2_integrand = conv2_integrand_lowlevel
    conv3_integrand = conv3_integrand_lowlevel
else:
    conv2_integrand = conv2_integrand_python
    conv3_integrand = conv3_integrand_python
