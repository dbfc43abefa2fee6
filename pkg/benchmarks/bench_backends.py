#!/usr/bin/env python3
"""Timing comparison of the compiled and pure-NumPy kernel backends.

Run without arguments to benchmark both backends and print a table::

    python3 benchmarks/bench_backends.py

The script re-executes itself twice — once as-is and once with
``BLOCKTIME_NO_NUMBA=1`` — so each backend is measured in a fresh process
with identical conditions and JIT compilation happens during warmup, not
inside a timed region.  ``--inner`` runs the workloads under whichever
backend the current environment selects and prints machine-readable rows;
it is what the outer invocation calls, but can also be used alone.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

HERE = os.path.dirname(os.path.abspath(__file__))


# ---------------------------------------------------------------------------
# Workloads
# ---------------------------------------------------------------------------
#
# Each entry is (name, repeats, setup_fn) where setup_fn returns the callable
# to time.  Warmup runs the callable once before any timing, which absorbs
# numba JIT compilation and scipy initialisation.


def _workloads():
    import numpy as np

    from blocktime import GumbelParams, SimConfig, exact_conv_pdf, run_monte_carlo
    from blocktime import _kernels
    from blocktime.simulator import transition_probs

    entries = []

    rng = np.random.default_rng(0)
    u = rng.random((4096, 174))
    log1mp = np.log1p(-transition_probs(175))

    entries.append(("sojourn-steps[4096x174]", 5,
                    lambda: _kernels.sojourn_steps(u, log1mp)))
    entries.append(("broadcast-totals[4096x174]", 5,
                    lambda: _kernels.broadcast_totals(u, log1mp)))

    config = SimConfig(n_validators=175, delta_t=0.0011, phases=3, seed=0)
    entries.append(("monte-carlo[N=175,20k runs]", 3,
                    lambda: run_monte_carlo(config, 20_000)))

    p = GumbelParams(2.0, 0.36)
    t2 = np.linspace(3.0, 7.0, 100)
    t3 = np.linspace(5.5, 8.0, 6)

    def conv2():
        for t in t2:
            exact_conv_pdf(float(t), 2, p)

    def conv3():
        for t in t3:
            exact_conv_pdf(float(t), 3, p)

    entries.append(("conv2-quadrature[100 pts]", 3, conv2))
    entries.append(("conv3-quadrature[6 pts]", 1, conv3))
    return entries


def run_inner() -> int:
    from blocktime import backend_name

    print(f"backend\t{backend_name()}")
    for name, repeats, fn in _workloads():
        fn()  # warmup: JIT compilation, caches, page faults
        best = min(_timed(fn) for _ in range(repeats))
        print(f"{name}\t{best:.6f}")
    return 0


def _timed(fn) -> float:
    start = time.perf_counter()
    fn()
    return time.perf_counter() - start


# ---------------------------------------------------------------------------
# Outer comparison mode
# ---------------------------------------------------------------------------


def _run_backend(disable_numba: bool) -> dict[str, str]:
    env = dict(os.environ)
    env.pop("BLOCKTIME_NO_NUMBA", None)
    if disable_numba:
        env["BLOCKTIME_NO_NUMBA"] = "1"
    proc = subprocess.run(
        [sys.executable, os.path.join(HERE, "bench_backends.py"), "--inner"],
        env=env,
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        raise SystemExit(f"inner benchmark failed (exit {proc.returncode})")
    rows = {}
    for line in proc.stdout.splitlines():
        name, _, value = line.partition("\t")
        if name:
            rows[name] = value
    return rows


def run_comparison() -> int:
    print("benchmarking default backend ...", flush=True)
    fast = _run_backend(disable_numba=False)
    print("benchmarking pure-NumPy fallback ...", flush=True)
    slow = _run_backend(disable_numba=True)

    fast_label = fast.pop("backend", "?")
    slow_label = slow.pop("backend", "?")
    if fast_label == slow_label:
        print(f"note: both runs used the {fast_label!r} backend "
              "(numba unavailable?); speedups will be ~1x")

    width = max(len(n) for n in fast)
    print()
    print(f"{'workload':<{width}}  {fast_label:>10}  {slow_label:>10}  {'speedup':>8}")
    for name in fast:
        a = float(fast[name])
        b = float(slow.get(name, "nan"))
        print(f"{name:<{width}}  {a:>9.4f}s  {b:>9.4f}s  {b / a:>7.1f}x")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--inner",
        action="store_true",
        help="time the current backend only and print raw rows",
    )
    args = parser.parse_args(argv)
    if args.inner:
        return run_inner()
    return run_comparison()


if __name__ == "__main__":
    raise SystemExit(main())
