"""Benchmark the compiled stochastic-wavefunction kernel against the
pure-Python fallback.

Both backends are driven through identical inputs (same eigendecomposition,
same uniform stream, same initial state), so the comparison covers exactly
the per-jump hot loop: waiting-time root solve, channel selection, and
state update.

Usage::

    python3 benchmarks/bench_mcwf.py [--n-jumps 20000] [--repeats 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from trispin.spin_algebra import ModelParams
from trispin.trajectories import _decompose, _haar_state
from trispin._kernels import _mcwf_py

try:
    from trispin._kernels import _mcwf as _mcwf_c
except ImportError:
    _mcwf_c = None


def run_backend(advance, lam, v, vinv, ops, rates, tau0, psi0, uniforms, n_jumps):
    """Time one backend over ``n_jumps`` jumps; return (seconds, times)."""
    psi = psi0.copy()
    times = np.empty(n_jumps)
    chans = np.empty(n_jumps, dtype=np.int32)
    start = time.perf_counter()
    n, t_end, used, status = advance(
        lam, v, vinv, ops, rates, psi, 0.0, uniforms,
        times, chans, n_jumps, np.inf, 1e6, tau0,
    )
    elapsed = time.perf_counter() - start
    if n != n_jumps or status != 0:
        raise RuntimeError(f"backend stopped early: n={n} status={status}")
    return elapsed, times


def main():
    ap = argparse.ArgumentParser(description="MCWF kernel benchmark")
    ap.add_argument("--n-jumps", type=int, default=20000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    p = ModelParams(gamma_single=5e-4, nbar=1.0, convention="halved")
    lam, v, vinv, ops, rates, _, tau0 = _decompose(p)
    rng = np.random.Generator(np.random.Philox(key=[args.seed, 0]))
    psi0 = _haar_state(rng)
    uniforms = rng.random(2 * args.n_jumps)

    backends = [("python", _mcwf_py.advance)]
    if _mcwf_c is not None:
        backends.insert(0, ("compiled", _mcwf_c.advance))
    else:
        print("compiled backend unavailable; benchmarking python only")

    results = {}
    for name, advance in backends:
        best = np.inf
        for _ in range(args.repeats):
            elapsed, times = run_backend(
                advance, lam, v, vinv, ops, rates, tau0, psi0, uniforms, args.n_jumps
            )
            best = min(best, elapsed)
        results[name] = (best, times)
        print(f"{name:>9s}: {args.n_jumps / best:10.0f} jumps/s  "
              f"({best:.3f} s for {args.n_jumps} jumps)")

    if len(results) == 2:
        t_c, t_p = results["compiled"][1], results["python"][1]
        # Iterated jumps amplify last-bit rounding, so per-jump agreement is
        # only meaningful early; afterwards compare distributions.
        head = np.max(np.abs(t_c[:200] - t_p[:200]))
        mean_rel = abs(np.diff(t_c).mean() - np.diff(t_p).mean()) / np.diff(t_p).mean()
        speedup = results["python"][0] / results["compiled"][0]
        print(f"  speedup: {speedup:.1f}x   first-200-jump max diff: {head:.3e}   "
              f"mean waiting-time rel. diff: {mean_rel:.3e}")


if __name__ == "__main__":
    main()
