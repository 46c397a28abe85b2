"""Timing of the batched Moebius flow: compiled kernel against the numpy fallback.

Run with ``python3 benchmarks/bench_flow.py``.  Each case propagates the
same random two-label ensemble with both backends, checks that the final
states agree, and prints the best wall time of a few repeats.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from blockjacobi import kernels
from blockjacobi.random import Disorder, EnsembleSpec, sample_labels, _site_types


def ensemble(L: int) -> EnsembleSpec:
    rng = np.random.default_rng(L)
    x = rng.standard_normal((L, L))
    V = (x + x.T) / 4
    eye = np.eye(L)
    return EnsembleSpec(L, V, eye, (Disorder(eye, 0.0, 0.5), Disorder(-eye, 0.0, 0.5)), 0.3)


def inputs(L: int, N: int, R: int, E: float):
    spec = ensemble(L)
    table = spec.table()
    table._prepare_branch()
    M = table.lorentz([E])
    Yb, Yc = table.branch(M)
    labels = np.array([sample_labels(spec, N, r) for r in range(R)])
    idx = _site_types(spec, labels)
    U0 = np.eye(L, dtype=complex) * -1
    return M, Yb, Yc, idx, U0


def best_time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20_000, help="sites per realization")
    ap.add_argument("--realizations", type=int, default=4)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--energy", type=float, default=0.3)
    args = ap.parse_args(argv)
    if kernels._kernels is None:
        print("compiled kernel unavailable; only the numpy path can run")
    print(f"{'L':>2} {'trlog':>5} {'compiled [s]':>13} {'python [s]':>11} {'speedup':>8} {'max |dU|':>10}")
    for L in (1, 2, 3):
        for trlog in (False, True):
            M, Yb, Yc, idx, U0 = inputs(L, args.n, args.realizations, args.energy)

            def run(backend):
                return kernels.propagate(M, Yb, Yc, idx, U0, trlog=trlog, backend=backend)

            t_py = best_time(lambda: run("python"), args.repeats)
            compiled = kernels._kernels is not None and not (trlog and L > 2)
            if compiled:
                t_c = best_time(lambda: run("compiled"), args.repeats)
                diff = float(np.max(np.abs(run("compiled")[0] - run("python")[0])))
                print(f"{L:>2} {str(trlog):>5} {t_c:>13.4f} {t_py:>11.4f} {t_py / t_c:>8.1f} {diff:>10.2e}")
            else:
                print(f"{L:>2} {str(trlog):>5} {'n/a':>13} {t_py:>11.4f} {'n/a':>8} {'n/a':>10}")


if __name__ == "__main__":
    main()
