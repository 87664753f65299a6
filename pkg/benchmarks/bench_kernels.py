"""Benchmark the compiled kernels against the pure-numpy fallback.

Run:  python benchmarks/bench_kernels.py

Both backends draw identical index streams; this only measures speed. The
weighted without-replacement loop and the k-DPP item-selection loop are the
two hot paths exercised by the Monte-Carlo-heavy parts of the test suite.
"""

import time

import numpy as np

from repsample._kernels import _pykernels

try:
    from repsample._kernels import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_weighted_wor():
    rng = np.random.default_rng(0)
    print("\nweighted_wor (sequential renormalized draws)")
    print(f"{'n':>8} {'size':>7} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for n in (1_000, 10_000, 50_000):
        size = n // 5
        w = rng.random(n)
        us = rng.random(size)
        t_py = _time(lambda: _pykernels.weighted_wor(w, size, us))
        if _ckernels is None:
            print(f"{n:>8} {size:>7} {t_py:>9.4f}s {'-':>10} {'-':>8}")
            continue
        t_c = _time(lambda: _ckernels.weighted_wor(w, size, us))
        assert np.array_equal(
            _pykernels.weighted_wor(w, size, us), _ckernels.weighted_wor(w, size, us)
        )
        print(f"{n:>8} {size:>7} {t_py:>9.4f}s {t_c:>9.4f}s {t_py / t_c:>7.1f}x")


def _orthonormal_rows(rng, r, n):
    q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    return np.ascontiguousarray(q.T)


def bench_kdpp_items():
    rng = np.random.default_rng(1)
    print("\nkdpp_items (dual k-DPP item selection, batched small draws)")
    print(f"{'n':>8} {'rank':>5} {'draws':>7} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for n, r, draws in ((50, 4, 2000), (1_000, 8, 500), (20_000, 13, 50)):
        M = _orthonormal_rows(rng, r, n)
        us = rng.random(r)

        def run(impl):
            def inner():
                for _ in range(draws):
                    impl.kdpp_items(M.copy(), us)

            return inner

        t_py = _time(run(_pykernels), repeats=3)
        if _ckernels is None:
            print(f"{n:>8} {r:>5} {draws:>7} {t_py:>9.4f}s {'-':>10} {'-':>8}")
            continue
        t_c = _time(run(_ckernels), repeats=3)
        assert np.array_equal(
            _pykernels.kdpp_items(M.copy(), us), _ckernels.kdpp_items(M.copy(), us)
        )
        print(f"{n:>8} {r:>5} {draws:>7} {t_py:>9.4f}s {t_c:>9.4f}s {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    if _ckernels is None:
        print("compiled backend not built; showing python fallback timings only")
    bench_weighted_wor()
    bench_kdpp_items()
