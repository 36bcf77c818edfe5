"""Time the compiled likelihood kernel against its numpy fallback.

    python benchmarks/bench_kernels.py [--repeats 50]

Also times one full fit each way, toggling the same dispatch switch that
FUZZYDAG_DISABLE_JIT sets at import time.
"""

import argparse
import time

import numpy as np

from fuzzydag import _accel, _kernels, elcm, synth
from fuzzydag.solver import fit


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times), float(np.median(times))


def kernel_inputs(n, d, family, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    binary = rng.random(d) < 0.3
    X[:, binary] = (X[:, binary] > 0).astype(float)
    B = rng.uniform(-1, 1, (d, d)) * (rng.random((d, d)) < 0.2)
    np.fill_diagonal(B, 0)
    fam = np.full(d, elcm.FAMILIES[family], dtype=np.int64)
    return X, X @ B, fam, np.ones(d), binary


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    print(f"numba available: {_accel.NUMBA_AVAILABLE}")
    print(f"{'shape':>12} {'family':>9} {'numba ms':>9} {'numpy ms':>9} {'speedup':>8}")
    for n, d in ((500, 10), (2000, 30), (5000, 100)):
        for family in ("gaussian", "cauchy"):
            inputs = kernel_inputs(n, d, family)
            _kernels.nll_score_loop(*inputs)  # compile outside the timing
            jit, _ = best_of(lambda: _kernels.nll_score_loop(*inputs), args.repeats)
            ref, _ = best_of(lambda: _kernels.nll_score_numpy(*inputs), args.repeats)
            print(f"{n:>6}x{d:<5} {family:>9} {jit * 1e3:9.3f} {ref * 1e3:9.3f} {ref / jit:8.2f}")

    _, data = synth.build_scenario(synth.ScenarioSpec(n_nodes=20, avg_degree=2, binary_ratio=0.3,
                                                      n_samples=500, seed=0))
    for use in (True, False):
        _accel.USE_NUMBA = use and _accel.NUMBA_AVAILABLE
        fit(data)  # warm up
        start = time.perf_counter()
        res = fit(data)
        label = "numba" if _accel.USE_NUMBA else "numpy"
        print(f"full fit D=20 N=500 ({label}): {time.perf_counter() - start:.2f}s, {len(res.graph)} edges")


if __name__ == "__main__":
    main()
