"""Time the numba and numpy kernels on the same simulated batches.

    python benchmarks/bench_kernels.py [--n 1000] [--rows 256] [--repeat 20]

Both paths are imported directly, so the RANDLOGRANK_NUMBA flag does not
matter here. The first numba call (compilation) is excluded from timings.
"""
import argparse
import time

import numpy as np

from randlogrank import _kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000, help="units per dataset")
    ap.add_argument("--rows", type=int, default=256, help="datasets per batch")
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _kernels.numba is None:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(args.seed)
    W = rng.standard_exponential((args.rows, args.n))
    delta = rng.random((args.rows, args.n)) < 0.7
    Z = rng.random((args.rows, args.n)) < 0.5
    zeta = rng.standard_normal((args.rows, args.n))

    cases = {
        "logrank_rows": (
            lambda: _kernels.logrank_rows_numpy(W, delta, Z),
            lambda: _kernels.logrank_rows_numba(W, delta, Z),
        ),
        "ar1_rows": (
            lambda: _kernels.ar1_rows_numpy(zeta, 0.5),
            lambda: _kernels.ar1_rows_numba(zeta, 0.5),
        ),
    }
    a, b = _kernels.logrank_rows_numpy(W, delta, Z), _kernels.logrank_rows_numba(W, delta, Z)
    assert np.allclose(a[0], b[0]) and np.allclose(a[1], b[1])
    _kernels.ar1_rows_numba(zeta, 0.5)

    print(f"batch {args.rows} x {args.n}, best of {args.repeat}")
    print(f"{'kernel':<14}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, (np_fn, nb_fn) in cases.items():
        t_np = best_of(np_fn, args.repeat) * 1e3
        t_nb = best_of(nb_fn, args.repeat) * 1e3
        print(f"{name:<14}{t_np:>10.2f}{t_nb:>10.2f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
