"""Time the compiled and pure-Python sweep kernels on identical inputs.

    python benchmarks/bench_kernels.py [--sizes 8 16 32 64] [--sweeps 2000]

Prints microseconds per sweep for each backend, the speedup, and whether the
two final states agree bit for bit.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from jacobi_ldp import _backend
from jacobi_ldp.sampler import _initial_state, make_rng


def time_kernel(kernel, n: int, sweeps: int, repeats: int) -> tuple[float, np.ndarray]:
    u = make_rng(0, n).random((sweeps * n, 2))
    best = float("inf")
    for _ in range(repeats):
        x = _initial_state(n)
        t0 = time.perf_counter()
        kernel(x, float(n), float(n), 0.5 / n, u, 1, np.empty((0, n)))
        best = min(best, time.perf_counter() - t0)
    return best / sweeps * 1e6, x


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32, 64])
    ap.add_argument("--sweeps", type=int, default=2000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)

    backends = ["python"]
    try:
        _backend.get_kernel("cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled kernel not built; timing the pure-Python kernel only")

    print(f"{'n':>4} " + " ".join(f"{b + ' us/sweep':>18}" for b in backends) + f" {'speedup':>9} {'identical':>9}")
    for n in args.sizes:
        res = {b: time_kernel(_backend.get_kernel(b)[1], n, args.sweeps, args.repeats) for b in backends}
        cols = " ".join(f"{res[b][0]:18.2f}" for b in backends)
        if len(backends) == 2:
            speed = res["python"][0] / res["cython"][0]
            same = np.array_equal(res["python"][1], res["cython"][1])
            print(f"{n:>4} {cols} {speed:9.1f} {str(same):>9}")
        else:
            print(f"{n:>4} {cols}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
