"""Compare the compiled and numpy kernel backends.

Run with ``python benchmarks/bench_kernels.py``.  Timings are the best of
``--repeat`` runs; the compiled backend is skipped if the extension is absent.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from fracshe import _pykernels

try:
    from fracshe import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(modes, steps, n):
    rng = np.random.default_rng(0)
    lower, upper = rng.normal(size=n), rng.normal(size=n)
    diag = 5 + rng.random(n)
    rhs = rng.normal(size=(n, n))
    u = rng.random(modes * steps)
    return {
        f"normal_block {steps}x{modes}": lambda k: k.normal_block(7, 0, 1, modes + 1, 0, steps),
        f"ndtri {u.size}": lambda k: k.ndtri(u),
        f"tridiag_solve {n}x{n}": lambda k: k.tridiag_solve(lower, diag, upper, rhs),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--modes", type=int, default=256)
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--n", type=int, default=128)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    print(f"{'kernel':<28}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for label, fn in cases(args.modes, args.steps, args.n).items():
        times = {name: min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat)) for name, k in backends.items()}
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:<28}" + "".join(f"{t:>11.4f}s" for t in times.values()) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
