"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from weakkam import _backend, _fallback
from weakkam.grid import PeriodicGrid
from weakkam.model import pendulum_model
from weakkam.semigroup import build_kernel, solve_weak_kam

try:
    from weakkam import _core
except ImportError:
    _core = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def use(impl):
    for name in ("minplus_apply", "minplus_argmin", "karp_table"):
        setattr(_backend, name, getattr(impl, name))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = [("python", _fallback)] + ([("cython", _core)] if _core is not None else [])
    if _core is None:
        print("compiled extension not available; timing the fallback only")

    cases = [
        ("circle 256", build_kernel(pendulum_model(), PeriodicGrid.circle(256), 0.05, 4.0)),
        ("circle 1024", build_kernel(pendulum_model(), PeriodicGrid.circle(1024), 0.05, 4.0)),
        ("torus 64x64", build_kernel(pendulum_model(2), PeriodicGrid.torus((64, 64)), 0.1, 4.0)),
    ]
    rng = np.random.default_rng(0)
    print(f"{'case':<14}{'kernel':<16}" + "".join(f"{n:>12}" for n, _ in impls) + f"{'speedup':>10}")
    for label, k in cases:
        u = rng.normal(size=k.grid.size)
        rows = {
            "minplus_apply": lambda m: m.minplus_apply(u, k.pred, k.weights),
            "minplus_argmin": lambda m: m.minplus_argmin(u, k.pred, k.weights),
        }
        if k.grid.size <= 1024:
            rows["karp_table"] = lambda m: m.karp_table(k.pred, k.weights, k.grid.size)

        def solve(m):
            use(m)
            solve_weak_kam(k, tol=1e-10)

        rows["solve"] = solve
        for name, fn in rows.items():
            t = [best_of(lambda: fn(m), args.repeat if name != "solve" else 1) for _, m in impls]
            ratio = f"{t[0] / t[1]:>9.1f}x" if len(t) > 1 else ""
            print(f"{label:<14}{name:<16}" + "".join(f"{x * 1e3:>10.2f}ms" for x in t) + ratio)
    use(_core if _core is not None else _fallback)


if __name__ == "__main__":
    main()
