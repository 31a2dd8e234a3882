"""Compare the compiled kernels with the numpy/scipy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Both backends are imported directly, so no environment variable is needed.
Each workload is checked for agreement before it is timed.
"""

import argparse
import timeit

import numpy as np

from grandcanon import _pykernels, geometry

try:
    from grandcanon import _ckernels
except ImportError:
    _ckernels = None


def workloads(rng):
    # Poisson cloud of unit density in a box around a radius-10 ball.
    pts = rng.uniform(-11, 11, size=(rng.poisson(22**3), 3))
    inside = np.linalg.norm(pts, axis=1) <= 10
    s, r = pts[inside], pts[~inside]
    poly = geometry.random_polytope(3, 12, 7)
    queries = rng.uniform(-3, 3, size=(20_000, 3))
    return {
        "cross_pairs delta=0.8": lambda k: k.cross_pairs(s, r, 0.8),
        "internal_pairs delta=1": lambda k: k.internal_pairs(s, 1.0),
        "project_polytope 20k": lambda k: k.project_polytope(queries, poly.normals, poly.offsets, 1e-10, 10_000),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return a.shape == b.shape and np.allclose(a, b, atol=1e-8)
    return a == b


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; only the fallback is available")
    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    print(f"{'workload':<26}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in workloads(np.random.default_rng(0)).items():
        results = {b: fn(k) for b, k in backends.items()}
        if len(results) == 2 and not same(results["python"], results["cython"]):
            raise SystemExit(f"{name}: backends disagree")
        best = {b: min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat)) for b, k in backends.items()}
        speed = f"{best['python'] / best['cython']:9.2f}x" if "cython" in best else ""
        print(f"{name:<26}" + "".join(f"{best[b]:11.4f}s" for b in backends) + f" {speed}")


if __name__ == "__main__":
    main()
