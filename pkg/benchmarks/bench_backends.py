"""Compare the numba and numpy kernels on the unit-square problem.

    python3 benchmarks/bench_backends.py --ns 27,81,162 --repeat 3

Each row reports the best wall time over ``--repeat`` runs after one warm-up
call (which also triggers JIT compilation), and checks that both backends
produce identical arrays.
"""
import argparse
import json
import time

import numpy as np

from sandpile_patterns import kernels
from sandpile_patterns._accel import HAVE_NUMBA
from sandpile_patterns.grid import ShapeSpec, _laplacian_array, build_mask
from sandpile_patterns.solver import initial_bound


def best_of(fn, repeat):
    fn()
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3, out


def relax_case(mask, backend, schedule):
    mem = mask.member
    b = initial_bound(mask, 2)

    def run():
        v = np.where(mem, b, 0).astype(np.int64)
        kernels.relax(v, mem, 2, schedule=schedule, backend=backend)
        return v

    return run


def burn_case(lap, mem, backend):
    return lambda: kernels.burn_rounds(lap, mem, 2, backend=backend)


def topple_case(mem, backend, height):
    def run():
        s = np.where(mem, height, 0).astype(np.int64)
        odo = kernels.topple(s, mem, 2, order="stack" if backend == "numba" else "parallel",
                             backend=backend)
        return odo

    return run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ns", default="27,81")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]
    rows = []
    for n in (int(t) for t in args.ns.split(",")):
        mask = build_mask(ShapeSpec.unit_square(), n)
        mem = mask.member
        ref = {}
        for kernel in ("relax", "burn", "topple"):
            for be in backends:
                if kernel == "relax":
                    fn = relax_case(mask, be, "redblack")
                elif kernel == "burn":
                    v = relax_case(mask, "numpy" if not HAVE_NUMBA else "numba", "redblack")()
                    fn = burn_case(_laplacian_array(-v), mem, be)
                else:
                    fn = topple_case(mem, be, 4)
                ms, out = best_of(fn, args.repeat)
                same = None
                if kernel in ref:
                    same = bool(np.array_equal(ref[kernel], out))
                else:
                    ref[kernel] = out
                rows.append({"n": n, "kernel": kernel, "backend": be, "ms": round(ms, 2),
                             "matches_first": same})
                print(json.dumps(rows[-1]))
    speed = {}
    for r in rows:
        speed.setdefault((r["n"], r["kernel"]), {})[r["backend"]] = r["ms"]
    for (n, k), d in sorted(speed.items()):
        if len(d) == 2 and d["numba"] > 0:
            print(f"n={n:4d} {k:7s} numpy/numba = {d['numpy'] / d['numba']:.1f}x")


if __name__ == "__main__":
    main()
