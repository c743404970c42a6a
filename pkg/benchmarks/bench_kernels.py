"""Compare the compiled element kernels with the NumPy fallback.

    python benchmarks/bench_kernels.py [--h 0.01] [--repeat 5]

Prints the mean assembly time per backend and the maximum triplet difference.
"""

import argparse
import time

import numpy as np

from convexdrum import _kernels_py
from convexdrum.geometry import disk
from convexdrum.meshing import triangulate
from convexdrum.spectral import FESpace

try:
    from convexdrum import _kernels
except ImportError:  # extension not built
    _kernels = None


def _time(fn, args, repeat):
    fn(*args)  # warm-up
    t0 = time.perf_counter()
    for _ in range(repeat):
        out = fn(*args)
    return (time.perf_counter() - t0) / repeat, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, default=0.01)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    mesh = triangulate(disk(256), args.h)
    print(f"mesh: {mesh.n_triangles} triangles, {mesh.n_nodes} nodes")
    for degree, name in ((1, "p1_triplets"), (2, "p2_triplets")):
        V = FESpace(mesh, degree)
        inputs = (V.coords, V.elements)
        t_py, ref = _time(getattr(_kernels_py, name), inputs, args.repeat)
        line = f"P{degree}: numpy {1e3 * t_py:8.2f} ms"
        if _kernels is not None:
            t_cy, out = _time(getattr(_kernels, name), inputs, args.repeat)
            diff = max(float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))
                       for a, b in zip(out, ref))
            line += f"  cython {1e3 * t_cy:8.2f} ms  speedup {t_py / t_cy:5.2f}x  max diff {diff:.1e}"
        else:
            line += "  cython not built"
        print(line)


if __name__ == "__main__":
    main()
