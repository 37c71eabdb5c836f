"""Time the numba and numpy kernel backends on representative inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--size 128]

Numba timings exclude the first (compiling) call.
"""

import argparse
import time

import numpy as np

from motionsrf import kernels
from motionsrf.features import HOG_DIMS
from motionsrf.imagecore import CANNY_SIGMA, smoothed_gradients, to_gray


def make_inputs(size, seed=0):
    rng = np.random.default_rng(seed)
    img = rng.random((size, size, 3))
    gray = np.ascontiguousarray(to_gray(img))
    gx, gy, mag = smoothed_gradients(gray, CANNY_SIGMA)
    psize = 13
    half = psize // 2
    n = 500
    centers = np.stack([rng.integers(half, size - half, n), rng.integers(half, size - half, n)], axis=1)
    centers = centers.astype(np.int64)

    # a random full tree of depth 10 over 108-dim descriptors
    depth = 10
    n_int = 2 ** depth - 1
    n_nodes = 2 ** (depth + 1) - 1
    kind = np.zeros(n_nodes, dtype=np.int64)
    kind[:n_int] = rng.integers(1, 5, n_int)
    p1 = rng.integers(0, HOG_DIMS, n_nodes).astype(np.int64)
    p2 = rng.integers(0, HOG_DIMS, n_nodes).astype(np.int64)
    thr = rng.uniform(-0.2, 0.4, n_nodes)
    left = np.where(kind > 0, 2 * np.arange(n_nodes) + 1, -1).astype(np.int64)
    right = np.where(kind > 0, 2 * np.arange(n_nodes) + 2, -1).astype(np.int64)
    feats = rng.random((20000, HOG_DIMS))

    resp = rng.random(2000)
    thr_sorted = np.sort(rng.random(10))
    xc = rng.standard_normal((2000, 169 * 2))
    sqn = np.einsum("ij,ij->i", xc, xc)

    dx = rng.uniform(-3, 3, (size, size))
    dy = rng.uniform(-3, 3, (size, size))
    patches = rng.random((n, psize * psize, 2))

    return {
        "nms": (mag, gx, gy),
        "hysteresis": (mag, 0.1, 0.2),
        "orientation_hist": (np.ascontiguousarray(img), centers, psize),
        "tree_apply": (kind, p1, p2, thr, left, right, feats),
        "split_group_sums": (resp, thr_sorted, xc, sqn),
        "splat": (np.ascontiguousarray(img), dx, dy),
        "accumulate_patches": (centers, patches, psize, size, size),
    }


def call(name, args):
    return getattr(kernels, name)(*args)


def bench(inputs, repeat):
    rows = []
    for name, args in inputs.items():
        timings = {}
        for backend in ("numba", "numpy"):
            if backend not in kernels.available():
                continue
            with kernels.use_backend(backend):
                call(name, args)  # warm-up / compile
                best = np.inf
                for _ in range(repeat):
                    t0 = time.perf_counter()
                    call(name, args)
                    best = min(best, time.perf_counter() - t0)
            timings[backend] = best
        rows.append((name, timings))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=128)
    args = ap.parse_args()
    rows = bench(make_inputs(args.size), args.repeat)
    print(f"{'kernel':<20s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name, t in rows:
        nb = t.get("numba", np.nan) * 1e3
        npy = t.get("numpy", np.nan) * 1e3
        print(f"{name:<20s} {nb:10.3f} {npy:10.3f} {npy / nb:8.1f}x")


if __name__ == "__main__":
    main()
