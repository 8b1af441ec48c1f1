"""Compare the compiled and pure-numpy kernel backends.

Times the three hot operations on one synthetic matrix and prints a
table of medians plus the speedup.  Run from the repo root:

    python3 benchmarks/bench_kernels.py --n 200000 --dim 512
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from refmatch import kernels


def make_matrix(rng, n: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    mat = rng.standard_normal((n, dim), dtype=np.float32)
    for lo in range(0, n, 100_000):
        block = mat[lo : lo + 100_000]
        block /= np.linalg.norm(block, axis=1, keepdims=True)
    return mat, np.arange(n, dtype=np.uint64)


def median_ms(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return float(np.median(times))


def run(args) -> None:
    rng = np.random.default_rng(args.seed)
    mat, ids = make_matrix(rng, args.n, args.dim)
    query = rng.standard_normal(args.dim)
    query = (query / np.linalg.norm(query)).astype(np.float32)
    batch = np.stack([query] * args.batch)

    cases = {
        "topk": lambda: kernels.topk(mat, ids, query, args.k),
        "topk parallel": lambda: kernels.topk(mat, ids, query, args.k, parallel=True),
        f"batch_topk x{args.batch}": lambda: kernels.batch_topk(mat, ids, batch, args.k),
        "perturb_matrix": lambda: kernels.perturb_matrix(mat, ids, 0, 1, 0.1),
    }

    results: dict[str, dict[str, float]] = {name: {} for name in cases}
    checks: dict[str, list] = {}
    for backend in ("numpy", "numba"):
        kernels.set_backend(backend)
        for name, fn in cases.items():
            fn()  # warm (jit compile on the numba side)
            results[name][backend] = median_ms(fn, args.repeats)
        rows, scores = kernels.topk(mat, ids, query, args.k)
        checks[backend] = [rows.tolist(), np.round(scores, 12).tolist()]

    if checks["numpy"][0] != checks["numba"][0]:
        raise SystemExit("backends disagree on returned rows")

    print(f"n={args.n} dim={args.dim} k={args.k} repeats={args.repeats}")
    width = max(len(name) for name in cases) + 2
    print(f"{'operation'.ljust(width)}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for name in cases:
        a, b = results[name]["numpy"], results[name]["numba"]
        print(f"{name.ljust(width)}{a:>10.2f}ms{b:>10.2f}ms{a / b:>9.2f}x")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=200_000, help="library rows")
    parser.add_argument("--dim", type=int, default=512)
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--batch", type=int, default=16)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    run(parser.parse_args())


if __name__ == "__main__":
    main()
