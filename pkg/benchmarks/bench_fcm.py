"""Compare the compiled and pure-numpy clustering backends.

Runs the same seeded clustering problems against both backends and
reports wall time per run plus the largest membership difference, which
should sit at rounding-error level.

Usage: python3 benchmarks/bench_fcm.py [--repeats N]
"""
import argparse
import os
import time

import numpy as np

from flatm import FcmConfig, fcm_run
from flatm._kernels import HAS_NUMBA

SIZES = [
    (200, 10, 5),
    (1000, 20, 10),
    (5000, 50, 10),
    (20000, 50, 20),
]


def time_backend(name: str, data: np.ndarray, config: FcmConfig, repeats: int):
    os.environ["FLATM_BACKEND"] = name
    result = fcm_run(data, config)  # warm-up absorbs one-time compilation
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        result = fcm_run(data, config)
        best = min(best, time.perf_counter() - started)
    return best, result


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument(
        "--repeats", type=int, default=3,
        help="timed repetitions per case; best time wins (default: 3)",
    )
    args = parser.parse_args()
    if not HAS_NUMBA:
        print("numba is not installed; nothing to compare")
        return
    header = (
        f"{'points':>8} {'dims':>5} {'clusters':>8} "
        f"{'numba':>10} {'numpy':>10} {'speedup':>8} {'max |du|':>10}"
    )
    print(header)
    print("-" * len(header))
    for n, dims, clusters in SIZES:
        rng = np.random.default_rng(17)
        data = rng.normal(size=(n, dims))
        data[: n // 2] += 4.0
        config = FcmConfig(n_clusters=clusters, seed=17, max_iterations=30)
        t_nb, r_nb = time_backend("numba", data, config, args.repeats)
        t_np, r_np = time_backend("numpy", data, config, args.repeats)
        gap = float(np.abs(r_nb.membership - r_np.membership).max())
        print(
            f"{n:>8} {dims:>5} {clusters:>8} "
            f"{t_nb:>9.3f}s {t_np:>9.3f}s {t_np / t_nb:>7.1f}x {gap:>10.2e}"
        )


if __name__ == "__main__":
    main()
