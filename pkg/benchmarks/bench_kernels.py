"""Throughput comparison between the jit kernels and the numpy fallbacks.

Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --lengths 16 64 256 --repeats 500

When the jit path is disabled (ROADTUNE_NO_NUMBA=1) both columns measure
the same numpy functions; the script says so instead of reporting a fake
speedup.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from roadtune import kernels


def _time_call(fn, args_list, repeats: int) -> float:
    """Best-of-three average microseconds per call over the workload."""
    best = float("inf")
    for _ in range(3):
        start = time.perf_counter()
        for _ in range(repeats):
            for args in args_list:
                fn(*args)
        elapsed = time.perf_counter() - start
        best = min(best, elapsed)
    return best / (repeats * len(args_list)) * 1e6


def _workload(rng, length: int, pairs: int, alphabet: int):
    return [
        (
            rng.integers(0, alphabet, size=length).astype(np.int64),
            rng.integers(0, alphabet, size=length).astype(np.int64),
        )
        for _ in range(pairs)
    ]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--lengths", type=int, nargs="+", default=[8, 32, 128, 512],
        help="token counts per side",
    )
    parser.add_argument("--pairs", type=int, default=20, help="array pairs per length")
    parser.add_argument("--repeats", type=int, default=200, help="passes over each workload")
    parser.add_argument("--alphabet", type=int, default=50, help="distinct token ids")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    kernels.warmup()
    rng = np.random.default_rng(args.seed)

    cases = [
        ("lcs length", kernels.lcs_length_ids, kernels.lcs_length_numpy, ()),
        ("1-gram clip", kernels.clipped_matches, kernels.clipped_matches_numpy, (1,)),
        ("4-gram clip", kernels.clipped_matches, kernels.clipped_matches_numpy, (4,)),
        (
            "clip to 4",
            kernels.clipped_matches_upto,
            kernels.clipped_matches_upto_numpy,
            (4,),
        ),
    ]

    if kernels.USING_NUMBA:
        print("jit path active; comparing against the numpy fallbacks\n")
    else:
        print(
            "jit path disabled (%s set or numba unavailable); both columns "
            "run the numpy implementations\n" % kernels.DISABLE_ENV_VAR
        )

    header = f"{'kernel':<12} {'tokens':>6} {'fast us':>9} {'numpy us':>9} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for length in args.lengths:
        workload = _workload(rng, length, args.pairs, args.alphabet)
        for name, fast, fallback, extra in cases:
            calls = [pair + extra for pair in workload]
            fast_us = _time_call(fast, calls, args.repeats)
            numpy_us = _time_call(fallback, calls, args.repeats)
            ratio = numpy_us / fast_us if fast_us else float("inf")
            print(
                f"{name:<12} {length:>6} {fast_us:>9.2f} {numpy_us:>9.2f} {ratio:>7.1f}x"
            )
        print()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
