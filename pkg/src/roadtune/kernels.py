"""Hot numeric kernels with two interchangeable implementations.

The inner loops behind the n-gram overlap and longest-common-subsequence
metrics are compiled with numba when it is importable. Setting the
environment variable ``ROADTUNE_NO_NUMBA=1`` before import selects the pure
numpy implementations instead; both paths compute identical results and the
test suite cross-checks them. ``benchmarks/bench_kernels.py`` compares their
throughput.

All kernels take ``int64`` arrays of token ids; mapping tokens to ids is the
caller's job (see ``metrics.encode_pair``).
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "USING_NUMBA",
    "DISABLE_ENV_VAR",
    "lcs_length_ids",
    "clipped_matches",
    "clipped_matches_upto",
    "lcs_length_numpy",
    "clipped_matches_numpy",
    "clipped_matches_upto_numpy",
    "warmup",
]

DISABLE_ENV_VAR = "ROADTUNE_NO_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(DISABLE_ENV_VAR, "").strip().lower() not in ("1", "true", "yes")


# ---------------------------------------------------------------------------
# Loop implementations. Written in no-frills imperative style so numba can
# compile them; they also run unmodified (slowly) as plain Python.
# ---------------------------------------------------------------------------


def _lcs_table_loop(a, b):
    la = a.shape[0]
    lb = b.shape[0]
    if la == 0 or lb == 0:
        return 0
    prev = np.zeros(lb + 1, np.int64)
    cur = np.zeros(lb + 1, np.int64)
    for i in range(la):
        for j in range(lb):
            if a[i] == b[j]:
                cur[j + 1] = prev[j] + 1
            else:
                cur[j + 1] = max(prev[j + 1], cur[j])
        prev, cur = cur, prev
    return int(prev[lb])


def _match_count_loop(c, r, n):
    # Greedy first-fit pairing of equal windows. Windows only pair with
    # equal windows, so greedy attains the full multiset intersection
    # sum(min(count_c(g), count_r(g))).
    wc = c.shape[0] - n + 1
    wr = r.shape[0] - n + 1
    if wc <= 0 or wr <= 0:
        return 0
    used = np.zeros(wr, np.bool_)
    matched = 0
    for i in range(wc):
        for j in range(wr):
            if not used[j]:
                eq = True
                for k in range(n):
                    if c[i + k] != r[j + k]:
                        eq = False
                        break
                if eq:
                    used[j] = True
                    matched += 1
                    break
    return matched


def _matches_upto_loop(c, r, max_n):
    out = np.zeros(max_n, np.int64)
    for n in range(1, max_n + 1):
        out[n - 1] = _match_count_loop(c, r, n)
    return out


# ---------------------------------------------------------------------------
# Vectorized numpy fallbacks.
# ---------------------------------------------------------------------------


def lcs_length_numpy(a, b) -> int:
    """LCS length via a row-rolled DP with a running-max scan.

    Within one DP row the values are non-decreasing, so taking
    max(carry-over, diagonal+1 on match) and then a prefix maximum
    reproduces the usual three-way recurrence.
    """
    la = a.shape[0]
    lb = b.shape[0]
    if la == 0 or lb == 0:
        return 0
    prev = np.zeros(lb + 1, np.int64)
    head = np.zeros(1, np.int64)
    for i in range(la):
        diag = np.where(b == a[i], prev[:-1] + 1, 0)
        tmp = np.maximum(prev[1:], diag)
        prev = np.maximum.accumulate(np.concatenate((head, tmp)))
    return int(prev[lb])


def clipped_matches_numpy(c, r, n: int) -> int:
    """Clipped window-overlap count via row-unique bincounts."""
    wc = c.shape[0] - n + 1
    wr = r.shape[0] - n + 1
    if wc <= 0 or wr <= 0:
        return 0
    cw = np.lib.stride_tricks.sliding_window_view(c, n)
    rw = np.lib.stride_tricks.sliding_window_view(r, n)
    both = np.concatenate((cw, rw))
    _, inverse = np.unique(both, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    distinct = int(inverse.max()) + 1
    c_counts = np.bincount(inverse[:wc], minlength=distinct)
    r_counts = np.bincount(inverse[wc:], minlength=distinct)
    return int(np.minimum(c_counts, r_counts).sum())


def clipped_matches_upto_numpy(c, r, max_n: int):
    out = np.zeros(max_n, np.int64)
    for n in range(1, max_n + 1):
        out[n - 1] = clipped_matches_numpy(c, r, n)
    return out


# ---------------------------------------------------------------------------
# Dispatch. Compiled kernels when numba is available and not disabled.
# ---------------------------------------------------------------------------

USING_NUMBA = False

if _numba_requested():
    try:
        from numba import njit
    except ImportError:
        njit = None
    if njit is not None:
        _lcs_jit = njit(cache=True)(_lcs_table_loop)
        _match_count_jit = njit(cache=True)(_match_count_loop)

        @njit(cache=True)
        def _matches_upto_jit(c, r, max_n):
            out = np.zeros(max_n, np.int64)
            for n in range(1, max_n + 1):
                out[n - 1] = _match_count_jit(c, r, n)
            return out

        USING_NUMBA = True

if USING_NUMBA:
    lcs_length_ids = _lcs_jit
    clipped_matches = _match_count_jit
    clipped_matches_upto = _matches_upto_jit
else:
    lcs_length_ids = lcs_length_numpy
    clipped_matches = clipped_matches_numpy
    clipped_matches_upto = clipped_matches_upto_numpy


def warmup() -> None:
    """Trigger JIT compilation (a no-op on the numpy path)."""
    a = np.array([0, 1, 2], np.int64)
    b = np.array([0, 2], np.int64)
    lcs_length_ids(a, b)
    clipped_matches(a, b, 1)
    clipped_matches_upto(a, b, 2)
