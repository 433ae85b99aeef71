"""Worker-pool control and the scan-based compaction primitive.

All kernels in the package are one of: a parallel map with exclusive writes,
an exact min/max reduction, or the compaction below. None of them depend on
the worker count for their result.
"""

from __future__ import annotations

import logging
import os

import numba
import numpy as np
from numba import prange

log = logging.getLogger(__name__)

WORKERS_ENV = "MRSWE_WORKERS"

# fixed block size keeps the scan partition independent of the worker count
_SCAN_BLOCK = 1 << 14


def max_workers() -> int:
    return int(numba.config.NUMBA_NUM_THREADS)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return int(env)
    return min(os.cpu_count() or 1, max_workers())


def set_workers(n: int | None) -> int:
    """Size the kernel worker pool; ``None`` or 0 picks the default."""
    if not n:
        n = default_workers()
    cap = max_workers()
    if n > cap:
        raise ValueError(
            f"{n} workers requested but the pool was started with {cap}; "
            "raise NUMBA_NUM_THREADS before starting Python"
        )
    if n < 1:
        raise ValueError("worker count must be positive")
    numba.set_num_threads(n)
    return n


@numba.njit(parallel=True, cache=True)
def _block_sums(flags, block, sums):
    nb = sums.size
    for b in prange(nb):
        lo = b * block
        hi = min(lo + block, flags.size)
        acc = 0
        for k in range(lo, hi):
            acc += flags[k]
        sums[b] = acc


@numba.njit(parallel=True, cache=True)
def _scatter(values, flags, block, starts, out_pos, out_val):
    nb = starts.size
    for b in prange(nb):
        lo = b * block
        hi = min(lo + block, flags.size)
        pos = starts[b]
        for k in range(lo, hi):
            if flags[k]:
                out_pos[pos] = k
                out_val[pos] = values[k]
                pos += 1


def compact(values: np.ndarray, flags: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stable stream compaction: positions and values where ``flags`` is set."""
    nb = max(1, -(-flags.size // _SCAN_BLOCK))
    sums = np.empty(nb, dtype=np.int64)
    _block_sums(flags, _SCAN_BLOCK, sums)
    starts = np.zeros(nb, dtype=np.int64)
    np.cumsum(sums[:-1], out=starts[1:])
    total = int(sums.sum())
    out_pos = np.empty(total, dtype=np.int64)
    out_val = np.empty(total, dtype=values.dtype)
    _scatter(values, flags, _SCAN_BLOCK, starts, out_pos, out_val)
    return out_pos, out_val


@numba.njit(parallel=True, cache=True)
def _run_block_counts(values, block, sums):
    for b in prange(sums.size):
        lo = b * block
        hi = min(lo + block, values.size)
        acc = 0
        for k in range(lo, hi):
            if k == 0 or values[k] != values[k - 1]:
                acc += 1
        sums[b] = acc


@numba.njit(parallel=True, cache=True)
def _run_scatter(values, block, starts, out_pos, out_val):
    for b in prange(starts.size):
        lo = b * block
        hi = min(lo + block, values.size)
        pos = starts[b]
        for k in range(lo, hi):
            if k == 0 or values[k] != values[k - 1]:
                out_pos[pos] = k
                out_val[pos] = values[k]
                pos += 1


def compact_runs(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Keep the first element of every run of equal consecutive values.

    Same scan as :func:`compact` with the run-head test fused in.
    """
    nb = max(1, -(-values.size // _SCAN_BLOCK))
    sums = np.empty(nb, dtype=np.int64)
    _run_block_counts(values, _SCAN_BLOCK, sums)
    starts = np.zeros(nb, dtype=np.int64)
    np.cumsum(sums[:-1], out=starts[1:])
    total = int(sums.sum())
    out_pos = np.empty(total, dtype=np.int64)
    out_val = np.empty(total, dtype=values.dtype)
    _run_scatter(values, _SCAN_BLOCK, starts, out_pos, out_val)
    return out_pos, out_val
