"""Leaf identification and neighbour resolution on the significance tree.

One work item per finest cell walks down from the root, choosing the child
from the bits of its own Morton code, and records where it stops. The
recorded grid is then compacted to one entry per leaf, and each leaf looks
west, east, south and north through it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from numba import prange

from . import parallel
from .zorder import compact_nb, encode_nb, level_offset, level_of_nb, offset_nb

REFLECTIVE, TRANSMISSIVE, INFLOW = 0, 1, 2
BOUNDARY_KINDS = {"reflective": REFLECTIVE, "transmissive": TRANSMISSIVE, "inflow": INFLOW}

INACTIVE, ACTIVE, MIXED = 0, 1, 2


def boundary_sentinel(kind: int) -> int:
    """Negative neighbour descriptor standing for a boundary of the given kind."""
    return -1 - kind


def sentinel_kind(descriptor: int) -> int:
    return -1 - descriptor


@dataclass
class LeafAssembly:
    """The non-uniform grid: leaves in ascending Morton order plus neighbours.

    ``neighbours[d, k]`` is the hierarchy index whose coefficients serve as
    leaf ``k``'s neighbour in direction ``d`` (west, east, south, north), or a
    negative boundary sentinel.
    """

    leaves: np.ndarray
    levels: np.ndarray
    neighbours: np.ndarray
    recorded: np.ndarray

    def __len__(self) -> int:
        return self.leaves.size

    @property
    def west(self):
        return self.neighbours[0]

    @property
    def east(self):
        return self.neighbours[1]

    @property
    def south(self):
        return self.neighbours[2]

    @property
    def north(self):
        return self.neighbours[3]


@numba.njit(parallel=True, cache=True)
def _ptt_kernel(sig, max_level, recorded):
    for m in prange(recorded.size):
        z = 0
        n = 0
        while n < max_level and sig[z]:
            n += 1
            z = offset_nb(n) + (m >> (2 * (max_level - n)))
        recorded[m] = z


def parallel_tree_traversal(sig: np.ndarray, max_level: int) -> np.ndarray:
    """Hierarchy index of the leaf covering each finest Morton code."""
    recorded = np.empty(1 << (2 * max_level), dtype=np.int64)
    _ptt_kernel(sig, max_level, recorded)
    return recorded


def compact_leaves(recorded: np.ndarray) -> np.ndarray:
    """Distinct leaves in order of their first covered finest cell."""
    _, leaves = parallel.compact_runs(recorded)
    return leaves


@numba.njit(parallel=True, cache=True)
def _neighbour_kernel(recorded, leaves, sig, active_class, edge_kinds, max_level, out, levels, bad):
    for k in prange(leaves.size):
        z = leaves[k]
        n = level_of_nb(z)
        levels[k] = n
        m = z - offset_nb(n)
        i = compact_nb(m)
        j = compact_nb(m >> 1)
        side = 1 << n
        for d in range(4):
            ii = i
            jj = j
            if d == 0:
                ii = i - 1
            elif d == 1:
                ii = i + 1
            elif d == 2:
                jj = j - 1
            else:
                jj = j + 1
            if ii < 0 or jj < 0 or ii >= side or jj >= side:
                out[d, k] = -1 - edge_kinds[d]
                continue
            mn = encode_nb(ii, jj)
            cov = recorded[mn << (2 * (max_level - n))]
            lc = level_of_nb(cov)
            if lc < max_level and sig[cov]:
                bad[k] = 1
            target = offset_nb(n) + mn if lc >= n else cov
            if active_class[target] == 0:
                out[d, k] = -1  # inactive cells behave as reflective walls
            else:
                out[d, k] = target


def find_neighbours(
    recorded: np.ndarray,
    leaves: np.ndarray,
    sig: np.ndarray,
    max_level: int,
    edge_kinds=(REFLECTIVE,) * 4,
    active_class: np.ndarray | None = None,
) -> LeafAssembly:
    """Resolve the four face neighbours of every leaf.

    A neighbour region at least as refined as the leaf is represented by its
    coefficient at the leaf's own level; a coarser region by its covering
    leaf.
    """
    if active_class is None:
        active_class = np.ones(level_offset(max_level + 1), dtype=np.int8)
    out = np.empty((4, leaves.size), dtype=np.int64)
    levels = np.empty(leaves.size, dtype=np.int8)
    bad = np.zeros(leaves.size, dtype=np.uint8)
    kinds = np.asarray(edge_kinds, dtype=np.int64)
    _neighbour_kernel(recorded, leaves, sig, active_class, kinds, max_level, out, levels, bad)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise RuntimeError(
            f"recorded grid is malformed: a neighbour lookup of leaf z={int(leaves[k])} "
            "landed on a cell that is not a leaf"
        )
    return LeafAssembly(leaves, levels, out, recorded)


def assemble(
    sig: np.ndarray,
    max_level: int,
    edge_kinds=(REFLECTIVE,) * 4,
    active_class: np.ndarray | None = None,
) -> LeafAssembly:
    recorded = parallel_tree_traversal(sig, max_level)
    leaves = compact_leaves(recorded)
    return find_neighbours(recorded, leaves, sig, max_level, edge_kinds, active_class)


def depth_first_leaves(sig: np.ndarray, max_level: int) -> list[int]:
    """Reference recursive traversal; leaves in visiting order."""
    out: list[int] = []

    def visit(n: int, m: int) -> None:
        z = level_offset(n) + m
        if n == max_level or not sig[z]:
            out.append(z)
            return
        for k in range(4):
            visit(n + 1, 4 * m + k)

    visit(0, 0)
    return out
