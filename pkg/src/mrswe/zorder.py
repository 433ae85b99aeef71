"""Morton codes and Z-order indexing of the nested grid hierarchy.

Level ``n`` holds a ``2**n x 2**n`` grid. Cells of a level are numbered by
their Morton code ``m`` (bits of the column index ``i`` in even positions,
row index ``j`` in odd positions) and the levels are stacked coarse to fine,
so a cell's position in the flat hierarchy arrays is
``level_offset(n) + m``.

The scalar functions validate their arguments and are meant for callers
outside the kernels. The ``*_nb`` variants are unchecked and compiled for use
inside numba kernels.
"""

from __future__ import annotations

import numba
import numpy as np

MAX_LEVEL = 13

WEST, EAST, SOUTH, NORTH = 0, 1, 2, 3
DIRECTIONS = {"west": WEST, "east": EAST, "south": SOUTH, "north": NORTH}
# (di, dj) per direction code
_SHIFT = ((-1, 0), (1, 0), (0, -1), (0, 1))


def _check_level(n: int) -> None:
    if not 0 <= n <= MAX_LEVEL:
        raise ValueError(f"level {n} outside [0, {MAX_LEVEL}]")


def _spread(v: int) -> int:
    # 16-bit value -> bits in even positions of a 32-bit value
    v &= 0xFFFF
    v = (v | (v << 8)) & 0x00FF00FF
    v = (v | (v << 4)) & 0x0F0F0F0F
    v = (v | (v << 2)) & 0x33333333
    v = (v | (v << 1)) & 0x55555555
    return v


def _compact(v: int) -> int:
    v &= 0x55555555
    v = (v | (v >> 1)) & 0x33333333
    v = (v | (v >> 2)) & 0x0F0F0F0F
    v = (v | (v >> 4)) & 0x00FF00FF
    v = (v | (v >> 8)) & 0x0000FFFF
    return v


def morton_encode(i: int, j: int, level: int = MAX_LEVEL) -> int:
    """Interleave ``i`` (even bits) and ``j`` (odd bits)."""
    _check_level(level)
    side = 1 << level
    if not (0 <= i < side and 0 <= j < side):
        raise ValueError(f"cell ({i}, {j}) outside a {side}x{side} grid")
    return _spread(i) | (_spread(j) << 1)


def morton_decode(code: int, level: int = MAX_LEVEL) -> tuple[int, int]:
    _check_level(level)
    if not 0 <= code < 4**level:
        raise ValueError(f"Morton code {code} outside [0, 4**{level})")
    return _compact(code), _compact(code >> 1)


def level_offset(n: int) -> int:
    """Number of cells in all levels coarser than ``n``: ``(4**n - 1) // 3``."""
    if n < 0 or n > MAX_LEVEL + 1:
        raise ValueError(f"level {n} outside [0, {MAX_LEVEL + 1}]")
    return (4**n - 1) // 3


def hierarchy_size(max_level: int) -> int:
    """Total cell count of levels ``0..max_level``."""
    return level_offset(max_level + 1)


def z_index(n: int, morton: int) -> int:
    _check_level(n)
    if not 0 <= morton < 4**n:
        raise ValueError(f"Morton code {morton} invalid at level {n}")
    return level_offset(n) + morton


def level_of(z: int) -> int:
    """Level of the cell with hierarchy index ``z``."""
    if z < 0:
        raise ValueError(f"negative z-index {z}")
    n = 0
    while level_offset(n + 1) <= z:
        n += 1
    return n


def split_z_index(z: int) -> tuple[int, int]:
    n = level_of(z)
    return n, z - level_offset(n)


def child_z_indices(n: int, morton: int, max_level: int) -> list[int]:
    """Hierarchy indices of the four children; consecutive by construction.

    Child ``k`` covers sub-square ``(2i + (k & 1), 2j + (k >> 1))``.
    """
    if not 0 <= n < max_level:
        raise ValueError(f"level {n} has no children when L={max_level}")
    base = z_index(n + 1, 4 * morton)
    return [base + k for k in range(4)]


def parent_z_index(n: int, morton: int) -> int:
    if n <= 0:
        raise ValueError("the root cell has no parent")
    z_index(n, morton)
    return z_index(n - 1, morton >> 2)


def parent_morton(n: int, morton: int) -> tuple[int, int]:
    if n <= 0:
        raise ValueError("the root cell has no parent")
    return n - 1, morton >> 2


def same_level_neighbour(n: int, morton: int, direction: str | int) -> int | None:
    """Morton code of the face neighbour at level ``n``, or None at the domain edge."""
    d = DIRECTIONS[direction] if isinstance(direction, str) else int(direction)
    i, j = morton_decode(morton, n)
    di, dj = _SHIFT[d]
    i, j = i + di, j + dj
    side = 1 << n
    if not (0 <= i < side and 0 <= j < side):
        return None
    return morton_encode(i, j, n)


def finest_morton_range(n: int, morton: int, max_level: int) -> range:
    """Finest-level Morton codes covered by cell ``(n, morton)``; always contiguous."""
    shift = 2 * (max_level - n)
    return range(morton << shift, (morton + 1) << shift)


# ---------------------------------------------------------------------------
# vectorised helpers (numpy)


def morton_encode_array(i: np.ndarray, j: np.ndarray) -> np.ndarray:
    def spread(v):
        v = v.astype(np.int64) & 0xFFFF
        v = (v | (v << 8)) & 0x00FF00FF
        v = (v | (v << 4)) & 0x0F0F0F0F
        v = (v | (v << 2)) & 0x33333333
        v = (v | (v << 1)) & 0x55555555
        return v

    return spread(np.asarray(i)) | (spread(np.asarray(j)) << 1)


def morton_decode_array(code: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    def compact(v):
        v = v & 0x55555555
        v = (v | (v >> 1)) & 0x33333333
        v = (v | (v >> 2)) & 0x0F0F0F0F
        v = (v | (v >> 4)) & 0x00FF00FF
        v = (v | (v >> 8)) & 0x0000FFFF
        return v

    code = np.asarray(code, dtype=np.int64)
    return compact(code), compact(code >> 1)


def morton_order(level: int) -> np.ndarray:
    """``(2**level, 2**level)`` array mapping row ``j``, column ``i`` to its Morton code."""
    side = 1 << level
    jj, ii = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    return morton_encode_array(ii, jj)


# ---------------------------------------------------------------------------
# kernel-side twins


@numba.njit(inline="always", cache=True)
def spread_nb(v):
    v = v & 0xFFFF
    v = (v | (v << 8)) & 0x00FF00FF
    v = (v | (v << 4)) & 0x0F0F0F0F
    v = (v | (v << 2)) & 0x33333333
    v = (v | (v << 1)) & 0x55555555
    return v


@numba.njit(inline="always", cache=True)
def compact_nb(v):
    v = v & 0x55555555
    v = (v | (v >> 1)) & 0x33333333
    v = (v | (v >> 2)) & 0x0F0F0F0F
    v = (v | (v >> 4)) & 0x00FF00FF
    v = (v | (v >> 8)) & 0x0000FFFF
    return v


@numba.njit(inline="always", cache=True)
def encode_nb(i, j):
    return spread_nb(i) | (spread_nb(j) << 1)


@numba.njit(inline="always", cache=True)
def offset_nb(n):
    return ((1 << (2 * n)) - 1) // 3


@numba.njit(inline="always", cache=True)
def level_of_nb(z):
    n = 0
    while offset_nb(n + 1) <= z:
        n += 1
    return n
