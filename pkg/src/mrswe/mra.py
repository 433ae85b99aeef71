"""Haar-wavelet multiresolution analysis on the Z-order hierarchy.

Scale coefficients live in flat arrays of length ``hierarchy_size(L)``; the
finest slots hold physical cell values and a level-``n`` coefficient equals
the physical cell average times ``2**(L - n)``. Details exist for levels
``0..L-1`` and are stored per quantity as ``(nq, 3, level_offset(L))``
arrays (alpha, beta, gamma).

Every kernel walks the hierarchy one level at a time; within a level each
cell is written by exactly one work item.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from numba import prange

from .zorder import hierarchy_size, level_offset, offset_nb

H0 = 1.0 / math.sqrt(2.0)
H1 = 1.0 / math.sqrt(2.0)
G0 = 1.0 / math.sqrt(2.0)
G1 = -1.0 / math.sqrt(2.0)

SMAX_FLOOR = 1e-12


@numba.njit(inline="always", cache=True)
def encode_children(s0, s1, s2, s3):
    """Parent coefficient and (alpha, beta, gamma) details of four children."""
    # the filter products H*H, H*G, G*G are all +-1/2, applied exactly
    a = s0 + s1
    b = s2 + s3
    c = s0 - s1
    d = s2 - s3
    return 0.5 * (a + b), 0.5 * (a - b), 0.5 * (c + d), 0.5 * (c - d)


@numba.njit(inline="always", cache=True)
def decode_children(s, da, db, dg):
    a = s + da
    b = s - da
    c = db + dg
    d = db - dg
    return 0.5 * (a + c), 0.5 * (a - c), 0.5 * (b + d), 0.5 * (b - d)


def to_physical(s, n: int, max_level: int):
    return s * 2.0 ** (n - max_level)


def from_physical(value, n: int, max_level: int):
    return value * 2.0 ** (max_level - n)


@numba.njit(inline="always", cache=True)
def significant_nb(da, db, dg, smax, n, eps, max_level):
    dnorm = 0.0
    if smax >= SMAX_FLOOR:
        dnorm = max(abs(da), abs(db), abs(dg)) / smax
    return dnorm >= 2.0 ** (n - max_level) * eps


def significance(da, db, dg, smax, n, eps, max_level) -> bool:
    """Whether one quantity's details at level ``n`` pass the threshold ``2**(n-L) * eps``."""
    return bool(significant_nb(float(da), float(db), float(dg), float(smax), n, float(eps), max_level))


# ---------------------------------------------------------------------------
# kernels


@numba.njit(parallel=True, cache=True)
def _encode_kernel(values, details, max_level, restrict, prev_sig):
    nq = values.shape[0]
    for n in range(max_level - 1, -1, -1):
        base = offset_nb(n)
        cbase = offset_nb(n + 1)
        for m in prange(1 << (2 * n)):
            p = base + m
            if restrict and prev_sig[p] == 0:
                # off-tree details are already zero (see _discard_kernel)
                continue
            c = cbase + 4 * m
            for q in range(nq):
                s, da, db, dg = encode_children(
                    values[q, c], values[q, c + 1], values[q, c + 2], values[q, c + 3]
                )
                values[q, p] = s
                details[q, 0, p] = da
                details[q, 1, p] = db
                details[q, 2, p] = dg


@numba.njit(parallel=True, cache=True)
def _flag_kernel(details, smax, eps, max_level, static_mask, restrict, prev_sig, out):
    nq = details.shape[0]
    for n in range(max_level):
        base = offset_nb(n)
        # what an all-zero detail triple decides at this level
        zero_flag = significant_nb(0.0, 0.0, 0.0, 0.0, n, eps, max_level)
        for m in prange(1 << (2 * n)):
            p = base + m
            flag = static_mask[p] != 0
            if restrict and prev_sig[p] == 0:
                out[p] = 1 if (flag or zero_flag) else 0
                continue
            q = 0
            while not flag and q < nq:
                flag = significant_nb(
                    details[q, 0, p], details[q, 1, p], details[q, 2, p], smax[q], n, eps, max_level
                )
                q += 1
            out[p] = 1 if flag else 0


@numba.njit(parallel=True, cache=True)
def _anticipate_kernel(details, smax, eps, max_level, restrict, prev_sig, sig):
    # children of cells whose details also pass the next level's threshold
    nq = details.shape[0]
    for n in range(max_level - 1):
        base = offset_nb(n)
        cbase = offset_nb(n + 1)
        for m in prange(1 << (2 * n)):
            p = base + m
            if sig[p] == 0 or (restrict and prev_sig[p] == 0):
                continue
            for q in range(nq):
                if significant_nb(details[q, 0, p], details[q, 1, p], details[q, 2, p],
                                  smax[q], n + 1, eps, max_level):
                    c = cbase + 4 * m
                    sig[c] = 1
                    sig[c + 1] = 1
                    sig[c + 2] = 1
                    sig[c + 3] = 1
                    break


_XBITS = 0x5555555555555555


@numba.njit(parallel=True, cache=True)
def _band_kernel(sig, max_level, out):
    for n in range(max_level):
        base = offset_nb(n)
        full = (1 << (2 * n)) - 1
        xm = _XBITS & full
        ym = xm << 1
        for m in prange(1 << (2 * n)):
            p = base + m
            if sig[p]:
                out[p] = 1
                continue
            # Morton increments/decrements along one axis, no decoding needed
            mx = m & xm
            my = m & ym
            hit = False
            if mx != 0 and sig[base + (((mx - 1) & xm) | my)]:
                hit = True
            elif mx != xm and sig[base + ((((m | ym) + 1) & xm) | my)]:
                hit = True
            elif my != 0 and sig[base + (((my - 1) & ym) | mx)]:
                hit = True
            elif my != ym and sig[base + ((((m | xm) + 1) & ym) | mx)]:
                hit = True
            out[p] = 1 if hit else 0


@numba.njit(parallel=True, cache=True)
def _discard_kernel(details, sig, restrict, prev_sig):
    nq = details.shape[0]
    for p in prange(sig.size):
        if sig[p] or (restrict and prev_sig[p] == 0):
            continue
        for q in range(nq):
            details[q, 0, p] = 0.0
            details[q, 1, p] = 0.0
            details[q, 2, p] = 0.0


@numba.njit(parallel=True, cache=True)
def _closure_kernel(sig, max_level):
    for n in range(max_level - 2, -1, -1):
        base = offset_nb(n)
        cbase = offset_nb(n + 1)
        for m in prange(1 << (2 * n)):
            c = cbase + 4 * m
            if sig[c] | sig[c + 1] | sig[c + 2] | sig[c + 3]:
                sig[base + m] = 1


@numba.njit(parallel=True, cache=True)
def _decode_kernel(values, details, sig, max_level):
    nq = values.shape[0]
    for n in range(max_level):
        base = offset_nb(n)
        cbase = offset_nb(n + 1)
        for m in prange(1 << (2 * n)):
            p = base + m
            if sig[p] == 0:
                continue
            c = cbase + 4 * m
            for q in range(nq):
                s0, s1, s2, s3 = decode_children(
                    values[q, p], details[q, 0, p], details[q, 1, p], details[q, 2, p]
                )
                values[q, c] = s0
                values[q, c + 1] = s1
                values[q, c + 2] = s2
                values[q, c + 3] = s3


# ---------------------------------------------------------------------------
# public API


@dataclass
class DetailField:
    """Details, significance flags and per-quantity normalisers."""

    coeffs: np.ndarray  # (nq, 3, level_offset(L)): alpha, beta, gamma
    sig: np.ndarray  # (level_offset(L),) uint8, ancestor-closed
    smax: np.ndarray  # (nq,)

    @property
    def alpha(self) -> np.ndarray:
        return self.coeffs[:, 0]

    @property
    def beta(self) -> np.ndarray:
        return self.coeffs[:, 1]

    @property
    def gamma(self) -> np.ndarray:
        return self.coeffs[:, 2]


def _as_2d(values: np.ndarray) -> np.ndarray:
    return values[None, :] if values.ndim == 1 else values


def compute_smax(values: np.ndarray, max_level: int, active: np.ndarray | None = None) -> np.ndarray:
    """Largest absolute finest-level coefficient per quantity, over active cells."""
    fine = _as_2d(values)[:, level_offset(max_level):]
    if active is not None:
        fine = fine[:, active.astype(bool)]
    if fine.shape[1] == 0:
        return np.zeros(fine.shape[0])
    return np.abs(fine).max(axis=1)


def check_finite(values: np.ndarray, names=("h", "qx", "qy")) -> None:
    values = _as_2d(values)
    bad = ~np.isfinite(values)
    if bad.any():
        q, z = np.argwhere(bad)[0]
        name = names[q] if q < len(names) else f"quantity {q}"
        raise FloatingPointError(f"non-finite coefficient for {name} at z-index {z}")


def flag_significant(
    details: np.ndarray,
    smax: np.ndarray,
    eps: float,
    max_level: int,
    static_mask: np.ndarray | None = None,
    band: bool = False,
    prev_sig: np.ndarray | None = None,
) -> np.ndarray:
    """Threshold the details, OR the static mask, optionally add a safety zone, close ancestors.

    The safety zone (``band=True``) has two parts: cells whose details also
    pass the next finer level's threshold get their children flagged, so the
    tree can deepen by one level per call; then every flagged cell's
    same-level face neighbours are flagged. With ``prev_sig`` given, cells
    outside it are taken to carry zero details.
    """
    nint = level_offset(max_level)
    if static_mask is None:
        static_mask = np.zeros(nint, dtype=np.uint8)
    restrict = prev_sig is not None
    if prev_sig is None:
        prev_sig = np.zeros(1, dtype=np.uint8)
    raw = np.empty(nint, dtype=np.uint8)
    _flag_kernel(details, np.asarray(smax, dtype=np.float64), float(eps), max_level, static_mask,
                 restrict, prev_sig, raw)
    if band and max_level > 0:
        _anticipate_kernel(details, np.asarray(smax, dtype=np.float64), float(eps), max_level,
                           restrict, prev_sig, raw)
        widened = np.empty_like(raw)
        _band_kernel(raw, max_level, widened)
        raw = widened
    _closure_kernel(raw, max_level)
    return raw


def close_ancestors(sig: np.ndarray, max_level: int) -> np.ndarray:
    """Make a flag array ancestor-closed in place and return it."""
    _closure_kernel(sig, max_level)
    return sig


def encode_all(
    values: np.ndarray,
    max_level: int,
    eps: float,
    smax: np.ndarray | None = None,
    static_mask: np.ndarray | None = None,
    band: bool = False,
) -> DetailField:
    """Full bottom-up encode of every level, then flag.

    ``values`` is modified in place: coarse slots receive the parent
    coefficients. ``smax`` defaults to the largest finest-level magnitude.
    Details of insignificant cells are discarded (set to zero).
    """
    values = _as_2d(values)
    check_finite(values[:, level_offset(max_level):])
    nq = values.shape[0]
    nint = level_offset(max_level)
    coeffs = np.zeros((nq, 3, nint))
    _encode_kernel(values, coeffs, max_level, False, np.zeros(1, dtype=np.uint8))
    if smax is None:
        smax = compute_smax(values, max_level)
    sig = flag_significant(coeffs, smax, eps, max_level, static_mask, band)
    _discard_kernel(coeffs, sig, False, sig)
    return DetailField(coeffs, sig, np.asarray(smax, dtype=np.float64))


def zero_details_and_reencode(
    values: np.ndarray,
    details: DetailField,
    max_level: int,
    eps: float,
    static_mask: np.ndarray | None = None,
    band: bool = False,
) -> DetailField:
    """Re-encode only along the previous significant tree; details elsewhere become zero.

    Off-tree coarse slots must already hold the current leaf coefficients
    (FV write-back goes to leaf slots, and leaves are exactly the off-tree
    children of on-tree cells), and off-tree details must be zero, which
    :func:`encode_all` and this function both guarantee on return.
    """
    values = _as_2d(values)
    _encode_kernel(values, details.coeffs, max_level, True, details.sig)
    sig = flag_significant(details.coeffs, details.smax, eps, max_level, static_mask, band, details.sig)
    _discard_kernel(details.coeffs, sig, True, details.sig)
    return DetailField(details.coeffs, sig, details.smax)


def decode_tree(values: np.ndarray, details: DetailField, max_level: int) -> np.ndarray:
    """Rebuild children of every significant cell, coarse to fine. In place."""
    values = _as_2d(values)
    _decode_kernel(values, details.coeffs, details.sig, max_level)
    return values


def preprocess_dem(z_finest: np.ndarray, max_level: int, eps: float, active: np.ndarray | None = None):
    """One-off MRA of the bed.

    ``z_finest`` is in Morton order. Returns ``(z_hierarchy, mask)`` where
    the mask is the ancestor-closed significance of the bed details.
    """
    side = 1 << max_level
    if z_finest.size != side * side:
        raise ValueError(
            f"bed has {z_finest.size} cells, expected {side}x{side}; "
            "pad or resample the DEM onto the 2**L grid first"
        )
    z = np.zeros(hierarchy_size(max_level))
    z[level_offset(max_level):] = z_finest
    coeffs = np.zeros((1, 3, level_offset(max_level)))
    zz = z[None, :]
    _encode_kernel(zz, coeffs, max_level, False, np.zeros(1, dtype=np.uint8))
    smax = compute_smax(zz, max_level, active)
    mask = flag_significant(coeffs, smax, eps, max_level)
    return z, mask


def physical_hierarchy(coeffs: np.ndarray, max_level: int) -> np.ndarray:
    """Physical value of every cell of a hierarchy array."""
    out = np.empty_like(coeffs)
    for n in range(max_level + 1):
        a, b = level_offset(n), level_offset(n + 1)
        out[..., a:b] = coeffs[..., a:b] * 2.0 ** (n - max_level)
    return out
