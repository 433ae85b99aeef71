"""First-order finite-volume physics for the 2D shallow water equations.

HLL fluxes on hydrostatically reconstructed face states (well-balanced and
depth-positive), a semi-implicit Manning friction split, ghost states for
the supported boundary kinds, and the CFL timestep.

Everything numerical is a scalar ``njit`` function so the adaptive and the
uniform solvers run exactly the same arithmetic per cell.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

log = logging.getLogger(__name__)

G_DEFAULT = 9.80665

WEST, EAST, SOUTH, NORTH = 0, 1, 2, 3
REFLECTIVE, TRANSMISSIVE, INFLOW = 0, 1, 2


class State(NamedTuple):
    h: float
    qx: float
    qy: float


class Cell(NamedTuple):
    h: float
    qx: float
    qy: float
    z: float


@dataclass(frozen=True)
class PhysicsParams:
    g: float = G_DEFAULT
    manning: float = 0.0
    cfl: float = 0.5
    h_dry: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"CFL number {self.cfl} outside (0, 1]")
        if self.h_dry <= 0.0:
            raise ValueError("h_dry must be positive")
        if self.g <= 0.0:
            raise ValueError("g must be positive")
        if self.manning < 0.0:
            raise ValueError("Manning coefficient must be non-negative")


# ---------------------------------------------------------------------------
# scalar kernels


@numba.njit(inline="always", cache=True)
def velocity(h, q, h_dry):
    return q / h if h >= h_dry else 0.0


@numba.njit(inline="always", cache=True)
def hll_normal(hL, unL, utL, hR, unR, utR, g, h_dry):
    """HLL flux in a face-normal frame: (mass, normal momentum, tangential momentum)."""
    dry_l = hL < h_dry
    dry_r = hR < h_dry
    if dry_l and dry_r:
        return 0.0, 0.0, 0.0
    fl0 = hL * unL
    fl1 = hL * unL * unL + 0.5 * g * hL * hL
    fl2 = hL * unL * utL
    if hL == hR and unL == unR and utL == utR:
        return fl0, fl1, fl2
    fr0 = hR * unR
    fr1 = hR * unR * unR + 0.5 * g * hR * hR
    fr2 = hR * unR * utR
    cl = math.sqrt(g * hL)
    cr = math.sqrt(g * hR)
    if dry_l:
        sl = unR - 2.0 * cr
        sr = unR + cr
    elif dry_r:
        sl = unL - cl
        sr = unL + 2.0 * cl
    else:
        ustar = 0.5 * (unL + unR) + cl - cr
        cstar = 0.5 * (cl + cr) + 0.25 * (unL - unR)
        sl = min(unL - cl, ustar - cstar)
        sr = max(unR + cr, ustar + cstar)
    if sl >= 0.0:
        return fl0, fl1, fl2
    if sr <= 0.0:
        return fr0, fr1, fr2
    inv = 1.0 / (sr - sl)
    slr = sl * sr
    f0 = (sr * fl0 - sl * fr0 + slr * (hR - hL)) * inv
    f1 = (sr * fl1 - sl * fr1 + slr * (hR * unR - hL * unL)) * inv
    f2 = (sr * fl2 - sl * fr2 + slr * (hR * utR - hL * utL)) * inv
    return f0, f1, f2


@numba.njit(inline="always", cache=True)
def face_term(hC, uC, vC, zC, hN, uN, vN, zN, d, g, h_dry):
    """Outward flux plus bed-slope correction of cell C through its face ``d``.

    The cell's rate of change is ``-sum(face_term) / dx`` over its four faces.
    """
    zf = max(zC, zN)
    hCs = max(0.0, hC + zC - zf)
    hNs = max(0.0, hN + zN - zf)
    corr = 0.5 * g * (hC * hC - hCs * hCs)
    if d == EAST:
        f0, f1, f2 = hll_normal(hCs, uC, vC, hNs, uN, vN, g, h_dry)
        return f0, f1 + corr, f2
    if d == WEST:
        f0, f1, f2 = hll_normal(hNs, uN, vN, hCs, uC, vC, g, h_dry)
        return -f0, -f1 - corr, -f2
    if d == NORTH:
        f0, f1, f2 = hll_normal(hCs, vC, uC, hNs, vN, uN, g, h_dry)
        return f0, f2, f1 + corr
    f0, f1, f2 = hll_normal(hNs, vN, uN, hCs, vC, uC, g, h_dry)
    return -f0, -f2, -f1 - corr


@numba.njit(inline="always", cache=True)
def ghost(kind, d, h, qx, qy, z, inflow_h):
    """Ghost cell across face ``d`` of an interior cell."""
    if kind == REFLECTIVE:
        if d == WEST or d == EAST:
            return h, -qx, qy, z
        return h, qx, -qy, z
    if kind == INFLOW:
        if d == WEST or d == EAST:
            return inflow_h, qx, 0.0, z
        return inflow_h, 0.0, qy, z
    return h, qx, qy, z


@numba.njit(inline="always", cache=True)
def friction(h, qx, qy, manning, dt, g, h_dry):
    if manning <= 0.0 or h < h_dry:
        return qx, qy
    u = qx / h
    v = qy / h
    speed = math.sqrt(u * u + v * v)
    if speed == 0.0:
        return qx, qy
    cf = g * manning * manning / h ** (1.0 / 3.0)
    denom = 1.0 + dt * cf * speed / h
    return qx / denom, qy / denom


@numba.njit(inline="always", cache=True)
def cell_rates(
    h, qx, qy, z,
    hw, qxw, qyw, zw,
    he, qxe, qye, ze,
    hs, qxs, qys, zs,
    hn, qxn, qyn, zn,
    dx, g, h_dry,
):
    u = velocity(h, qx, h_dry)
    v = velocity(h, qy, h_dry)
    a0, a1, a2 = face_term(h, u, v, z, hw, velocity(hw, qxw, h_dry), velocity(hw, qyw, h_dry), zw, WEST, g, h_dry)
    b0, b1, b2 = face_term(h, u, v, z, he, velocity(he, qxe, h_dry), velocity(he, qye, h_dry), ze, EAST, g, h_dry)
    c0, c1, c2 = face_term(h, u, v, z, hs, velocity(hs, qxs, h_dry), velocity(hs, qys, h_dry), zs, SOUTH, g, h_dry)
    d0, d1, d2 = face_term(h, u, v, z, hn, velocity(hn, qxn, h_dry), velocity(hn, qyn, h_dry), zn, NORTH, g, h_dry)
    inv = -1.0 / dx
    return (a0 + b0 + c0 + d0) * inv, (a1 + b1 + c1 + d1) * inv, (a2 + b2 + c2 + d2) * inv


@numba.njit(inline="always", cache=True)
def cell_step(
    h, qx, qy, z,
    hw, qxw, qyw, zw,
    he, qxe, qye, ze,
    hs, qxs, qys, zs,
    hn, qxn, qyn, zn,
    dx, dt, g, h_dry, manning,
):
    """Forward Euler with the spatial operator, then the friction split."""
    r0, r1, r2 = cell_rates(
        h, qx, qy, z, hw, qxw, qyw, zw, he, qxe, qye, ze, hs, qxs, qys, zs, hn, qxn, qyn, zn, dx, g, h_dry
    )
    h1 = h + dt * r0
    qx1 = qx + dt * r1
    qy1 = qy + dt * r2
    if h1 < h_dry:
        # round-off can leave a tiny negative depth at drying fronts
        return max(h1, 0.0), 0.0, 0.0
    qx1, qy1 = friction(h1, qx1, qy1, manning, dt, g, h_dry)
    return h1, qx1, qy1


@numba.njit(inline="always", cache=True)
def stable_dt(h, qx, qy, dx, g, h_dry):
    """``dx / (max(|u|, |v|) + sqrt(g h))``; infinity for a dry cell."""
    if h < h_dry:
        return np.inf
    u = abs(qx / h)
    v = abs(qy / h)
    return dx / (max(u, v) + math.sqrt(g * h))


# ---------------------------------------------------------------------------
# Python-facing wrappers


def physical_flux(s: State, axis: str = "x", g: float = G_DEFAULT, h_dry: float = 1e-6) -> tuple:
    u = velocity(s.h, s.qx, h_dry)
    v = velocity(s.h, s.qy, h_dry)
    if axis == "x":
        return (s.h * u, s.h * u * u + 0.5 * g * s.h**2, s.h * u * v)
    return (s.h * v, s.h * u * v, s.h * v * v + 0.5 * g * s.h**2)


def hll_flux(left: State, right: State, axis: str = "x", g: float = G_DEFAULT, h_dry: float = 1e-6) -> tuple:
    """HLL flux across a face whose left/right states are already reconstructed."""
    if left.h < 0 or right.h < 0:
        raise ValueError("negative reconstructed depth at a face")
    ul, vl = velocity(left.h, left.qx, h_dry), velocity(left.h, left.qy, h_dry)
    ur, vr = velocity(right.h, right.qx, h_dry), velocity(right.h, right.qy, h_dry)
    if axis == "x":
        return hll_normal(left.h, ul, vl, right.h, ur, vr, g, h_dry)
    f0, f1, f2 = hll_normal(left.h, vl, ul, right.h, vr, ur, g, h_dry)
    return f0, f2, f1


def reconstruct_face(left: Cell, right: Cell, g: float = G_DEFAULT, h_dry: float = 1e-6):
    """Hydrostatic reconstruction at the face between ``left`` and ``right``.

    Returns the reconstructed states and each side's momentum correction
    ``g/2 (h*^2 - h^2)``.
    """
    zf = max(left.z, right.z)
    out = []
    for c in (left, right):
        hs = max(0.0, c.h + c.z - zf)
        u = velocity(c.h, c.qx, h_dry)
        v = velocity(c.h, c.qy, h_dry)
        out.append((State(hs, hs * u, hs * v), 0.5 * g * (hs * hs - c.h * c.h)))
    (sl, cl), (sr, cr) = out
    return sl, sr, cl, cr


def spatial_operator(
    c: Cell, west: Cell, east: Cell, north: Cell, south: Cell, dx: float,
    g: float = G_DEFAULT, h_dry: float = 1e-6,
) -> State:
    """Rate of change of (h, qx, qy) for one cell given its four neighbours."""
    out = cell_rates(*c, *west, *east, *south, *north, dx, g, h_dry)
    if not all(math.isfinite(x) for x in out):
        raise FloatingPointError(f"non-finite spatial operator for cell {c}")
    return State(*out)


def friction_step(s: State, params: PhysicsParams, dt: float) -> State:
    qx, qy = friction(s.h, s.qx, s.qy, params.manning, dt, params.g, params.h_dry)
    return State(s.h, qx, qy)


def boundary_state(interior: Cell, kind: str, direction: str, inflow_h: float = 0.0) -> Cell:
    kinds = {"reflective": REFLECTIVE, "transmissive": TRANSMISSIVE, "inflow": INFLOW}
    dirs = {"west": WEST, "east": EAST, "south": SOUTH, "north": NORTH}
    return Cell(*ghost(kinds[kind], dirs[direction], *interior, inflow_h))


def cfl_timestep(cells, dxs, params: PhysicsParams, fallback: float | None = None) -> float:
    """``C * min(dx / (max(|u|,|v|) + sqrt(g h)))`` over wet cells."""
    best = math.inf
    for c, dx in zip(cells, dxs):
        best = min(best, stable_dt(c.h, c.qx, c.qy, dx, params.g, params.h_dry))
    if math.isinf(best):
        if fallback is None:
            raise ValueError("all cells dry and no fallback timestep configured")
        return fallback
    dt = params.cfl * best
    if not (dt > 0 and math.isfinite(dt)):
        raise FloatingPointError(f"invalid timestep {dt}")
    return dt


class InflowSeries:
    """Piecewise-linear depth (or free-surface) series for an inflow edge."""

    def __init__(self, times, values, kind: str = "depth"):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.times.ndim != 1 or self.times.size == 0 or self.times.size != self.values.size:
            raise ValueError("inflow series needs matching non-empty time and value lists")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("inflow times must be strictly increasing")
        if kind not in ("depth", "eta"):
            raise ValueError(f"inflow kind must be 'depth' or 'eta', not {kind!r}")
        self.kind = kind
        self._warned = False

    def __call__(self, t: float) -> float:
        if (t < self.times[0] or t > self.times[-1]) and not self._warned:
            log.warning("inflow series queried at t=%g outside [%g, %g]; holding end value",
                        t, self.times[0], self.times[-1])
            self._warned = True
        return float(np.interp(t, self.times, self.values))

    def depth(self, t: float, z: float) -> float:
        v = self(t)
        return max(0.0, v - z) if self.kind == "eta" else v
