"""Benchmark configurations and the reference solutions used to check them."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

TOPOGRAPHIES = ("flat", "humps_smooth", "humps_steeper", "humps_rectangular", "dem")
INITIALS = ("lake", "dam_x", "cylinder")

# (centre x, centre y, peak, radius or half-width)
HUMPS_DEFAULT = {
    "humps_smooth": ((30.0, 6.0, 1.0, 8.0), (30.0, 24.0, 1.0, 8.0), (47.5, 15.0, 3.0, 10.0)),
    "humps_steeper": ((30.0, 6.0, 1.0, 3.0), (30.0, 24.0, 1.78, 3.5), (47.5, 15.0, 3.0, 5.0)),
    "humps_rectangular": ((30.0, 6.0, 1.0, 3.0), (30.0, 24.0, 1.95, 3.0), (47.5, 15.0, 3.0, 4.0)),
}


@dataclass
class CaseSpec:
    name: str = "custom"
    xmin: float = 0.0
    ymin: float = 0.0
    width: float = 1.0
    height: float = 1.0
    topography: str = "flat"
    humps: tuple = ()
    dem: str = ""
    initial: str = "lake"
    eta: float = 0.0
    dam_x: float = 0.0
    eta_upstream: float = 0.0
    eta_downstream: float = 0.0
    centre_x: float = 0.0
    centre_y: float = 0.0
    radius: float = 2.5
    h_inside: float = 2.5
    h_outside: float = 0.5
    manning: float = 0.0
    west: str = "reflective"
    east: str = "reflective"
    south: str = "reflective"
    north: str = "reflective"
    inflow_times: tuple = ()
    inflow_values: tuple = ()
    inflow_kind: str = "depth"
    t_end: float = 0.0
    output_times: tuple = ()
    gauges: tuple = ()
    gauge_interval: float = 0.0
    centreline_y: float | None = None

    def validate(self) -> None:
        errs = []
        if not self.width > 0 or not self.height > 0:
            errs.append("width/height: domain extents must be positive")
        if self.topography not in TOPOGRAPHIES:
            errs.append(f"topography: {self.topography!r} not one of {TOPOGRAPHIES}")
        if self.topography == "dem" and not self.dem:
            errs.append("dem: topography=dem needs a DEM path")
        if self.initial not in INITIALS:
            errs.append(f"initial: {self.initial!r} not one of {INITIALS}")
        for edge in ("west", "east", "south", "north"):
            kind = getattr(self, edge)
            if kind not in ("reflective", "transmissive", "inflow"):
                errs.append(f"{edge}: unknown boundary kind {kind!r}")
            if kind == "inflow" and not self.inflow_times:
                errs.append(f"{edge}: inflow boundary needs inflow_times/inflow_values")
        if len(self.inflow_times) != len(self.inflow_values):
            errs.append("inflow_values: length differs from inflow_times")
        if self.inflow_kind not in ("depth", "eta"):
            errs.append(f"inflow_kind: {self.inflow_kind!r} not 'depth' or 'eta'")
        if self.t_end < 0:
            errs.append("t_end: must be non-negative")
        for t in self.output_times:
            if t < 0 or t > self.t_end:
                errs.append(f"output_times: {t} outside [0, t_end={self.t_end}]")
        if self.manning < 0:
            errs.append("manning: must be non-negative")
        if self.radius <= 0:
            errs.append("radius: must be positive")
        if self.gauge_interval < 0:
            errs.append("gauge_interval: must be non-negative")
        for h in self.humps:
            if len(h) != 4 or h[3] <= 0:
                errs.append(f"humps: entry {h} must be (cx, cy, peak, size>0)")
        if errs:
            raise ValueError("; ".join(errs))

    def replace(self, **changes) -> "CaseSpec":
        return dataclasses.replace(self, **changes)

    @property
    def side(self) -> float:
        """Edge length of the enclosing square covered by the hierarchy."""
        return max(self.width, self.height)


def case_quiescent(variant: str = "smooth") -> CaseSpec:
    eta = {"smooth": 0.875, "steeper": 1.78, "rectangular": 1.95}
    if variant not in eta:
        raise ValueError(f"unknown hump variant {variant!r}")
    return CaseSpec(
        name=f"quiescent_{variant}", width=70.0, height=30.0, topography=f"humps_{variant}",
        initial="lake", eta=eta[variant], t_end=100.0, output_times=(0.0, 100.0),
    )


def case_hump_dambreak() -> CaseSpec:
    return CaseSpec(
        name="hump_dambreak", width=70.0, height=30.0, topography="humps_smooth",
        initial="dam_x", dam_x=16.0, eta_upstream=1.875, eta_downstream=0.0,
        manning=0.018, t_end=12.0, output_times=(0.0, 6.0, 12.0), centreline_y=15.0,
    )


def case_circular_dambreak(radius: float = 2.5) -> CaseSpec:
    return CaseSpec(
        name="circular", xmin=-20.0, ymin=-20.0, width=40.0, height=40.0, initial="cylinder",
        radius=radius, h_inside=2.5, h_outside=0.5, t_end=3.5, output_times=(0.0, 3.5),
        centreline_y=0.0,
    )


def case_pseudo2d_dambreak(t_end: float = 2.5) -> CaseSpec:
    times = (0.0, 2.5) if t_end <= 2.5 else (0.0, 2.5, 10.0, 20.0, 30.0, t_end)
    return CaseSpec(
        name="pseudo2d" if t_end <= 2.5 else "pseudo2d_long", width=50.0, height=25.0,
        initial="dam_x", dam_x=10.0, eta_upstream=6.0, eta_downstream=2.0,
        west="transmissive", east="transmissive", south="transmissive", north="transmissive",
        t_end=t_end, output_times=tuple(t for t in times if t <= t_end), centreline_y=12.5,
    )


PRESETS = {
    "quiescent_smooth": lambda: case_quiescent("smooth"),
    "quiescent_steeper": lambda: case_quiescent("steeper"),
    "quiescent_rectangular": lambda: case_quiescent("rectangular"),
    "hump_dambreak": case_hump_dambreak,
    "circular": case_circular_dambreak,
    "pseudo2d": case_pseudo2d_dambreak,
    "pseudo2d_long": lambda: case_pseudo2d_dambreak(40.0),
}


def preset(name: str) -> CaseSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown case {name!r}; known: {', '.join(PRESETS)}") from None


# ---------------------------------------------------------------------------
# fields on the finest grid


def cell_centres(case: CaseSpec, max_level: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major ``(y, x)`` centre coordinates of the finest grid."""
    side = 1 << max_level
    dx = case.side / side
    c = (np.arange(side) + 0.5) * dx
    return np.meshgrid(case.ymin + c, case.xmin + c, indexing="ij")


def active_mask(case: CaseSpec, max_level: int) -> np.ndarray:
    yc, xc = cell_centres(case, max_level)
    return (xc < case.xmin + case.width) & (yc < case.ymin + case.height)


def hump_topography(x, y, variant: str, humps=()) -> np.ndarray:
    humps = humps or HUMPS_DEFAULT[variant]
    z = np.zeros(np.broadcast(x, y).shape)
    for cx, cy, peak, size in humps:
        if variant == "humps_rectangular":
            inside = (np.abs(x - cx) <= size) & (np.abs(y - cy) <= size)
            z = np.maximum(z, np.where(inside, peak, 0.0))
        else:
            r = np.hypot(x - cx, y - cy)
            z = np.maximum(z, peak * np.maximum(0.0, 1.0 - r / size))
    return z


def topography(case: CaseSpec, max_level: int) -> np.ndarray:
    yc, xc = cell_centres(case, max_level)
    if case.topography == "flat":
        return np.zeros_like(xc)
    if case.topography.startswith("humps"):
        return hump_topography(xc, yc, case.topography, case.humps)
    raise ValueError("DEM topography is loaded by mrswe.io.load_dem")


def initial_depth(case: CaseSpec, max_level: int, z: np.ndarray) -> np.ndarray:
    yc, xc = cell_centres(case, max_level)
    if case.initial == "lake":
        return np.maximum(0.0, case.eta - z)
    if case.initial == "dam_x":
        eta = np.where(xc < case.dam_x, case.eta_upstream, case.eta_downstream)
        return np.maximum(0.0, eta - z)
    r = np.hypot(xc - case.centre_x, yc - case.centre_y)
    return np.where(r <= case.radius, case.h_inside, case.h_outside)


# ---------------------------------------------------------------------------
# oracles


def _stoker_residual(hm, hl, hr, g):
    cm = math.sqrt(g * hm)
    cl = math.sqrt(g * hl)
    u_raref = 2.0 * (cl - cm)
    u_shock = (hm - hr) * math.sqrt(0.5 * g * (hm + hr) / (hm * hr))
    return u_raref - u_shock


def stoker_middle_state(hl: float, hr: float, g: float = 9.80665, tol: float = 1e-12) -> tuple[float, float]:
    """Depth and velocity between rarefaction and shock, by bisection."""
    if not hl > hr >= 0:
        raise ValueError("need hL > hR >= 0")
    if hr == 0:
        return 0.0, 0.0
    lo, hi = hr, hl
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _stoker_residual(mid, hl, hr, g) > 0:
            lo = mid
        else:
            hi = mid
    if hi - lo > tol * hl:
        raise RuntimeError("bisection for the middle state did not converge")
    hm = 0.5 * (lo + hi)
    return hm, 2.0 * (math.sqrt(g * hl) - math.sqrt(g * hm))


def stoker_shock_speed(hl: float, hr: float, g: float = 9.80665) -> float:
    hm, um = stoker_middle_state(hl, hr, g)
    if hr == 0:
        return 2.0 * math.sqrt(g * hl)
    return hm * um / (hm - hr)


def stoker_rh_residual(hl: float, hr: float, g: float = 9.80665) -> tuple[float, float]:
    """Mass and momentum Rankine-Hugoniot residuals across the shock."""
    hm, um = stoker_middle_state(hl, hr, g)
    s = stoker_shock_speed(hl, hr, g)
    mass = s * (hm - hr) - hm * um
    mom = s * hm * um - (hm * um * um + 0.5 * g * (hm * hm - hr * hr))
    return mass, mom


def oracle_stoker(hl: float, hr: float, x0: float, g: float, t: float, x) -> tuple[np.ndarray, np.ndarray]:
    """Exact depth and velocity of the 1D dam break on a flat frictionless bed."""
    x = np.asarray(x, dtype=float)
    if hl == hr:
        return np.full_like(x, hl), np.zeros_like(x)
    if t <= 0:
        return np.where(x < x0, hl, hr), np.zeros_like(x)
    hm, um = stoker_middle_state(hl, hr, g)
    cl = math.sqrt(g * hl)
    cm = math.sqrt(g * hm)
    xi = (x - x0) / t
    h = np.full_like(x, hr)
    u = np.zeros_like(x)
    # on a dry bed the rarefaction runs all the way to the front at 2*cl
    tail = um - cm if hr > 0 else 2.0 * cl
    raref = (xi >= -cl) & (xi < tail)
    h[xi < -cl] = hl
    h[raref] = (2.0 * cl - xi[raref]) ** 2 / (9.0 * g)
    u[raref] = 2.0 * (cl + xi[raref]) / 3.0
    if hr > 0:
        s = stoker_shock_speed(hl, hr, g)
        mid = (xi >= um - cm) & (xi < s)
        h[mid] = hm
        u[mid] = um
    return h, u


def _radial_hll(hl, ql, hr, qr, g):
    # plain numpy HLL (no bed), kept separate from the 2D solver's flux code
    ul = np.where(hl > 1e-8, ql / np.maximum(hl, 1e-300), 0.0)
    ur = np.where(hr > 1e-8, qr / np.maximum(hr, 1e-300), 0.0)
    cl, cr = np.sqrt(g * hl), np.sqrt(g * hr)
    sl = np.minimum(ul - cl, ur - cr)
    sr = np.maximum(ul + cl, ur + cr)
    fl = np.stack([hl * ul, hl * ul * ul + 0.5 * g * hl * hl])
    fr = np.stack([hr * ur, hr * ur * ur + 0.5 * g * hr * hr])
    ul_ = np.stack([hl, hl * ul])
    ur_ = np.stack([hr, hr * ur])
    denom = np.where(sr - sl == 0, 1.0, sr - sl)
    mid = (sr * fl - sl * fr + sl * sr * (ur_ - ul_)) / denom
    return np.where(sl >= 0, fl, np.where(sr <= 0, fr, mid))


def oracle_radial(
    radius: float = 2.5, h_inside: float = 2.5, h_outside: float = 0.5, t_end: float = 3.5,
    g: float = 9.80665, r_max: float = 30.0, cells: int = 4096, cfl: float = 0.45,
    closed: bool = False, return_history: bool = False,
):
    """1D finite-volume solution of the radially symmetric dam break.

    Solves ``(r h)_t + (r h u)_r = 0`` and
    ``(r h u)_t + (r (h u^2 + g h^2/2))_r = g h^2 / 2`` on annular cells, so
    the radially weighted mass ``sum(h r dr)`` is conserved to round-off on a
    closed domain. Returns cell centres, depth and velocity at ``t_end``.
    """
    dr = r_max / cells
    edges = np.arange(cells + 1) * dr
    rc = 0.5 * (edges[:-1] + edges[1:])
    h = np.where(rc <= radius, h_inside, h_outside).astype(float)
    q = np.zeros(cells)
    t = 0.0
    masses = []
    while t < t_end:
        u = np.where(h > 1e-8, q / np.maximum(h, 1e-300), 0.0)
        speed = np.max(np.abs(u) + np.sqrt(g * h))
        dt = min(cfl * dr / speed, t_end - t)
        # ghost cells: mirror at the axis, wall or zero-gradient outside
        hg = np.concatenate([[h[0]], h, [h[-1]]])
        qg = np.concatenate([[-q[0]], q, [-q[-1] if closed else q[-1]]])
        f = _radial_hll(hg[:-1], qg[:-1], hg[1:], qg[1:], g)
        rf = edges[None, :] * f
        if closed:
            rf[0, -1] = 0.0
        area = rc * dr
        hoop = 0.5 * g * h * h * dr
        h = h - dt * (rf[0, 1:] - rf[0, :-1]) / area
        q = q - dt * ((rf[1, 1:] - rf[1, :-1]) - hoop) / area
        h = np.maximum(h, 0.0)
        t += dt
        if return_history:
            masses.append(float(np.sum(h * rc * dr)))
    u = np.where(h > 1e-8, q / np.maximum(h, 1e-300), 0.0)
    if return_history:
        return rc, h, u, np.asarray(masses)
    return rc, h, u
