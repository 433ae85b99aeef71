"""Time stepping: the adaptive multiresolution solver and its uniform twin.

Both solvers call the same per-cell update (:func:`mrswe.swe.cell_step`), so
with ``epsilon = 0`` they differ only by round-off from the encode/decode
cycle. The adaptive step is, in order: restricted re-encode and flagging,
decode, leaf traversal and compaction, neighbour lookup, timestep
reduction over the fresh leaves, and the leaf update with write-back.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import prange

from . import cases, mra, parallel, traversal
from .config import SimConfig
from .swe import INFLOW, REFLECTIVE, cell_step, ghost, stable_dt
from .traversal import ACTIVE, BOUNDARY_KINDS, INACTIVE, MIXED
from .zorder import hierarchy_size, level_of_nb, level_offset, morton_order

log = logging.getLogger(__name__)

QUANTITIES = ("h", "qx", "qy")
_BLOCK = 4096  # reduction block, independent of the worker count


@dataclass
class StepReport:
    step: int
    t: float
    dt: float
    leaves: int
    max_qx: float
    max_qy: float
    encode: float = 0.0
    decode: float = 0.0
    traverse: float = 0.0
    neighbours: float = 0.0
    update: float = 0.0
    reduce: float = 0.0
    wall: float = 0.0  # cumulative compute time since initialise

    @property
    def stage_total(self) -> float:
        return self.encode + self.decode + self.traverse + self.neighbours + self.update + self.reduce


@dataclass
class Grid:
    """Geometry of the square finest grid and its embedding of the domain."""

    max_level: int
    xmin: float
    ymin: float
    side: float
    active: np.ndarray  # bool [j, i]
    bed: np.ndarray  # [j, i]

    @property
    def cells(self) -> int:
        return 1 << self.max_level

    @property
    def dx(self) -> float:
        return self.side / self.cells

    def locate(self, x: float, y: float) -> tuple[int, int]:
        n = self.cells
        i = min(max(int(math.floor((x - self.xmin) / self.dx)), 0), n - 1)
        j = min(max(int(math.floor((y - self.ymin) / self.dx)), 0), n - 1)
        return i, j


@dataclass
class SimState:
    config: SimConfig
    grid: Grid
    t: float = 0.0
    dt: float = 0.0
    step: int = 0
    wall: float = 0.0
    edge_kinds: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=np.int64))
    inflow: object = None
    # adaptive storage
    values: np.ndarray | None = None  # (3, hierarchy) coefficients
    z: np.ndarray | None = None  # bed, physical value per hierarchy cell
    active_class: np.ndarray | None = None
    static_mask: np.ndarray | None = None
    dem_mask: np.ndarray | None = None
    details: mra.DetailField | None = None
    assembly: traversal.LeafAssembly | None = None
    # uniform storage, [3, j, i]
    fields: np.ndarray | None = None
    pending_reduce: tuple | None = None  # (dt, max|qx|, max|qy|) of the current fields

    @property
    def adaptive(self) -> bool:
        return self.values is not None

    @property
    def leaf_count(self) -> int:
        return len(self.assembly) if self.adaptive else self.grid.cells ** 2


@dataclass
class RunResult:
    config: SimConfig
    grid: Grid
    snapshots: list = field(default_factory=list)  # (t, {name: [j, i] array})
    gauges: list = field(default_factory=list)  # (t, [(h, eta, qx, qy), ...])
    reports: list = field(default_factory=list)
    wall_times: dict = field(default_factory=dict)  # output time -> cumulative compute seconds
    leaf_counts: dict = field(default_factory=dict)  # output time -> leaves

    def snapshot(self, t: float) -> dict:
        for ts, fields in self.snapshots:
            if ts == t:
                return fields
        raise KeyError(f"no snapshot at t={t}")


# ---------------------------------------------------------------------------
# kernels


@numba.njit(inline="always")
def _inflow_depth(value, is_eta, zb):
    return max(0.0, value - zb) if is_eta else value


@numba.njit(inline="always")
def _leaf_neighbour(values, zb_all, scale, target, d, h, qx, qy, zb, inflow_v, inflow_eta):
    if target >= 0:
        s = scale[level_of_nb(target)]
        return values[0, target] * s, values[1, target] * s, values[2, target] * s, zb_all[target]
    return ghost(-1 - target, d, h, qx, qy, zb, _inflow_depth(inflow_v, inflow_eta, zb))


@numba.njit(parallel=True, cache=True)
def _leaf_update(values, zb_all, active_class, leaves, levels, nbr, scale, dxs, dt, g, h_dry, manning,
                 inflow_v, inflow_eta, out):
    for k in prange(leaves.size):
        c = leaves[k]
        s = scale[levels[k]]
        h = values[0, c] * s
        qx = values[1, c] * s
        qy = values[2, c] * s
        zb = zb_all[c]
        if active_class[c] != 1:
            out[0, k] = h
            out[1, k] = qx
            out[2, k] = qy
            continue
        hw, qxw, qyw, zw = _leaf_neighbour(values, zb_all, scale, nbr[0, k], 0, h, qx, qy, zb, inflow_v, inflow_eta)
        he, qxe, qye, ze = _leaf_neighbour(values, zb_all, scale, nbr[1, k], 1, h, qx, qy, zb, inflow_v, inflow_eta)
        hs, qxs, qys, zs = _leaf_neighbour(values, zb_all, scale, nbr[2, k], 2, h, qx, qy, zb, inflow_v, inflow_eta)
        hn, qxn, qyn, zn = _leaf_neighbour(values, zb_all, scale, nbr[3, k], 3, h, qx, qy, zb, inflow_v, inflow_eta)
        h1, qx1, qy1 = cell_step(h, qx, qy, zb, hw, qxw, qyw, zw, he, qxe, qye, ze, hs, qxs, qys, zs,
                                 hn, qxn, qyn, zn, dxs[levels[k]], dt, g, h_dry, manning)
        out[0, k] = h1
        out[1, k] = qx1
        out[2, k] = qy1


@numba.njit(parallel=True, cache=True)
def _write_back(values, leaves, levels, scale, out):
    for k in prange(leaves.size):
        inv = 1.0 / scale[levels[k]]
        c = leaves[k]
        values[0, c] = out[0, k] * inv
        values[1, c] = out[1, k] * inv
        values[2, c] = out[2, k] * inv


@numba.njit(parallel=True, cache=True)
def _leaf_reduce(values, active_class, leaves, levels, scale, dxs, g, h_dry, block, dt_min, qx_max, qy_max):
    for b in prange(dt_min.size):
        lo = b * block
        hi = min(lo + block, leaves.size)
        m = np.inf
        ax = 0.0
        ay = 0.0
        for k in range(lo, hi):
            c = leaves[k]
            if active_class[c] != 1:
                continue
            s = scale[levels[k]]
            h = values[0, c] * s
            qx = values[1, c] * s
            qy = values[2, c] * s
            m = min(m, stable_dt(h, qx, qy, dxs[levels[k]], g, h_dry))
            ax = max(ax, abs(qx))
            ay = max(ay, abs(qy))
        dt_min[b] = m
        qx_max[b] = ax
        qy_max[b] = ay


@numba.njit(parallel=True, cache=True)
def _expand(values, recorded, scale, out):
    for m in prange(recorded.size):
        c = recorded[m]
        s = scale[level_of_nb(c)]
        for q in range(values.shape[0]):
            out[q, m] = values[q, c] * s


@numba.njit(inline="always")
def _uniform_neighbour(fields, bed, active, jj, ii, kinds, d, h, qx, qy, zb, inflow_v, inflow_eta):
    n = bed.shape[0]
    if ii < 0 or jj < 0 or ii >= n or jj >= n:
        return ghost(kinds[d], d, h, qx, qy, zb, _inflow_depth(inflow_v, inflow_eta, zb))
    if not active[jj, ii]:
        return ghost(REFLECTIVE, d, h, qx, qy, zb, 0.0)
    return fields[0, jj, ii], fields[1, jj, ii], fields[2, jj, ii], bed[jj, ii]


@numba.njit(parallel=True, cache=True)
def _uniform_update(fields, bed, active, kinds, dx, dt, g, h_dry, manning, inflow_v, inflow_eta, out,
                    dt_min, qx_max, qy_max):
    # also reduces the updated row, saving the next step a pass over the grid
    n = bed.shape[0]
    for j in prange(n):
        m = np.inf
        ax = 0.0
        ay = 0.0
        for i in range(n):
            h = fields[0, j, i]
            qx = fields[1, j, i]
            qy = fields[2, j, i]
            zb = bed[j, i]
            if not active[j, i]:
                out[0, j, i] = h
                out[1, j, i] = qx
                out[2, j, i] = qy
                continue
            hw, qxw, qyw, zw = _uniform_neighbour(fields, bed, active, j, i - 1, kinds, 0, h, qx, qy, zb, inflow_v, inflow_eta)
            he, qxe, qye, ze = _uniform_neighbour(fields, bed, active, j, i + 1, kinds, 1, h, qx, qy, zb, inflow_v, inflow_eta)
            hs, qxs, qys, zs = _uniform_neighbour(fields, bed, active, j - 1, i, kinds, 2, h, qx, qy, zb, inflow_v, inflow_eta)
            hn, qxn, qyn, zn = _uniform_neighbour(fields, bed, active, j + 1, i, kinds, 3, h, qx, qy, zb, inflow_v, inflow_eta)
            h1, qx1, qy1 = cell_step(h, qx, qy, zb, hw, qxw, qyw, zw, he, qxe, qye, ze, hs, qxs, qys, zs,
                                     hn, qxn, qyn, zn, dx, dt, g, h_dry, manning)
            out[0, j, i] = h1
            out[1, j, i] = qx1
            out[2, j, i] = qy1
            m = min(m, stable_dt(h1, qx1, qy1, dx, g, h_dry))
            ax = max(ax, abs(qx1))
            ay = max(ay, abs(qy1))
        dt_min[j] = m
        qx_max[j] = ax
        qy_max[j] = ay


@numba.njit(parallel=True, cache=True)
def _uniform_reduce(fields, active, dx, g, h_dry, dt_min, qx_max, qy_max):
    n = active.shape[0]
    for j in prange(n):
        m = np.inf
        ax = 0.0
        ay = 0.0
        for i in range(n):
            if not active[j, i]:
                continue
            h = fields[0, j, i]
            qx = fields[1, j, i]
            qy = fields[2, j, i]
            m = min(m, stable_dt(h, qx, qy, dx, g, h_dry))
            ax = max(ax, abs(qx))
            ay = max(ay, abs(qy))
        dt_min[j] = m
        qx_max[j] = ax
        qy_max[j] = ay


# ---------------------------------------------------------------------------
# set-up


def _to_morton(field2d: np.ndarray, table: np.ndarray) -> np.ndarray:
    flat = np.empty(field2d.size, dtype=field2d.dtype)
    flat[table.ravel()] = field2d.ravel()
    return flat


def _active_classes(active_morton: np.ndarray, max_level: int) -> np.ndarray:
    """0 inactive, 1 active, 2 mixed, for every hierarchy cell."""
    out = np.empty(hierarchy_size(max_level), dtype=np.int8)
    level = active_morton.astype(np.int8)
    out[level_offset(max_level):] = level
    anyv = active_morton.astype(bool)
    allv = anyv.copy()
    for n in range(max_level - 1, -1, -1):
        anyv = anyv.reshape(-1, 4).any(axis=1)
        allv = allv.reshape(-1, 4).all(axis=1)
        cls = np.where(allv, ACTIVE, np.where(anyv, MIXED, INACTIVE)).astype(np.int8)
        out[level_offset(n):level_offset(n + 1)] = cls
    return out


def _inactive_mask(active_class: np.ndarray, max_level: int) -> np.ndarray:
    """Mixed cells and their face neighbours are always refined."""
    nint = level_offset(max_level)
    mixed = (active_class[:nint] == MIXED).astype(np.uint8)
    if max_level == 0 or not mixed.any():
        return mixed
    band = np.empty_like(mixed)
    mra._band_kernel(mixed, max_level, band)
    return band


def build_grid(config: SimConfig) -> Grid:
    case = config.case
    L = config.L
    active = cases.active_mask(case, L)
    if case.topography == "dem":
        from .io import load_dem

        bed, off_dem = load_dem(case.dem, L, (case.xmin, case.ymin, case.side), strict=config.dem_strict)
        active = active & ~off_dem
    else:
        bed = cases.topography(case, L)
    bed = np.where(active, bed, 0.0)
    return Grid(L, case.xmin, case.ymin, case.side, active, bed)


def _boundary_setup(case):
    kinds = np.array([BOUNDARY_KINDS[getattr(case, e)] for e in ("west", "east", "south", "north")], dtype=np.int64)
    inflow = None
    if (kinds == INFLOW).any():
        from .swe import InflowSeries

        inflow = InflowSeries(case.inflow_times, case.inflow_values, case.inflow_kind)
    return kinds, inflow


def initialise(config: SimConfig) -> SimState:
    """Sample the case onto the finest grid and build the first leaf assembly."""
    config.validate()
    if config.workers:
        parallel.set_workers(config.workers)
    grid = build_grid(config)
    L = grid.max_level
    h0 = np.where(grid.active, cases.initial_depth(config.case, L, grid.bed), 0.0)
    kinds, inflow = _boundary_setup(config.case)
    state = SimState(config=config, grid=grid, edge_kinds=kinds, inflow=inflow)
    if config.solver == "uniform":
        state.fields = np.zeros((3, grid.cells, grid.cells))
        state.fields[0] = h0
        state.pending_reduce = _reduce_uniform(state)
        state.dt = state.pending_reduce[0]
        return state

    t0 = time.perf_counter()
    table = morton_order(L)
    active_m = _to_morton(grid.active, table)
    values = np.zeros((3, hierarchy_size(L)))
    values[0, level_offset(L):] = _to_morton(h0, table)
    z_coeffs, dem_mask = mra.preprocess_dem(_to_morton(grid.bed, table), L, config.epsilon, active_m)
    active_class = _active_classes(active_m, L)
    static = dem_mask | _inactive_mask(active_class, L)
    smax = mra.compute_smax(values, L, active_m)
    details = mra.encode_all(values, L, config.epsilon, smax, static, band=not config.no_safety_zone)
    state.values = values
    state.z = mra.physical_hierarchy(z_coeffs, L)
    state.active_class = active_class
    state.static_mask = static
    state.dem_mask = dem_mask
    state.details = details
    state.assembly = traversal.assemble(details.sig, L, kinds, active_class)
    state.dt = _reduce_adaptive(state)[0]
    state.wall = time.perf_counter() - t0
    return state


# ---------------------------------------------------------------------------
# stepping


def _scale_tables(state: SimState) -> tuple[np.ndarray, np.ndarray]:
    L = state.grid.max_level
    scale = np.array([2.0 ** (n - L) for n in range(L + 1)])
    dxs = np.array([state.grid.side / (1 << n) for n in range(L + 1)])
    return scale, dxs


def _finish_dt(state: SimState, dt_min: float) -> float:
    if math.isinf(dt_min):
        return state.config.dt_fallback
    return state.config.cfl * dt_min


def _reduce_adaptive(state: SimState) -> tuple[float, float, float]:
    a = state.assembly
    scale, dxs = _scale_tables(state)
    nb = max(1, -(-len(a) // _BLOCK))
    dt_min, qx_max, qy_max = np.empty(nb), np.empty(nb), np.empty(nb)
    cfg = state.config
    _leaf_reduce(state.values, state.active_class, a.leaves, a.levels, scale, dxs, cfg.g, cfg.h_dry,
                 _BLOCK, dt_min, qx_max, qy_max)
    return _finish_dt(state, dt_min.min()), float(qx_max.max()), float(qy_max.max())


def _reduce_uniform(state: SimState) -> tuple[float, float, float]:
    n = state.grid.cells
    dt_min, qx_max, qy_max = np.empty(n), np.empty(n), np.empty(n)
    cfg = state.config
    _uniform_reduce(state.fields, state.grid.active, state.grid.dx, cfg.g, cfg.h_dry, dt_min, qx_max, qy_max)
    return _finish_dt(state, dt_min.min()), float(qx_max.max()), float(qy_max.max())


def _inflow_args(state: SimState, t: float) -> tuple[float, bool]:
    if state.inflow is None:
        return 0.0, False
    return state.inflow(t), state.inflow.kind == "eta"


def _check(arr: np.ndarray, state: SimState, stage: str, where) -> None:
    if not np.isfinite(arr).all():
        q, k = (int(v) for v in np.argwhere(~np.isfinite(arr))[0][:2])
        raise FloatingPointError(
            f"step {state.step + 1} (t={state.t:.6g}), stage {stage}: non-finite {QUANTITIES[q]} "
            f"at {where(k)}"
        )


def _clip(state: SimState, dt: float, limit: float | None) -> tuple[float, float]:
    """Timestep and the time it lands on (snapped exactly onto ``limit``)."""
    if limit is not None and state.t + dt >= limit:
        return max(limit - state.t, 0.0), limit
    return dt, state.t + dt


def step_adaptive(state: SimState, limit: float | None = None) -> StepReport:
    """Advance one step; ``limit`` caps the new time (output or end time)."""
    cfg = state.config
    L = state.grid.max_level
    band = not cfg.no_safety_zone
    t0 = time.perf_counter()
    state.details = mra.zero_details_and_reencode(state.values, state.details, L, cfg.epsilon,
                                                  state.static_mask, band)
    t1 = time.perf_counter()
    mra.decode_tree(state.values, state.details, L)
    t2 = time.perf_counter()
    recorded = traversal.parallel_tree_traversal(state.details.sig, L)
    leaves = traversal.compact_leaves(recorded)
    t3 = time.perf_counter()
    state.assembly = traversal.find_neighbours(recorded, leaves, state.details.sig, L, state.edge_kinds,
                                               state.active_class)
    t4 = time.perf_counter()
    dt_cfl, _, _ = _reduce_adaptive(state)
    dt, t_new = _clip(state, dt_cfl, limit)
    t5 = time.perf_counter()
    a = state.assembly
    scale, dxs = _scale_tables(state)
    out = np.empty((3, len(a)))
    inflow_v, inflow_eta = _inflow_args(state, state.t)
    _leaf_update(state.values, state.z, state.active_class, a.leaves, a.levels, a.neighbours, scale, dxs,
                 dt, cfg.g, cfg.h_dry, cfg.case.manning, inflow_v, inflow_eta, out)
    _check(out, state, "update", lambda k: f"leaf z-index {int(a.leaves[k])}")
    _write_back(state.values, a.leaves, a.levels, scale, out)
    t6 = time.perf_counter()
    _, qx_max, qy_max = _reduce_adaptive(state)
    t7 = time.perf_counter()
    state.t = t_new
    state.dt = dt
    state.step += 1
    stages = dict(encode=t1 - t0, decode=t2 - t1, traverse=t3 - t2, neighbours=t4 - t3,
                  update=t6 - t5, reduce=(t5 - t4) + (t7 - t6))
    state.wall += t7 - t0
    return StepReport(state.step, state.t, dt, len(a), qx_max, qy_max, wall=state.wall, **stages)


def step_uniform(state: SimState, limit: float | None = None) -> StepReport:
    cfg = state.config
    g = state.grid
    t0 = time.perf_counter()
    if state.pending_reduce is None:
        state.pending_reduce = _reduce_uniform(state)
    dt, t_new = _clip(state, state.pending_reduce[0], limit)
    t1 = time.perf_counter()
    out = np.empty_like(state.fields)
    inflow_v, inflow_eta = _inflow_args(state, state.t)
    rows = g.cells
    dt_min, qx_max, qy_max = np.empty(rows), np.empty(rows), np.empty(rows)
    _uniform_update(state.fields, g.bed, g.active, state.edge_kinds, g.dx, dt, cfg.g, cfg.h_dry,
                    cfg.case.manning, inflow_v, inflow_eta, out, dt_min, qx_max, qy_max)

    def where(k):
        j, i = divmod(k, g.cells)
        return f"cell (i={i}, j={j})"

    _check(out.reshape(3, -1), state, "update", where)
    state.fields = out
    state.pending_reduce = (_finish_dt(state, dt_min.min()), float(qx_max.max()), float(qy_max.max()))
    t2 = time.perf_counter()
    state.t = t_new
    state.dt = dt
    state.step += 1
    state.wall += t2 - t0
    _, qx_top, qy_top = state.pending_reduce
    return StepReport(state.step, state.t, dt, g.cells ** 2, qx_top, qy_top,
                      update=t2 - t1, reduce=t1 - t0, wall=state.wall)


def step(state: SimState, limit: float | None = None) -> StepReport:
    return step_adaptive(state, limit) if state.adaptive else step_uniform(state, limit)


# ---------------------------------------------------------------------------
# outputs


def finest_fields(state: SimState) -> np.ndarray:
    """``[3, j, i]`` physical h, qx, qy on the finest grid (zero-detail expansion)."""
    if not state.adaptive:
        return state.fields.copy()
    L = state.grid.max_level
    scale, _ = _scale_tables(state)
    flat = np.empty((3, 1 << (2 * L)))
    _expand(state.values, state.assembly.recorded, scale, flat)
    return flat[:, morton_order(L)]


def finest_bed(state: SimState) -> np.ndarray:
    """Bed as seen by the solver: the covering leaf's value for adaptive runs."""
    if not state.adaptive:
        return state.grid.bed.copy()
    L = state.grid.max_level
    return state.z[state.assembly.recorded][morton_order(L)]


def snapshot_fields(state: SimState, names=("h",)) -> dict:
    f = finest_fields(state)
    out = {"h": f[0], "qx": f[1], "qy": f[2]}
    if "z" in names or "eta" in names:
        bed = finest_bed(state)
        out["z"] = bed
        out["eta"] = f[0] + bed
    return {k: out[k] for k in names}


def sample_gauges(state: SimState, points) -> list[tuple[float, float, float, float]]:
    if not points:
        return []
    g = state.grid
    L = g.max_level
    out = []
    for x, y in points:
        i, j = g.locate(x, y)
        if state.adaptive:
            from .zorder import morton_encode

            c = int(state.assembly.recorded[morton_encode(i, j, L)])
            s = 2.0 ** (level_of_nb(c) - L)
            h, qx, qy = (float(state.values[q, c] * s) for q in range(3))
            zb = float(state.z[c])
        else:
            h, qx, qy = (float(state.fields[q, j, i]) for q in range(3))
            zb = float(g.bed[j, i])
        out.append((h, h + zb, qx, qy))
    return out


def _event_times(case) -> tuple[list[float], list[float]]:
    outputs = sorted({float(t) for t in case.output_times if t <= case.t_end})
    gauges = set(outputs)
    if case.gauges and case.gauge_interval > 0:
        k = np.arange(0, int(math.floor(case.t_end / case.gauge_interval + 1e-9)) + 1)
        gauges |= {float(v) for v in k * case.gauge_interval}
    return outputs, sorted(gauges)


def run(config: SimConfig, progress=None) -> RunResult:
    """Integrate to ``t_end`` and collect snapshots, gauge records and step reports.

    ``progress`` is an optional callable receiving each StepReport.
    """
    state = initialise(config)
    case = config.case
    result = RunResult(config=config, grid=state.grid)
    outputs, gauge_times = _event_times(case)
    events = sorted(set(outputs) | set(gauge_times) | {case.t_end})
    out_set, gauge_set = set(outputs), set(gauge_times)

    def record(t):
        if t in out_set:
            result.snapshots.append((t, snapshot_fields(state, config.fields)))
            result.wall_times[t] = state.wall
            result.leaf_counts[t] = state.leaf_count
        if t in gauge_set and case.gauges:
            result.gauges.append((t, sample_gauges(state, case.gauges)))

    record(0.0)
    pending = [e for e in events if e > 0]
    while pending:
        target = pending[0]
        try:
            report = step(state, target)
        except FloatingPointError:
            log.error("run aborted at step %d, t=%g", state.step + 1, state.t)
            raise
        result.reports.append(report)
        if progress is not None:
            progress(report)
        if state.t >= target:
            state.t = target
            pending.pop(0)
            record(target)
    return result


def compare_fields(a: np.ndarray, b: np.ndarray, active: np.ndarray, dx: float) -> tuple[float, float]:
    """L1 (sum |a - b| dx^2 over the active area) and L-infinity differences."""
    if a.shape != b.shape or a.shape != active.shape:
        raise ValueError(f"grid mismatch: {a.shape} vs {b.shape}")
    d = np.abs(a - b)[active]
    if d.size == 0:
        return 0.0, 0.0
    area = d.size * dx * dx
    return float(d.sum() * dx * dx / area), float(d.max())


def compare(run_a: RunResult, run_b: RunResult, name: str = "h") -> list[tuple[float, float, float, float]]:
    """Rows of ``(t, L1, Linf, wall_a / wall_b)`` for every shared snapshot time."""
    ga, gb = run_a.grid, run_b.grid
    if ga.cells != gb.cells or not math.isclose(ga.dx, gb.dx):
        raise ValueError(f"grid mismatch: {ga.cells}^2 cells of {ga.dx} vs {gb.cells}^2 of {gb.dx}")
    times_b = {t for t, _ in run_b.snapshots}
    rows = []
    active = ga.active & gb.active
    for t, fa in run_a.snapshots:
        if t not in times_b:
            log.warning("snapshot t=%g missing from the second run; skipped", t)
            continue
        l1, linf = compare_fields(fa[name], run_b.snapshot(t)[name], active, ga.dx)
        wb = run_b.wall_times.get(t, 0.0)
        ratio = run_a.wall_times.get(t, 0.0) / wb if wb > 0 else float("nan")
        rows.append((t, l1, linf, ratio))
    return rows
