"""Rasters, DEM ingestion and result files.

Rasters use the Esri ASCII grid layout (six header lines, then rows of
values starting with the northernmost row). Doubles are written with 17
significant digits so a write/read cycle is exact. Internally every 2D field
is indexed ``[j, i]`` with ``j = 0`` the southernmost row.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

NODATA = -9999.0
_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


class RasterError(ValueError):
    pass


@dataclass
class RasterGrid:
    ncols: int
    nrows: int
    xllcorner: float
    yllcorner: float
    cellsize: float
    nodata: float
    values: np.ndarray  # (nrows, ncols), top row first

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.nrows, self.ncols):
            raise RasterError(
                f"raster holds {self.values.shape} values, header says {self.nrows}x{self.ncols}"
            )
        if not self.cellsize > 0:
            raise RasterError("cellsize must be positive")

    @property
    def nodata_mask(self) -> np.ndarray:
        return (self.values == self.nodata) | ~np.isfinite(self.values)

    def south_up(self) -> np.ndarray:
        """Values indexed ``[j, i]`` from the south-west corner."""
        return self.values[::-1]


def _fmt(v: float) -> str:
    return repr(float(v))  # shortest text that reads back bit-exact


def write_esri_ascii(path, grid: RasterGrid) -> Path:
    path = Path(path)
    lines = [
        f"ncols {grid.ncols}",
        f"nrows {grid.nrows}",
        f"xllcorner {_fmt(grid.xllcorner)}",
        f"yllcorner {_fmt(grid.yllcorner)}",
        f"cellsize {_fmt(grid.cellsize)}",
        f"NODATA_value {_fmt(grid.nodata)}",
    ]
    lines.extend(" ".join(_fmt(v) for v in row) for row in grid.values.tolist())
    path.write_text("\n".join(lines) + "\n")
    return path


def read_esri_ascii(path) -> RasterGrid:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise RasterError(f"{path}: cannot read raster ({exc.strerror})") from None
    lines = text.splitlines()
    header = {}
    body_start = 0
    for lineno, line in enumerate(lines):
        parts = line.split()
        if not parts:
            continue
        key = parts[0].lower()
        if key not in _HEADER_KEYS:
            body_start = lineno
            break
        if len(parts) != 2:
            raise RasterError(f"{path}:{lineno + 1}: malformed header line {line!r}")
        header[key] = parts[1]
    else:
        body_start = len(lines)
    for key in _HEADER_KEYS[:5]:
        if key not in header:
            raise RasterError(f"{path}: header is missing {key}")
    try:
        ncols = int(header["ncols"])
        nrows = int(header["nrows"])
        xll = float(header["xllcorner"])
        yll = float(header["yllcorner"])
        cellsize = float(header["cellsize"])
        nodata = float(header.get("nodata_value", NODATA))
    except ValueError as exc:
        raise RasterError(f"{path}: malformed header value ({exc})") from None
    if ncols <= 0 or nrows <= 0:
        raise RasterError(f"{path}: ncols and nrows must be positive")
    try:
        flat = np.array(" ".join(lines[body_start:]).split(), dtype=np.float64)
    except ValueError as exc:
        raise RasterError(f"{path}: non-numeric cell value ({exc})") from None
    if flat.size != ncols * nrows:
        raise RasterError(f"{path}: expected {ncols * nrows} values, found {flat.size}")
    return RasterGrid(ncols, nrows, xll, yll, cellsize, nodata, flat.reshape(nrows, ncols))


def required_level(ncols: int, nrows: int) -> int:
    return max(0, math.ceil(math.log2(max(ncols, nrows))))


def load_dem(path, max_level: int, domain=None, strict: bool = True):
    """Sample a DEM onto the finest grid.

    ``domain`` is ``(xmin, ymin, side)`` of the square hierarchy; by default
    it is the raster's own extent. Returns ``(z, inactive)`` as ``[j, i]``
    arrays; inactive cells lie outside the raster or on nodata. When the
    finest cell size equals the raster's the lookup is nearest-cell,
    otherwise bilinear between raster cell centres.
    """
    grid = read_esri_ascii(path) if not isinstance(path, RasterGrid) else path
    need = required_level(grid.ncols, grid.nrows)
    if strict and max_level < need:
        raise RasterError(
            f"L={max_level} is too coarse for a {grid.ncols}x{grid.nrows} raster; "
            f"need 2^L >= {max(grid.ncols, grid.nrows)}, i.e. L >= {need}"
        )
    if domain is None:
        domain = (grid.xllcorner, grid.yllcorner, max(grid.ncols, grid.nrows) * grid.cellsize)
    xmin, ymin, side = domain
    n = 1 << max_level
    dx = side / n
    centres = (np.arange(n) + 0.5) * dx
    x = xmin + centres
    y = ymin + centres
    vals = grid.south_up()
    bad = grid.nodata_mask[::-1]
    # fractional raster coordinates, cell centres at integer + 0.5
    fx = (x - grid.xllcorner) / grid.cellsize
    fy = (y - grid.yllcorner) / grid.cellsize
    inside_x = (fx >= 0) & (fx < grid.ncols)
    inside_y = (fy >= 0) & (fy < grid.nrows)
    inside = inside_y[:, None] & inside_x[None, :]
    z = np.zeros((n, n))
    inactive = ~inside
    if math.isclose(dx, grid.cellsize, rel_tol=1e-9):
        ci = np.clip(np.floor(fx).astype(np.int64), 0, grid.ncols - 1)
        cj = np.clip(np.floor(fy).astype(np.int64), 0, grid.nrows - 1)
        z[:] = vals[np.ix_(cj, ci)]
        inactive |= bad[np.ix_(cj, ci)]
    else:
        gx = np.clip(fx - 0.5, 0, grid.ncols - 1)
        gy = np.clip(fy - 0.5, 0, grid.nrows - 1)
        i0 = np.minimum(np.floor(gx).astype(np.int64), max(grid.ncols - 2, 0))
        j0 = np.minimum(np.floor(gy).astype(np.int64), max(grid.nrows - 2, 0))
        i1 = np.minimum(i0 + 1, grid.ncols - 1)
        j1 = np.minimum(j0 + 1, grid.nrows - 1)
        wx = (gx - i0)[None, :]
        wy = (gy - j0)[:, None]
        corners = [(j0, i0, (1 - wy) * (1 - wx)), (j0, i1, (1 - wy) * wx),
                   (j1, i0, wy * (1 - wx)), (j1, i1, wy * wx)]
        for jj, ii, w in corners:
            v = vals[np.ix_(jj, ii)]
            b = bad[np.ix_(jj, ii)]
            # a nodata corner with any weight makes the sample unusable
            inactive |= b & (w > 0)
            z += np.where(b, 0.0, v) * w
    z[inactive] = 0.0
    return z, inactive


def field_to_raster(field2d: np.ndarray, active: np.ndarray, xmin: float, ymin: float, dx: float) -> RasterGrid:
    values = np.where(active, field2d, NODATA)[::-1]
    n_rows, n_cols = field2d.shape
    return RasterGrid(n_cols, n_rows, float(xmin), float(ymin), float(dx), NODATA, values)


def write_snapshot(path, field2d, active, xmin: float, ymin: float, dx: float, fmt: str = "esri_ascii") -> Path:
    """Write a finest-grid field; inactive cells carry the nodata value."""
    field2d = np.asarray(field2d, dtype=np.float64)
    active = np.asarray(active, dtype=bool)
    if not np.isfinite(field2d[active]).all():
        raise ValueError(f"{path}: field has non-finite values on active cells")
    if fmt == "esri_ascii":
        return write_esri_ascii(path, field_to_raster(field2d, active, xmin, ymin, dx))
    if fmt == "csv":
        path = Path(path)
        n_rows, n_cols = field2d.shape
        with path.open("w", newline="") as fh:
            fh.write("x,y,value\n")
            for j in range(n_rows):
                yc = _fmt(ymin + (j + 0.5) * dx)
                for i in range(n_cols):
                    v = field2d[j, i] if active[j, i] else NODATA
                    fh.write(f"{_fmt(xmin + (i + 0.5) * dx)},{yc},{_fmt(v)}\n")
        return path
    raise ValueError(f"unknown snapshot format {fmt!r}")


def read_snapshot(path):
    """Return ``(field [j, i], active, dx)`` from either snapshot format."""
    path = Path(path)
    if path.suffix == ".csv":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        n = int(round(math.sqrt(data.shape[0])))
        if n * n != data.shape[0]:
            raise RasterError(f"{path}: csv snapshot is not square")
        values = data[:, 2].reshape(n, n)
        dx = data[1, 0] - data[0, 0] if n > 1 else 1.0
        active = values != NODATA
        return np.where(active, values, np.nan), active, float(dx)
    grid = read_esri_ascii(path)
    values = grid.south_up()
    active = ~grid.nodata_mask[::-1]
    return np.where(active, values, np.nan), active, grid.cellsize


GAUGE_COLUMNS = ("t", "gauge", "x", "y", "h", "eta", "qx", "qy")


def write_gauges(path, gauges, records) -> Path:
    """One row per (time, gauge). ``records`` holds ``(t, [(h, eta, qx, qy), ...])``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GAUGE_COLUMNS)
        if gauges:
            for t, samples in records:
                for k, ((x, y), s) in enumerate(zip(gauges, samples)):
                    w.writerow([_fmt(t), k, _fmt(x), _fmt(y)] + [_fmt(v) for v in s])
    return path


STEP_COLUMNS = (
    "step", "t", "dt", "leaves", "max_abs_qx", "max_abs_qy",
    "encode_s", "decode_s", "traverse_s", "neighbours_s", "update_s", "reduce_s", "wall_s",
)


def write_step_report(path, reports, header_text: str = "") -> Path:
    """Per-step CSV; ``header_text`` (the effective config) is prefixed as ``#`` lines."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        for line in header_text.splitlines():
            fh.write(f"# {line}\n" if line else "#\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STEP_COLUMNS)
        for r in reports:
            w.writerow([r.step, _fmt(r.t), _fmt(r.dt), r.leaves, _fmt(r.max_qx), _fmt(r.max_qy),
                        _fmt(r.encode), _fmt(r.decode), _fmt(r.traverse), _fmt(r.neighbours),
                        _fmt(r.update), _fmt(r.reduce), _fmt(r.wall)])
    return path


def read_step_report(path) -> tuple[list[str], list[dict]]:
    """Return the ``#`` header lines and the rows as dicts of strings."""
    header, body = [], []
    for line in Path(path).read_text().splitlines():
        (header if line.startswith("#") else body).append(line)
    rows = list(csv.DictReader(body))
    return [h[2:] if h.startswith("# ") else h[1:] for h in header], rows


def write_table(path, columns, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return path


def read_table(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


SNAPSHOT_INDEX = "snapshots.csv"
_SNAPSHOT_COLUMNS = ("t", "field", "file", "leaves", "wall_s")


def _time_tag(t: float) -> str:
    return f"{t:.6f}".rstrip("0").rstrip(".") if t else "0"


def write_run(outdir, result, config_text: str, fmt: str = "esri_ascii") -> Path:
    """Write every artefact of a finished run into ``outdir``.

    Layout: ``config.cfg`` (effective config), ``snapshots/<field>_t<time>``
    rasters plus the ``snapshots.csv`` index, ``gauges.csv``, ``steps.csv``
    and, when the case names a centreline, ``centreline_t<time>.csv``.
    """
    outdir = Path(outdir)
    snapdir = outdir / "snapshots"
    snapdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.cfg").write_text(config_text)
    grid = result.grid
    ext = ".asc" if fmt == "esri_ascii" else ".csv"
    index_rows = []
    for t, fields in result.snapshots:
        for name, arr in fields.items():
            rel = f"snapshots/{name}_t{_time_tag(t)}{ext}"
            write_snapshot(outdir / rel, arr, grid.active, grid.xmin, grid.ymin, grid.dx, fmt)
            index_rows.append([t, name, rel, result.leaf_counts.get(t, ""), result.wall_times.get(t, 0.0)])
    write_table(outdir / SNAPSHOT_INDEX, _SNAPSHOT_COLUMNS, index_rows)
    write_gauges(outdir / "gauges.csv", result.config.case.gauges, result.gauges)
    write_step_report(outdir / "steps.csv", result.reports, config_text)
    y = result.config.case.centreline_y
    if y is not None:
        _, j = grid.locate(grid.xmin, y)
        x = grid.xmin + (np.arange(grid.cells) + 0.5) * grid.dx
        keep = grid.active[j]
        for t, fields in result.snapshots:
            cols = ["x"] + list(fields)
            rows = [[float(x[i])] + [float(fields[f][j, i]) for f in fields] for i in np.flatnonzero(keep)]
            write_table(outdir / f"centreline_t{_time_tag(t)}.csv", cols, rows)
    return outdir


def read_run_index(rundir) -> dict:
    """``{(t, field): row}`` from a run directory's snapshot index."""
    path = Path(rundir) / SNAPSHOT_INDEX
    if not path.exists():
        raise FileNotFoundError(f"{rundir}: not a run directory (no {SNAPSHOT_INDEX})")
    return {(float(r["t"]), r["field"]): r for r in read_table(path)}
