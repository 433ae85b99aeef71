import numpy as np
import pytest

from mrswe import io
from mrswe.engine import StepReport
from mrswe.io import RasterError, RasterGrid


def _grid(values, cellsize=1.0, nodata=io.NODATA):
    values = np.asarray(values, dtype=float)
    return RasterGrid(values.shape[1], values.shape[0], 0.0, 0.0, cellsize, nodata, values)


def test_raster_round_trip_is_bit_exact(tmp_path, rng):
    vals = rng.normal(size=(5, 7)) * 10 ** rng.uniform(-8, 8, size=(5, 7))
    g = RasterGrid(7, 5, -3.25, 1e-3, 0.1, io.NODATA, vals)
    back = io.read_esri_ascii(io.write_esri_ascii(tmp_path / "a.asc", g))
    assert np.array_equal(back.values, vals)
    assert (back.xllcorner, back.yllcorner, back.cellsize) == (-3.25, 1e-3, 0.1)


def test_header_shape_mismatch(tmp_path):
    p = tmp_path / "bad.asc"
    p.write_text("ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2 3\n4 5\n")
    with pytest.raises(RasterError, match="bad.asc"):
        io.read_esri_ascii(p)


def test_missing_header_key(tmp_path):
    p = tmp_path / "bad.asc"
    p.write_text("ncols 1\nnrows 1\n1\n")
    with pytest.raises(RasterError):
        io.read_esri_ascii(p)


def test_flat_dem_at_level_one():
    z, inactive = io.load_dem(_grid(np.zeros((2, 2))), 1)
    assert not z.any() and not inactive.any()


def test_dem_orientation():
    # top row first in the file; [j, i] from the south-west in memory
    z, _ = io.load_dem(_grid([[3.0, 4.0], [1.0, 2.0]]), 1)
    assert z.tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_nodata_corner_becomes_inactive():
    vals = np.ones((4, 4))
    vals[0, 3] = io.NODATA  # north-east corner
    z, inactive = io.load_dem(_grid(vals), 2)
    assert inactive.sum() == 1 and inactive[3, 3]
    assert z[3, 3] == 0.0


def test_nodata_poisons_bilinear_neighbours():
    vals = np.ones((4, 4))
    vals[0, 3] = io.NODATA
    _, inactive = io.load_dem(_grid(vals), 3)
    assert inactive[7, 7] and inactive[5, 5]
    assert not inactive[0, 0]


def test_rectangular_raster_needs_enough_levels():
    assert io.required_level(1800, 180) == 11
    g = RasterGrid(1800, 180, 0.0, 0.0, 0.02, io.NODATA, np.zeros((180, 1800)))
    with pytest.raises(RasterError, match="L >= 11"):
        io.load_dem(g, 10)


def test_padding_outside_raster_is_inactive():
    z, inactive = io.load_dem(_grid(np.ones((2, 4))), 2)
    assert inactive[2:].all() and not inactive[:2].any()


def test_snapshot_round_trip(tmp_path, rng):
    field = rng.normal(size=(4, 4))
    active = np.ones((4, 4), bool)
    active[3, 0] = False
    for fmt, name in (("esri_ascii", "s.asc"), ("csv", "s.csv")):
        p = io.write_snapshot(tmp_path / name, field, active, 1.0, 2.0, 0.5, fmt)
        back, act, dx = io.read_snapshot(p)
        assert np.array_equal(act, active)
        assert np.array_equal(back[active], field[active])
        assert np.isnan(back[3, 0]) and dx == 0.5


def test_constant_field_gives_constant_raster(tmp_path):
    p = io.write_snapshot(tmp_path / "c.asc", np.full((2, 2), 1.5), np.ones((2, 2), bool), 0, 0, 1)
    assert np.all(io.read_esri_ascii(p).values == 1.5)


def test_snapshot_rejects_nan(tmp_path):
    with pytest.raises(ValueError, match="non-finite"):
        io.write_snapshot(tmp_path / "n.asc", np.full((2, 2), np.nan), np.ones((2, 2), bool), 0, 0, 1)


def test_empty_gauge_list_is_header_only(tmp_path):
    p = io.write_gauges(tmp_path / "g.csv", (), [(0.0, []), (1.0, [])])
    assert p.read_text() == ",".join(io.GAUGE_COLUMNS) + "\n"


def test_gauge_rows(tmp_path):
    p = io.write_gauges(tmp_path / "g.csv", ((1.0, 2.0),), [(0.5, [(1.0, 3.0, 0.1, 0.0)])])
    rows = io.read_table(p)
    assert rows == [{"t": "0.5", "gauge": "0", "x": "1.0", "y": "2.0", "h": "1.0", "eta": "3.0", "qx": "0.1", "qy": "0.0"}]


def test_step_report_header_and_rows(tmp_path):
    reps = [StepReport(1, 0.1, 0.1, 16, 0.0, 0.0, wall=0.01), StepReport(2, 0.2, 0.1, 16, 1.0, 0.0, wall=0.02)]
    p = io.write_step_report(tmp_path / "s.csv", reps, "[run]\nL = 2\n")
    header, rows = io.read_step_report(p)
    assert header == ["[run]", "L = 2"]
    assert [r["leaves"] for r in rows] == ["16", "16"]
    assert list(rows[0]) == list(io.STEP_COLUMNS)
