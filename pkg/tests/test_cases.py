import math

import numpy as np
import pytest

from mrswe import cases

G = 9.80665


@pytest.mark.parametrize("variant, eta", [("smooth", 0.875), ("steeper", 1.78), ("rectangular", 1.95)])
def test_quiescent_levels(variant, eta):
    c = cases.case_quiescent(variant)
    assert c.eta == eta
    assert (c.width, c.height) == (70.0, 30.0)


def test_unknown_variant():
    with pytest.raises(ValueError):
        cases.case_quiescent("jagged")


def test_hump_dambreak_parameters():
    c = cases.case_hump_dambreak()
    assert c.output_times == (0.0, 6.0, 12.0)
    assert c.eta_upstream == 1.875
    assert c.dam_x == 16.0
    assert c.manning == 0.018


def test_circular_parameters():
    c = cases.case_circular_dambreak()
    assert (c.h_inside, c.h_outside, c.radius, c.t_end) == (2.5, 0.5, 2.5, 3.5)
    assert cases.case_circular_dambreak(3.0).radius == 3.0


def test_pseudo2d_parameters():
    c = cases.case_pseudo2d_dambreak()
    assert (c.dam_x, c.eta_upstream, c.eta_downstream, c.t_end) == (10.0, 6.0, 2.0, 2.5)
    assert cases.preset("pseudo2d_long").t_end == 40.0


def test_every_preset_validates():
    for name in cases.PRESETS:
        cases.preset(name).validate()


def test_unknown_preset_lists_choices():
    with pytest.raises(ValueError, match="pseudo2d"):
        cases.preset("tsunami")


def test_validation_collects_errors():
    bad = cases.CaseSpec(width=-1.0, topography="cliff", t_end=-1.0)
    with pytest.raises(ValueError) as exc:
        bad.validate()
    msg = str(exc.value)
    assert "width" in msg and "topography" in msg and "t_end" in msg


def test_humps_reach_their_peaks():
    for variant, humps in cases.HUMPS_DEFAULT.items():
        for cx, cy, peak, _ in humps:
            z = cases.hump_topography(np.array([cx]), np.array([cy]), variant)
            assert z[0] == pytest.approx(peak)


def test_hump_lake_is_at_rest_initially():
    c = cases.case_quiescent("smooth")
    z = cases.topography(c, 6)
    h = cases.initial_depth(c, 6, z)
    wet = h > 0
    assert np.allclose(h[wet] + z[wet], 0.875, atol=1e-14)
    assert np.all(h >= 0)


def test_stoker_initial_step():
    h, u = cases.oracle_stoker(6.0, 2.0, 10.0, G, 0.0, np.array([9.0, 11.0]))
    assert h.tolist() == [6.0, 2.0]
    assert not u.any()


def test_stoker_equal_depths_is_constant():
    h, u = cases.oracle_stoker(3.0, 3.0, 10.0, G, 2.0, np.linspace(0, 20, 11))
    assert np.all(h == 3.0) and not u.any()


def test_stoker_rankine_hugoniot():
    mass, mom = cases.stoker_rh_residual(6.0, 2.0, G)
    assert abs(mass) < 1e-10 and abs(mom) < 1e-10


def test_stoker_middle_state_brackets():
    hm, um = cases.stoker_middle_state(6.0, 2.0, G)
    assert 2.0 < hm < 6.0
    assert um > 0
    # rarefaction invariant from the left state
    assert um + 2 * math.sqrt(G * hm) == pytest.approx(2 * math.sqrt(G * 6.0), rel=1e-12)


def test_stoker_profile_is_monotone():
    x = np.linspace(-20, 50, 2801)
    h, _ = cases.oracle_stoker(6.0, 2.0, 10.0, G, 2.5, x)
    assert np.all(np.diff(h) <= 1e-12)
    assert h[0] == 6.0 and h[-1] == 2.0


def test_stoker_dry_bed_front():
    x = np.linspace(0, 100, 4001)
    h, _ = cases.oracle_stoker(1.0, 0.0, 50.0, G, 2.0, x)
    front = 50.0 + 2 * math.sqrt(G) * 2.0
    assert h[x > front + 0.1].max() == 0.0
    assert h[x < front - 1.0].min() > 0.0


def test_radial_oracle_conserves_mass_when_closed():
    rc, h, u, masses = cases.oracle_radial(cells=512, t_end=1.0, closed=True, return_history=True)
    dr = rc[1] - rc[0]
    m0 = np.sum(np.where(rc <= 2.5, 2.5, 0.5) * rc * dr)
    assert np.max(np.abs(masses - m0)) <= 1e-8 * m0


def test_radial_oracle_initial_state():
    rc, h, u = cases.oracle_radial(cells=256, t_end=0.0)
    assert np.all(h[rc <= 2.5] == 2.5) and np.all(h[rc > 2.5] == 0.5)
    assert not u.any()


def test_radial_oracle_moves_outward():
    rc, h, u = cases.oracle_radial(cells=1024, t_end=1.0)
    assert h.max() < 2.5
    assert np.any((rc > 4.0) & (h > 0.6))
    assert u.max() > 0
