import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrswe import mra
from mrswe.zorder import hierarchy_size, level_offset, morton_order

quad = st.lists(st.floats(-1e6, 1e6), min_size=4, max_size=4)


def test_encode_of_constant_children():
    s, da, db, dg = mra.encode_children(1.0, 1.0, 1.0, 1.0)
    assert (s, da, db, dg) == (2.0, 0.0, 0.0, 0.0)


def test_filter_bank_is_orthonormal():
    assert mra.H0 ** 2 + mra.H1 ** 2 == pytest.approx(1.0, abs=1e-15)
    assert mra.G0 ** 2 + mra.G1 ** 2 == pytest.approx(1.0, abs=1e-15)
    assert mra.H0 * mra.G0 + mra.H1 * mra.G1 == 0.0


def test_encode_matches_filter_products(rng):
    for s0, s1, s2, s3 in rng.normal(size=(50, 4)):
        h0, h1, g0, g1 = mra.H0, mra.H1, mra.G0, mra.G1
        ref = (h0 * (h0 * s0 + h1 * s2) + h1 * (h0 * s1 + h1 * s3),
               h0 * (g0 * s0 + g1 * s2) + h1 * (g0 * s1 + g1 * s3),
               g0 * (h0 * s0 + h1 * s2) + g1 * (h0 * s1 + h1 * s3),
               g0 * (g0 * s0 + g1 * s2) + g1 * (g0 * s1 + g1 * s3))
        assert mra.encode_children(s0, s1, s2, s3) == pytest.approx(ref, rel=1e-14, abs=1e-14)


def test_decode_example():
    assert mra.decode_children(0.5, 0.5, 0.5, 0.5) == (1.0, 0.0, 0.0, 0.0)


@given(quad)
def test_perfect_reconstruction(x):
    # round-off follows the largest entry when magnitudes are mixed
    back = mra.decode_children(*mra.encode_children(*x))
    scale = max(1.0, max(abs(v) for v in x))
    for a, b in zip(back, x):
        assert abs(a - b) <= 1e-12 * scale


def test_physical_ladder():
    L = 5
    assert mra.to_physical(3.0, L, L) == 3.0
    assert mra.to_physical(2.0, L - 1, L) == 1.0
    for n in range(L + 1):
        assert mra.from_physical(mra.to_physical(0.3, n, L), n, L) == 0.3


def _fill(L, finest):
    values = np.zeros((1, hierarchy_size(L)))
    values[0, level_offset(L):] = finest
    return values


def test_constant_field_has_no_details():
    L = 4
    values = _fill(L, np.full(4 ** L, 1.7))
    det = mra.encode_all(values, L, 1e-3)
    assert not det.coeffs.any()
    assert not det.sig.any()
    phys = mra.physical_hierarchy(values[0], L)
    assert np.allclose(phys, 1.7, rtol=0, atol=1e-14)


def test_full_decode_restores_finest(rng):
    L = 5
    finest = rng.normal(size=4 ** L)
    values = _fill(L, finest)
    det = mra.encode_all(values, L, 0.0)
    assert det.sig.all()
    values[0, level_offset(L):] = 0.0
    mra.decode_tree(values, det, L)
    assert np.allclose(values[0, level_offset(L):], finest, rtol=0, atol=1e-12)


def test_no_significant_cells_leaves_values_alone(rng):
    L = 3
    values = rng.normal(size=(1, hierarchy_size(L)))
    before = values.copy()
    det = mra.DetailField(np.zeros((1, 3, level_offset(L))), np.zeros(level_offset(L), np.uint8), np.ones(1))
    mra.decode_tree(values, det, L)
    assert np.array_equal(values, before)


def test_threshold_is_inclusive():
    # level-0 threshold at L=1 is eps/2; a detail exactly on it counts
    assert mra.significance(0.5, 0.0, 0.0, 1.0, 0, 1.0, 1)
    assert not mra.significance(0.4999, 0.0, 0.0, 1.0, 0, 1.0, 1)


def test_tiny_normaliser_disables_quantity():
    assert not mra.significance(5.0, 5.0, 5.0, 0.0, 0, 1e-3, 4)


def morton_order_inverse(L):
    # (j, i) of every Morton code, so grid[idx] lists the grid in Morton order
    order = morton_order(L)
    side = 1 << L
    jj, ii = np.empty(side * side, int), np.empty(side * side, int)
    jj[order.ravel()] = np.repeat(np.arange(side), side)
    ii[order.ravel()] = np.tile(np.arange(side), side)
    return jj, ii


def _flags_for(L, eps, finest, band=False):
    values = _fill(L, finest)
    return mra.encode_all(values, L, eps, band=band).sig


@given(st.integers(0, 2 ** 32 - 1), st.floats(1e-4, 1e-1), st.floats(1e-4, 1e-1))
@settings(max_examples=30)
def test_threshold_monotonicity(seed, e1, e2):
    L = 4
    e1, e2 = sorted((e1, e2))
    finest = np.random.default_rng(seed).normal(size=4 ** L)
    fine, coarse = _flags_for(L, e1, finest), _flags_for(L, e2, finest)
    assert np.all(fine >= coarse)


@given(st.integers(0, 2 ** 32 - 1), st.booleans())
@settings(max_examples=30)
def test_flags_are_ancestor_closed(seed, band):
    L = 4
    rng = np.random.default_rng(seed)
    finest = np.where(rng.random(4 ** L) < 0.05, rng.normal(size=4 ** L), 0.0)
    sig = _flags_for(L, 1e-2, finest, band)
    for n in range(1, L):
        for m in range(4 ** n):
            if sig[level_offset(n) + m]:
                assert sig[level_offset(n - 1) + m // 4]


def test_insignificant_details_are_discarded(rng):
    L = 4
    values = _fill(L, rng.normal(scale=1e-6, size=4 ** L) + 1.0)
    det = mra.encode_all(values, L, 1.0)
    assert not det.coeffs[:, :, det.sig == 0].any()


def test_band_widens_by_one_ring():
    L = 3
    raw = np.zeros(level_offset(L), np.uint8)
    # one level-2 cell in the middle of the grid: Morton code of (1, 1) is 3
    raw[level_offset(2) + 3] = 1
    widened = np.empty_like(raw)
    mra._band_kernel(raw, L, widened)
    got = {int(m) for m in np.flatnonzero(widened[level_offset(2):level_offset(3)])}
    from mrswe.zorder import morton_encode
    want = {morton_encode(i, j, 2) for i, j in [(1, 1), (0, 1), (2, 1), (1, 0), (1, 2)]}
    assert got == want


def test_static_mask_forces_refinement():
    L = 3
    static = np.zeros(level_offset(L), np.uint8)
    static[level_offset(2) + 5] = 1
    sig = mra.flag_significant(np.zeros((1, 3, level_offset(L))), np.ones(1), 1e-3, L, static)
    assert sig[level_offset(2) + 5] and sig[level_offset(1) + 1] and sig[0]
    assert sig.sum() == 3


def test_preprocess_flat_bed_gives_empty_mask():
    L = 4
    _, mask = mra.preprocess_dem(np.full(4 ** L, 3.0), L, 1e-3)
    assert not mask.any()


def test_preprocess_single_block_marks_ancestor_chain():
    L = 4
    z = np.zeros(4 ** L)
    m = 37
    z[m] = 1.0
    _, mask = mra.preprocess_dem(z, L, 1e-3)
    chain = {level_offset(n) + (m >> (2 * (L - n))) for n in range(L)}
    assert set(np.flatnonzero(mask)) == chain


def test_preprocess_eps_zero_marks_everything():
    L = 3
    _, mask = mra.preprocess_dem(np.arange(4.0 ** L), L, 0.0)
    assert mask.all()


def test_preprocess_wrong_size_rejected():
    with pytest.raises(ValueError, match="pad or resample"):
        mra.preprocess_dem(np.zeros(10), 2, 1e-3)


def test_check_finite_locates_bad_value():
    v = np.zeros((3, 5))
    v[1, 3] = np.nan
    with pytest.raises(FloatingPointError, match="qx at z-index 3"):
        mra.check_finite(v)


def _advance_state(L, eps, finest, band):
    """Full encode, decode, then the restricted re-encode of the decoded field."""
    values = _fill(L, finest)
    smax = mra.compute_smax(values, L)
    det = mra.encode_all(values, L, eps, smax, band=band)
    mra.decode_tree(values, det, L)
    return values, det, smax


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=25)
def test_restricted_reencode_matches_full_encode(seed):
    L = 5
    rng = np.random.default_rng(seed)
    finest = np.where(rng.random(4 ** L) < 0.1, rng.normal(size=4 ** L), 1.0)
    values, det, smax = _advance_state(L, 1e-2, finest, band=False)
    # the decoded field carries no off-tree detail, so both encodes agree
    ref = mra.encode_all(values.copy(), L, 1e-2, smax)
    again = mra.zero_details_and_reencode(values, mra.DetailField(det.coeffs.copy(), det.sig.copy(), smax), L, 1e-2)
    assert np.array_equal(again.sig, ref.sig)
    assert np.allclose(again.coeffs, ref.coeffs, rtol=0, atol=1e-12)


def test_quiescent_flags_stable(rng):
    L = 4
    finest = np.where(rng.random(4 ** L) < 0.2, 2.0, 1.0)
    values, det, smax = _advance_state(L, 1e-3, finest, band=True)
    first = det.sig.copy()
    for _ in range(3):
        det = mra.zero_details_and_reencode(values, det, L, 1e-3, band=True)
        mra.decode_tree(values, det, L)
    # the band can only add cells once; after that the set is a fixed point
    det2 = mra.zero_details_and_reencode(values, det, L, 1e-3, band=True)
    assert np.array_equal(det2.sig, det.sig)
    assert np.all(det.sig >= first)


def test_refinement_deepens_one_level_per_pass():
    # a jump on the level-0 midline has no level-1 detail; only anticipation
    # lets the next level refine so the moving front can reach finer cells
    L = 4
    side = 1 << L
    jj, ii = morton_order_inverse(L)
    grid = np.where(np.arange(side)[None, :] < side // 2, 6.0, 2.0) * np.ones((side, 1))
    finest = grid[jj, ii]
    det = mra.encode_all(_fill(L, finest), L, 1e-3, band=False)
    assert det.sig[level_offset(1):].sum() == 0
    det = mra.encode_all(_fill(L, finest), L, 1e-3, band=True)
    assert det.sig[level_offset(1):level_offset(2)].all()
    assert not det.sig[level_offset(2):].any()
