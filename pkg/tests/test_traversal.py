import numba
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrswe import traversal
from mrswe.traversal import INFLOW, REFLECTIVE, TRANSMISSIVE
from mrswe.validation import random_closed_tree
from mrswe.zorder import level_of, level_offset, morton_encode


def _sig(L, cells=()):
    sig = np.zeros(level_offset(L), np.uint8)
    for n, m in cells:
        sig[level_offset(n) + m] = 1
    return sig


def test_nothing_significant_records_root():
    rec = traversal.parallel_tree_traversal(_sig(3), 3)
    assert not rec.any()
    assert traversal.compact_leaves(rec).tolist() == [0]


def test_everything_significant_reaches_finest():
    L = 3
    rec = traversal.parallel_tree_traversal(np.ones(level_offset(L), np.uint8), L)
    assert np.array_equal(rec, level_offset(L) + np.arange(4 ** L))
    assert traversal.compact_leaves(rec).size == 4 ** L


def test_root_only_at_level_one():
    rec = traversal.parallel_tree_traversal(_sig(1, [(0, 0)]), 1)
    assert rec.tolist() == [1, 2, 3, 4]


def test_one_refined_quadrant_gives_seven_leaves():
    sig = _sig(2, [(0, 0), (1, 2)])
    leaves = traversal.compact_leaves(traversal.parallel_tree_traversal(sig, 2))
    assert leaves.tolist() == [1, 2, 5 + 8, 5 + 9, 5 + 10, 5 + 11, 4]


def _covered(leaves, L):
    levels = np.array([level_of(int(z)) for z in leaves])
    return int(np.sum(4 ** (L - levels)))


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=50)
def test_ptt_matches_depth_first(seed):
    L = 5
    sig = random_closed_tree(np.random.default_rng(seed), L)
    leaves = traversal.compact_leaves(traversal.parallel_tree_traversal(sig, L))
    dft = traversal.depth_first_leaves(sig, L)
    assert leaves.tolist() == dft
    assert _covered(leaves, L) == 4 ** L


def test_recorded_runs_are_contiguous(rng):
    L = 5
    rec = traversal.parallel_tree_traversal(random_closed_tree(rng, L), L)
    heads = np.r_[True, rec[1:] != rec[:-1]]
    assert np.unique(rec).size == heads.sum()


def test_uniform_neighbours_are_plain_neighbours():
    L = 2
    asm = traversal.assemble(np.ones(level_offset(L), np.uint8), L,
                             (REFLECTIVE, TRANSMISSIVE, INFLOW, REFLECTIVE))
    base = level_offset(L)
    k = list(asm.leaves).index(base + morton_encode(1, 2, L))
    assert asm.west[k] == base + morton_encode(0, 2, L)
    assert asm.east[k] == base + morton_encode(2, 2, L)
    assert asm.south[k] == base + morton_encode(1, 1, L)
    assert asm.north[k] == base + morton_encode(1, 3, L)
    corner = list(asm.leaves).index(base + morton_encode(3, 0, L))
    assert asm.east[corner] == traversal.boundary_sentinel(TRANSMISSIVE)
    assert asm.south[corner] == traversal.boundary_sentinel(INFLOW)
    assert traversal.sentinel_kind(asm.south[corner]) == INFLOW


def test_finer_neighbour_uses_same_level_coefficient():
    # west half at level 1, the east-bottom quadrant refined to level 2
    L = 2
    sig = _sig(L, [(0, 0), (1, 1)])
    asm = traversal.assemble(sig, L)
    k = list(asm.leaves).index(level_offset(1) + 0)
    assert asm.east[k] == level_offset(1) + 1


def test_coarser_neighbour_is_the_covering_leaf():
    L = 2
    sig = _sig(L, [(0, 0), (1, 1)])
    asm = traversal.assemble(sig, L)
    # level-2 leaf in the west column of quadrant 1 looks west into quadrant 0
    z = level_offset(2) + morton_encode(2, 0, L)
    k = list(asm.leaves).index(z)
    assert asm.west[k] == level_offset(1) + 0


def test_neighbour_symmetry_on_uniform_region(rng):
    L = 4
    asm = traversal.assemble(np.ones(level_offset(L), np.uint8), L)
    pos = {int(z): k for k, z in enumerate(asm.leaves)}
    for k, z in enumerate(asm.leaves):
        e = asm.east[k]
        if e >= 0:
            assert asm.west[pos[int(e)]] == z


def test_inactive_neighbour_is_a_wall():
    L = 1
    active = np.ones(level_offset(L + 1), np.int8)
    active[level_offset(1) + 1] = traversal.INACTIVE
    asm = traversal.assemble(_sig(L, [(0, 0)]), L, active_class=active)
    assert asm.east[0] == traversal.boundary_sentinel(REFLECTIVE)


def test_malformed_recorded_grid_is_reported():
    L = 2
    sig = _sig(L, [(0, 0), (1, 1)])
    rec = traversal.parallel_tree_traversal(sig, L)
    leaves = traversal.compact_leaves(rec)
    bad = rec.copy()
    bad[:4] = level_offset(1) + 1  # points at a refined cell
    with pytest.raises(RuntimeError, match="malformed"):
        traversal.find_neighbours(bad, leaves, sig, L)


def test_results_independent_of_workers(rng):
    from mrswe import parallel
    L = 6
    sig = random_closed_tree(rng, L)
    before = numba.get_num_threads()
    parallel.set_workers(1)
    try:
        a = traversal.assemble(sig, L)
        parallel.set_workers(parallel.max_workers())
        b = traversal.assemble(sig, L)
    finally:
        parallel.set_workers(before)
    assert np.array_equal(a.leaves, b.leaves)
    assert np.array_equal(a.neighbours, b.neighbours)
