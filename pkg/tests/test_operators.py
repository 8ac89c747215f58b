import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import random_state, stats_close
from ttess import operators as ops
from ttess.geom import Polygon
from ttess.tessellation import TTessellation


@pytest.fixture
def tee(empty):
    """A vertical chord at x=0.3 with a horizontal one abutting it at height 0.6."""
    ops.apply(empty, ops.split_through(empty, (0.3, 0), (0.3, 1)))
    ops.apply(empty, ops.split_through(empty, (0.3, 0.6), (1, 0.6)))
    return empty


def _segment_at(t, pt):
    for sid in t.internal_segments():
        s = t.segments[sid]
        if abs(s.line.offset(pt)) < 1e-9:
            return sid
    raise LookupError(pt)


def test_split_of_empty_square(empty):
    rec = ops.apply(empty, ops.split_through(empty, (0.25, 0), (0.75, 1)))
    assert rec.kind == "split"
    assert rec.delta.nseint == 1 and rec.delta.nnbseint == 1
    # both chord ends lie on the domain boundary
    assert rec.delta.nveint == 0
    assert rec.xi == 0
    assert rec.added_length == pytest.approx(math.hypot(0.5, 1))
    assert isinstance(rec.inverse, ops.Merge)


def test_interior_chord_adds_two_internal_vertices(tee):
    s = ops.split_through(tee, (0.3, 0.2), (1.0, 0.3))
    # the chord runs from the vertical segment to the right side
    assert ops.xi(tee, s) == 0
    rec = ops.apply(tee, s)
    assert rec.delta.nveint == 1
    # a chord between two internal segments adds two internal vertices
    s2 = ops.split_through(tee, (0.65, 0.3), (0.65, 0.6))
    rec2 = ops.apply(tee, s2)
    assert rec2.delta.nveint == 2
    assert tee.validate() == []


def test_xi_counts_nonblocking_hosts(tee):
    # this chord ends on the non-blocking horizontal segment: xi = 1
    s = ops.split_through(tee, (0.6, 0.6), (0.7, 1.0))
    assert ops.xi(tee, s) == 1
    rec = ops.apply(tee, s)
    assert rec.delta.nnbseint == 0  # one new non-blocking segment, one host turned blocking


def test_merge_requires_nonblocking(tee):
    vert = _segment_at(tee, (0.3, 0.5))
    with pytest.raises(ops.InapplicableUpdate):
        ops.apply(tee, ops.Merge(vert))
    assert tee.validate() == []
    horiz = _segment_at(tee, (0.5, 0.6))
    rec = ops.apply(tee, ops.Merge(horiz))
    assert tee.stats.nseint == 1
    assert rec.removed_length == pytest.approx(0.7)


def test_flip_by_hand(tee):
    vert = _segment_at(tee, (0.3, 0.5))
    seg = tee.segments[vert]
    top = 1 if tee.vertices[seg.verts[-1]].pos[1] > 0.9 else 0
    pv = ops.preview_flip(tee, ops.Flip(vert, top))
    assert pv.removed_length == pytest.approx(0.4)
    assert pv.added_length == pytest.approx(0.3)
    assert pv.x == pytest.approx((0.0, 0.6))
    before = tee.copy()
    rec = ops.apply(tee, ops.Flip(vert, top))
    assert tee.validate() == []
    assert tee.stats.nseint == 2
    assert tee.stats.total_edge_length == pytest.approx(4 + 1.6)
    assert rec.delta.nbseint == 0
    assert isinstance(rec.inverse, ops.Flip)
    ops.apply(tee, rec.inverse)
    assert tee.same_geometry(before)


def test_no_flip_or_merge_on_empty(empty, rng):
    with pytest.raises(ops.InapplicableUpdate):
        ops.sample_uniform_flip(empty, rng)
    with pytest.raises(ops.InapplicableUpdate):
        ops.sample_uniform_merge(empty, rng)
    assert ops.enumerate_flips(empty) == []
    assert ops.enumerate_merges(empty) == []


def test_enumeration_sizes_match_stats():
    t = random_state(3)
    assert len(ops.enumerate_merges(t)) == t.stats.nnbseint
    assert len(ops.enumerate_flips(t)) == 2 * t.stats.nbseint


def test_split_mass_is_sum_of_cell_perimeters_over_pi():
    t = random_state(4)
    per = sum(c.perimeter for c in t.cells.values())
    assert ops.split_total_mass(t) == pytest.approx(per / math.pi)
    assert ops.split_density_uniform(t) == pytest.approx(1 / ops.split_total_mass(t))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["split", "merge", "flip"]))
def test_apply_then_inverse_restores(seed, kind):
    rng = np.random.default_rng(seed)
    t = random_state(seed % 1000, n_updates=80)
    before = t.copy()
    try:
        u = {
            "split": ops.sample_uniform_split,
            "merge": ops.sample_uniform_merge,
            "flip": ops.sample_uniform_flip,
        }[kind](t, rng)
        rec = ops.apply(t, u)
    except ops.InapplicableUpdate:
        assert t.same_geometry(before)
        return
    assert t.validate() == []
    expect = before.stats.copy()
    expect.add(rec.delta)
    assert stats_close(t.stats, expect)
    ops.apply(t, rec.inverse)
    assert t.same_geometry(before)
    assert stats_close(t.stats, before.stats)


def test_split_cell_choice_proportional_to_perimeter(tee, rng):
    cells = list(tee.cells)
    per = np.array([tee.cells[c].perimeter for c in cells])
    n = 6000
    counts = dict.fromkeys(cells, 0)
    for _ in range(n):
        counts[ops.sample_uniform_split(tee, rng).cell] += 1
    obs = np.array([counts[c] for c in cells])
    assert stats.chisquare(obs, n * per / per.sum()).pvalue > 0.001


def test_uniform_merge_and_flip_choices(rng):
    t = random_state(6)
    merges = ops.enumerate_merges(t)
    flips = ops.enumerate_flips(t)
    assert merges and flips
    n = 400 * len(flips)
    fc = {f: 0 for f in flips}
    for _ in range(n):
        fc[ops.sample_uniform_flip(t, rng)] += 1
    assert stats.chisquare(list(fc.values())).pvalue > 0.001
    assert ops.flip_pmf_uniform(t) == pytest.approx(1 / len(flips))
    assert ops.merge_pmf_uniform(t) == pytest.approx(1 / len(merges))


@pytest.mark.parametrize("seed", range(5))
def test_empty_greedily(seed):
    t = random_state(seed)
    receipts = ops.empty_greedily(t)
    assert t.stats.nseint == 0
    assert t.same_geometry(TTessellation.new_empty(Polygon.square()))
    assert all(r.kind in ("merge", "flip") for r in receipts)


def test_point_outside_domain(empty):
    with pytest.raises(ValueError):
        ops.cell_containing(empty, (2.0, 2.0))
