import itertools
import math

import numpy as np
import pytest

from ttess.geom import GeometryError, Line, Polygon, random_line_hitting
from ttess.lines import (
    DegeneratePattern,
    LinePattern,
    _Arrangement,
    _build,
    enumerate_keys,
    enumerate_ttessellations,
    flip_graph,
    flip_graph_connected,
    nttl,
    pattern_from_points,
    sample_poisson_lines,
    state_key,
)

SQ = Polygon.square()
ONE = [((0.0, 0.3), (1.0, 0.4))]
CROSS = [((0.0, 0.3), (1.0, 0.4)), ((0.6, 0.0), (0.5, 1.0))]
APART = [((0.0, 0.2), (1.0, 0.3)), ((0.0, 0.7), (1.0, 0.9))]


def brute_force_keys(pattern):
    """Every combination of breakpoint runs, kept when the built subdivision validates."""
    arr = _Arrangement(pattern)
    good = set()
    for key in itertools.product(*(arr.runs(i) for i in range(len(pattern)))):
        try:
            t = _build(pattern, arr, key)
        except GeometryError:
            continue
        if not t.validate():
            good.add(key)
    return good


def random_pattern(seed, k):
    rng = np.random.default_rng(seed)
    while True:
        try:
            return LinePattern([random_line_hitting(SQ.vertices, rng) for _ in range(k)], SQ)
        except (DegeneratePattern, ValueError):
            continue


@pytest.mark.parametrize("pairs,expected", [(ONE, 1), (CROSS, 4), (APART, 1)])
def test_regression_counts(pairs, expected):
    pat = pattern_from_points(SQ, pairs)
    assert nttl(pat) == expected
    for t in enumerate_ttessellations(pat):
        assert t.validate() == []
        assert t.stats.nseint == len(pat)
    flip_graph(pat)  # raises if a flip leaves the set


def test_empty_pattern_has_one_tessellation():
    assert nttl(LinePattern([], SQ)) == 1


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("k", [2, 3])
def test_pruned_enumeration_matches_brute_force(seed, k):
    pat = random_pattern(100 * k + seed, k)
    assert set(enumerate_keys(pat)) == brute_force_keys(pat)


@pytest.mark.parametrize("seed", range(4))
def test_flip_graph_connected_and_closed(seed):
    pat = random_pattern(seed, 4)
    assert flip_graph_connected(pat)
    graph = flip_graph(pat)
    # flips are reversible, so the graph is symmetric
    for a, nbrs in graph.items():
        for b in nbrs:
            assert a in graph[b]


def test_state_key_roundtrip():
    pat = random_pattern(11, 3)
    arr = _Arrangement(pat)
    for key in enumerate_keys(pat):
        assert state_key(pat, _build(pat, arr, key), arr) == key


@pytest.mark.parametrize("seed", range(3))
def test_count_invariant_under_rigid_motion(seed):
    pat = random_pattern(seed + 50, 3)
    rot, dx, dy = 0.7 + seed, 2.0, -1.5
    c, s = math.cos(rot), math.sin(rot)

    def move(p):
        return (c * p[0] - s * p[1] + dx, s * p[0] + c * p[1] + dy)

    dom = Polygon([move(v) for v in SQ.vertices])
    pairs = [(move(ln.at(0.0)), move(ln.at(1.0))) for ln in pat]
    assert nttl(pattern_from_points(dom, pairs)) == nttl(pat)


def test_pattern_serialization():
    pat = random_pattern(7, 4)
    again = LinePattern.loads(pat.dumps())
    assert again.same_lines(pat)
    assert again.dumps() == pat.dumps()
    with pytest.raises(ValueError):
        LinePattern.loads("pattern 1\ndomain 4\n0 0\n")


def test_pattern_rejects_bad_lines():
    with pytest.raises(ValueError):
        LinePattern([Line(0.0, 5.0)], SQ)
    with pytest.raises(ValueError):
        LinePattern([Line(0.1, 0.5), Line(0.1, 0.5)], SQ)
    with pytest.raises(DegeneratePattern):
        nttl(pattern_from_points(SQ, [((0, 0), (1, 1))]))


def test_enumeration_size_limit():
    pat = random_pattern(1, 6)
    with pytest.raises(ValueError):
        nttl(pat)


def test_poisson_line_count_small_sample():
    rng = np.random.default_rng(8)
    n = 20000
    counts = np.array([len(sample_poisson_lines(SQ, 1.0, rng)) for _ in range(n)])
    mean = 4 / math.pi
    assert abs(counts.mean() - mean) < 4 * math.sqrt(mean / n)
    assert counts.var() == pytest.approx(mean, rel=0.05)
