"""Poisson line patterns and brute-force enumeration of the T-tessellations they support."""
from __future__ import annotations

import itertools
import math
from collections import deque
from typing import Iterable, Optional, Sequence

import numpy as np

from .geom import Line, Point, Polygon, Tolerance, chord, dist, intersect, random_line_hitting
from .tessellation import TTessellation

K_MAX = 5


class DegeneratePattern(ValueError):
    """Lines not in general position with respect to the domain."""


class LinePattern:
    """A finite set of distinct lines, each hitting the domain."""

    def __init__(self, lines: Iterable[Line], domain, tol: Optional[Tolerance] = None):
        if not isinstance(domain, Polygon):
            domain = Polygon(domain)
        self.domain = domain
        self.tol = tol or domain.default_tolerance()
        self.lines: list[Line] = list(lines)
        for i, ln in enumerate(self.lines):
            if chord(ln, domain, self.tol) is None:
                raise ValueError(f"line {i} ({ln!r}) does not hit the domain")
            for j in range(i):
                if ln.same_as(self.lines[j], self.tol):
                    raise ValueError(f"lines {j} and {i} coincide")

    def __len__(self) -> int:
        return len(self.lines)

    def __iter__(self):
        return iter(self.lines)

    @property
    def k(self) -> int:
        return len(self.lines)

    def index_of(self, line: Line) -> Optional[int]:
        for i, ln in enumerate(self.lines):
            if ln.same_as(line, self.tol):
                return i
        return None

    def same_lines(self, other: "LinePattern") -> bool:
        if len(self) != len(other):
            return False
        return all(other.index_of(ln) is not None for ln in self.lines)

    def dumps(self) -> str:
        out = ["pattern 1", f"domain {self.domain.n_vertices}"]
        out += [f"{x!r} {y!r}" for x, y in self.domain.vertices]
        out.append(f"lines {len(self.lines)}")
        out += [f"{ln.theta!r} {ln.p!r}" for ln in self.lines]
        return "\n".join(out) + "\n"

    @classmethod
    def loads(cls, text: str) -> "LinePattern":
        rows = [r.split() for r in text.splitlines() if r.strip() and not r.lstrip().startswith("#")]
        try:
            if rows[0] != ["pattern", "1"] or rows[1][0] != "domain":
                raise ValueError("bad pattern header")
            n = int(rows[1][1])
            corners = [(float(a), float(b)) for a, b in rows[2 : 2 + n]]
            if rows[2 + n][0] != "lines":
                raise ValueError("expected 'lines <k>'")
            k = int(rows[2 + n][1])
            body = rows[3 + n : 3 + n + k]
            if len(body) != k:
                raise ValueError(f"expected {k} lines, got {len(body)}")
            lines = [Line(float(a), float(b)) for a, b in body]
        except (IndexError, ValueError) as exc:
            raise ValueError(f"cannot parse line pattern: {exc}") from exc
        return cls(lines, Polygon(corners))

    def __repr__(self):
        return f"LinePattern({self.lines!r})"


def sample_poisson_lines(domain, intensity: float, rng: np.random.Generator) -> LinePattern:
    """Poisson line process of the given linear intensity restricted to ``domain``.

    The count is Poisson with mean ``intensity * perimeter / pi``; given the
    count, lines are i.i.d. from the invariant measure conditioned on hitting.
    """
    if not intensity > 0:
        raise ValueError("intensity must be positive")
    if not isinstance(domain, Polygon):
        domain = Polygon(domain)
    n = int(rng.poisson(intensity * domain.perimeter / math.pi))
    return LinePattern([random_line_hitting(domain.vertices, rng) for _ in range(n)], domain)


# ----------------------------------------------------------------------
# enumeration oracle


class _Arrangement:
    """Chords of the pattern lines cut at their mutual intersections inside the domain."""

    def __init__(self, pattern: LinePattern):
        dom, tol = pattern.domain, pattern.tol
        eps = tol.eps_len
        lines = pattern.lines
        k = len(lines)
        self.lines = lines
        self.chords = []
        for i, ln in enumerate(lines):
            c = chord(ln, dom, tol)
            for corner in dom.vertices:
                if abs(ln.offset(corner)) <= eps:
                    raise DegeneratePattern(f"line {i} passes through a corner of the domain")
            self.chords.append(c)
        # breakpoints per line: (param, other line index or None for a chord end)
        bps = [[(ln.param(c[0]), None), (ln.param(c[1]), None)] for ln, c in zip(lines, self.chords)]
        self.crossing: dict[tuple, Point] = {}
        for i, j in itertools.combinations(range(k), 2):
            li, lj = lines[i], lines[j]
            if abs(li.nx * lj.ny - li.ny * lj.nx) <= tol.eps_ang:
                continue
            x = intersect(li, lj)
            ti, tj = li.param(x), lj.param(x)
            (a0, a1), (b0, b1) = (bps[i][0][0], bps[i][1][0]), (bps[j][0][0], bps[j][1][0])
            if a0 - eps <= ti <= a1 + eps and b0 - eps <= tj <= b1 + eps:
                if min(ti - a0, a1 - ti, tj - b0, b1 - tj) <= eps:
                    raise DegeneratePattern(f"lines {i} and {j} meet on the domain boundary")
                self.crossing[(i, j)] = x
                bps[i].append((ti, j))
                bps[j].append((tj, i))
        pts = list(self.crossing.values())
        for a, b in itertools.combinations(pts, 2):
            if dist(a, b) <= eps:
                raise DegeneratePattern("three or more lines meet at one point")
        self.breaks = [sorted(b) for b in bps]
        # index of the breakpoint where line i meets line j
        self.where = {}
        for i, b in enumerate(self.breaks):
            for idx, (_, j) in enumerate(b):
                if j is not None:
                    self.where[(i, j)] = idx

    def status(self, i: int, run: tuple, j: int) -> str:
        idx = self.where[(i, j)]
        a, b = run
        if idx < a or idx > b:
            return "absent"
        if idx == a or idx == b:
            return "end"
        return "through"

    def runs(self, i: int) -> list[tuple]:
        n = len(self.breaks[i])
        return [(a, b) for a in range(n) for b in range(a + 1, n)]

    def segment(self, i: int, run: tuple):
        ln = self.lines[i]
        return (ln, ln.at(self.breaks[i][run[0]][0]), ln.at(self.breaks[i][run[1]][0]))


_ALLOWED = {
    ("through", "end"),
    ("end", "through"),
    ("through", "absent"),
    ("absent", "through"),
    ("absent", "absent"),
}


def _candidate_keys(arr: _Arrangement) -> list[tuple]:
    k = len(arr.lines)
    keys = []
    choice: list[tuple] = []

    def dfs(i: int) -> None:
        if i == k:
            keys.append(tuple(choice))
            return
        for run in arr.runs(i):
            ok = True
            for j in range(i):
                if (j, i) in arr.crossing:
                    if (arr.status(i, run, j), arr.status(j, choice[j], i)) not in _ALLOWED:
                        ok = False
                        break
            if ok:
                choice.append(run)
                dfs(i + 1)
                choice.pop()

    dfs(0)
    return keys


def _build(pattern: LinePattern, arr: _Arrangement, key: tuple) -> TTessellation:
    segs = [arr.segment(i, run) for i, run in enumerate(key)]
    return TTessellation.from_segments(pattern.domain, segs, pattern.tol)


def enumerate_keys(pattern: LinePattern, k_max: int = K_MAX) -> list[tuple]:
    """Keys (one breakpoint run per line) of all T-tessellations supported by ``pattern``."""
    if len(pattern) > k_max:
        raise ValueError(f"pattern has {len(pattern)} lines, enumeration limited to {k_max}")
    arr = _Arrangement(pattern)
    good = []
    for key in _candidate_keys(arr):
        t = _build(pattern, arr, key)
        if not t.validate():
            good.append(key)
    return good


def enumerate_ttessellations(pattern: LinePattern, k_max: int = K_MAX) -> list[TTessellation]:
    """All T-tessellations whose segments are supported exactly by the lines of ``pattern``."""
    if len(pattern) > k_max:
        raise ValueError(f"pattern has {len(pattern)} lines, enumeration limited to {k_max}")
    arr = _Arrangement(pattern)
    return [_build(pattern, arr, key) for key in enumerate_keys(pattern, k_max)]


def nttl(pattern: LinePattern, k_max: int = K_MAX) -> int:
    return len(enumerate_keys(pattern, k_max))


def state_key(pattern: LinePattern, t: TTessellation, arr: Optional[_Arrangement] = None) -> tuple:
    """Key of ``t`` in the enumeration of ``pattern``; raises if ``t`` is not supported by it."""
    arr = arr or _Arrangement(pattern)
    eps = 10 * pattern.tol.eps_len
    runs: list = [None] * len(pattern)
    for sid in t.internal_segments():
        seg = t.segments[sid]
        i = pattern.index_of(seg.line)
        if i is None or runs[i] is not None:
            raise ValueError("tessellation is not supported by the pattern")
        ln = pattern.lines[i]
        ends = []
        for v in (seg.verts[0], seg.verts[-1]):
            tv = ln.param(t.vertices[v].pos)
            idx = min(range(len(arr.breaks[i])), key=lambda m: abs(arr.breaks[i][m][0] - tv))
            if abs(arr.breaks[i][idx][0] - tv) > eps:
                raise ValueError("segment end is not a breakpoint of the pattern")
            ends.append(idx)
        runs[i] = (min(ends), max(ends))
    if any(r is None for r in runs):
        raise ValueError("tessellation lacks a segment on some pattern line")
    return tuple(runs)


def flip_graph(pattern: LinePattern, k_max: int = K_MAX) -> dict:
    """Adjacency ``key -> set of keys`` of single flips between enumerated states.

    Raises if some flip leaves the enumerated set, i.e. if flip-closure fails.
    """
    from .operators import InapplicableUpdate, apply, enumerate_flips

    arr = _Arrangement(pattern)
    keys = enumerate_keys(pattern, k_max)
    known = set(keys)
    graph = {}
    for key in keys:
        t = _build(pattern, arr, key)
        nbrs = set()
        for f in enumerate_flips(t):
            try:
                rec = apply(t, f)
            except InapplicableUpdate:
                continue
            k2 = state_key(pattern, t, arr)
            if k2 not in known:
                raise AssertionError(f"flip {f} from {key} leaves the enumerated set (to {k2})")
            nbrs.add(k2)
            apply(t, rec.inverse)
        graph[key] = nbrs
    return graph


def flip_graph_connected(pattern: LinePattern, k_max: int = K_MAX) -> bool:
    graph = flip_graph(pattern, k_max)
    if not graph:
        return False
    start = next(iter(graph))
    seen = {start}
    todo = deque([start])
    while todo:
        for nb in graph[todo.popleft()]:
            if nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return len(seen) == len(graph)


def pattern_from_points(domain, pairs: Sequence) -> LinePattern:
    """Pattern of the lines through each given pair of points."""
    return LinePattern([Line.through(Point(*a), Point(*b)) for a, b in pairs], domain)
