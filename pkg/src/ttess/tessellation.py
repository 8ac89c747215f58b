"""Planar T-tessellation state with incrementally maintained statistics.

Storage is id-indexed: vertices, segments and cells live in dicts keyed by
monotonically increasing integers. Edges are implicit, as consecutive vertex
pairs of a segment; two maps make them addressable:

* ``_edge_seg[(a, b)]`` (with ``a < b``) gives the segment carrying edge ab;
* ``_left[(a, b)]`` gives the cell on the left of the directed edge a->b.

Cell boundaries are counter-clockwise vertex cycles. Boundary sides of the
domain are stored as non-internal segments, so every vertex other than a
domain corner sits in the interior of exactly one segment (``through``) and at
the end of exactly one other (``ends``).
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, fields
from typing import Iterable, Optional, Sequence

from .geom import (
    GeometryError,
    Line,
    Point,
    Polygon,
    Tolerance,
    dist,
    intersect,
    line_angle,
    signed_area,
)


class IndexedSet:
    """Set of ints with O(1) add, remove and positional access."""

    __slots__ = ("_items", "_pos")

    def __init__(self, items: Iterable[int] = ()):
        self._items: list[int] = []
        self._pos: dict[int, int] = {}
        for it in items:
            self.add(it)

    def add(self, x: int) -> None:
        if x not in self._pos:
            self._pos[x] = len(self._items)
            self._items.append(x)

    def discard(self, x: int) -> None:
        i = self._pos.pop(x, None)
        if i is None:
            return
        last = self._items.pop()
        if last != x:
            self._items[i] = last
            self._pos[last] = i

    def __getitem__(self, i: int) -> int:
        return self._items[i]

    def __contains__(self, x) -> bool:
        return x in self._pos

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)


@dataclass(slots=True)
class Vertex:
    pos: Point
    through: list  # segments whose interior contains the vertex
    ends: list  # segments ending at the vertex
    boundary: bool = False
    corner: bool = False

    @property
    def on_boundary(self) -> bool:
        return self.boundary

    @property
    def degree(self) -> int:
        return 2 * len(self.through) + len(self.ends)


@dataclass(slots=True)
class Segment:
    line: Line
    verts: list  # vertex ids ordered along the line direction
    internal: bool = True

    @property
    def n_edges(self) -> int:
        return len(self.verts) - 1


@dataclass(slots=True)
class Cell:
    cycle: list  # counter-clockwise vertex ids
    area: float = 0.0
    perimeter: float = 0.0


@dataclass(frozen=True)
class Edge:
    endpoints: tuple
    segment: int
    side_cells: tuple  # (cell, cell or None)


@dataclass(slots=True)
class StatsCache:
    total_edge_length: float = 0.0
    nseint: int = 0
    nnbseint: int = 0
    nbseint: int = 0
    nveint: int = 0
    sum_sq_cell_area: float = 0.0
    sum_phi_internal: float = 0.0  # acute angles at vertices off the domain boundary
    sum_phi_boundary: float = 0.0  # acute angles at T-vertices lying on the boundary

    @property
    def sum_vertex_acute_angles(self) -> float:
        return self.sum_phi_internal + self.sum_phi_boundary

    def copy(self) -> "StatsCache":
        return copy.copy(self)

    def add(self, other: "StatsCache", sign: int = 1) -> None:
        for f in _STAT_NAMES:
            setattr(self, f, getattr(self, f) + sign * getattr(other, f))

    def minus(self, other: "StatsCache") -> "StatsCache":
        return StatsCache(*(getattr(self, f) - getattr(other, f) for f in _STAT_NAMES))

    def as_dict(self) -> dict:
        return {f: getattr(self, f) for f in _STAT_NAMES}


_STAT_NAMES = tuple(f.name for f in fields(StatsCache))
_INT_STATS = ("nseint", "nnbseint", "nbseint", "nveint")

# A delta has the same fields as the cache it updates.
StatsDelta = StatsCache


def _ekey(a: int, b: int) -> tuple:
    return (a, b) if a < b else (b, a)


class TTessellation:
    """A T-tessellation of a convex polygonal domain.

    Build the empty tessellation with :meth:`new_empty` (or the constructor),
    or an arbitrary segment arrangement with :meth:`from_segments`. Local
    updates go through :mod:`ttess.operators`.
    """

    def __init__(self, domain: Polygon, tol: Optional[Tolerance] = None):
        if not isinstance(domain, Polygon):
            domain = Polygon(domain)
        self.domain = domain
        self.tol = tol or domain.default_tolerance()
        self.vertices: dict[int, Vertex] = {}
        self.segments: dict[int, Segment] = {}
        self.cells: dict[int, Cell] = {}
        self._left: dict[tuple, int] = {}
        self._edge_seg: dict[tuple, int] = {}
        self.nonblocking = IndexedSet()
        self.blocking = IndexedSet()
        self.stats = StatsCache()
        self._next_v = 0
        self._next_s = 0
        self._next_c = 0
        self._init_empty()

    @classmethod
    def new_empty(cls, domain, tol: Optional[Tolerance] = None) -> "TTessellation":
        return cls(domain, tol)

    # ------------------------------------------------------------------
    # construction

    def _init_empty(self) -> None:
        corners = [self._new_vertex(pt, boundary=True, corner=True) for pt in self.domain.vertices]
        n = len(corners)
        for i in range(n):
            a, b = corners[i], corners[(i + 1) % n]
            pa, pb = self.vertices[a].pos, self.vertices[b].pos
            line = Line.through(pa, pb)
            verts = [a, b] if line.param(pa) < line.param(pb) else [b, a]
            sid = self._new_segment(line, verts, internal=False)
            self.vertices[a].ends.append(sid)
            self.vertices[b].ends.append(sid)
            self._edge_seg[_ekey(a, b)] = sid
        cid = self._new_cell(list(corners))
        for i in range(n):
            self._left[(corners[i], corners[(i + 1) % n])] = cid
        self.stats = self.recompute_stats()

    def _new_vertex(self, pos, boundary=False, corner=False) -> int:
        vid = self._next_v
        self._next_v += 1
        self.vertices[vid] = Vertex(Point(*pos), [], [], boundary, corner)
        return vid

    def _new_segment(self, line: Line, verts: list, internal: bool = True) -> int:
        sid = self._next_s
        self._next_s += 1
        self.segments[sid] = Segment(line, verts, internal)
        return sid

    def _new_cell(self, cycle: list) -> int:
        cid = self._next_c
        self._next_c += 1
        cell = Cell(cycle)
        self.cells[cid] = cell
        self._refresh_cell(cell)
        return cid

    @classmethod
    def from_segments(cls, domain, segments: Sequence, tol: Optional[Tolerance] = None) -> "TTessellation":
        """Build the subdivision induced by internal segments given as ``(line, end1, end2)``.

        ``line`` may be None, in which case it is taken through both ends. No
        T-tessellation property is enforced here; run :meth:`validate` on the
        result. Overlapping collinear segments raise :class:`GeometryError`.
        """
        t = cls(domain, tol)
        eps = t.tol.eps_len
        # restart from bare corners
        corner_ids = [v for v, vx in t.vertices.items() if vx.corner]
        sides = [(s.line, s.verts[0], s.verts[-1]) for s in t.segments.values()]
        t.vertices = {v: Vertex(t.vertices[v].pos, [], [], True, True) for v in corner_ids}
        t.segments, t.cells, t._left, t._edge_seg = {}, {}, {}, {}

        def vertex_at(pt) -> int:
            for vid, vx in t.vertices.items():
                if dist(vx.pos, pt) <= eps:
                    return vid
            return t._new_vertex(pt)

        items = []  # (line, internal, end vertex ids)
        for line, a, b in sides:
            items.append((line, False, [a, b]))
        for seg in segments:
            line, p, q = seg
            p, q = Point(*p), Point(*q)
            if line is None:
                line = Line.through(p, q)
            if dist(p, q) <= eps:
                raise GeometryError("segment of zero length")
            items.append((line, True, [vertex_at(p), vertex_at(q)]))

        on_seg: list[set] = [set(ends) for _, _, ends in items]
        extent = []
        for line, _, ends in items:
            ts = sorted(line.param(t.vertices[v].pos) for v in ends)
            extent.append((ts[0], ts[1]))
        for i in range(len(items)):
            li = items[i][0]
            for j in range(i + 1, len(items)):
                lj = items[j][0]
                if abs(li.nx * lj.ny - li.ny * lj.nx) <= t.tol.eps_ang:
                    if abs(li.offset(lj.at(0.0))) <= eps:
                        (a0, a1), (b0, b1) = extent[i], extent[j]
                        if li.dx * lj.dx + li.dy * lj.dy < 0:
                            b0, b1 = -b1, -b0
                        if min(a1, b1) - max(a0, b0) > eps:
                            raise GeometryError("overlapping collinear segments")
                    continue
                x = intersect(li, lj)
                ti, tj = li.param(x), lj.param(x)
                if extent[i][0] - eps <= ti <= extent[i][1] + eps and extent[j][0] - eps <= tj <= extent[j][1] + eps:
                    vid = vertex_at(x)
                    on_seg[i].add(vid)
                    on_seg[j].add(vid)

        for k, (line, internal, ends) in enumerate(items):
            vs = sorted(on_seg[k], key=lambda v: line.param(t.vertices[v].pos))
            sid = t._new_segment(line, vs, internal)
            for idx, v in enumerate(vs):
                vx = t.vertices[v]
                if idx == 0 or idx == len(vs) - 1:
                    vx.ends.append(sid)
                else:
                    vx.through.append(sid)
                if not internal:
                    vx.boundary = True
            for a, b in zip(vs, vs[1:]):
                t._edge_seg[_ekey(a, b)] = sid

        t._trace_faces()
        t._rebuild_classification()
        t.stats = t.recompute_stats()
        return t

    def _trace_faces(self) -> None:
        nbrs: dict[int, list] = {v: [] for v in self.vertices}
        for a, b in self._edge_seg:
            nbrs[a].append(b)
            nbrs[b].append(a)
        order: dict[int, list] = {}
        for v, ns in nbrs.items():
            px, py = self.vertices[v].pos
            order[v] = sorted(
                ns, key=lambda w: math.atan2(self.vertices[w].pos[1] - py, self.vertices[w].pos[0] - px)
            )
        seen = set()
        for a0, b0 in list(self._edge_seg):
            for start in ((a0, b0), (b0, a0)):
                if start in seen:
                    continue
                cycle = []
                a, b = start
                while (a, b) not in seen:
                    seen.add((a, b))
                    cycle.append(a)
                    ring = order[b]
                    i = ring.index(a)
                    a, b = b, ring[i - 1]  # next neighbour clockwise from b->a
                pts = [self.vertices[v].pos for v in cycle]
                if len(cycle) >= 3 and signed_area(pts) > 0:
                    cid = self._new_cell(cycle)
                    for k in range(len(cycle)):
                        self._left[(cycle[k], cycle[(k + 1) % len(cycle)])] = cid

    # ------------------------------------------------------------------
    # queries

    def counts(self) -> tuple:
        """``(nve, ned, nce, nseint, nveint, nnbseint, nbseint)``."""
        s = self.stats
        return (
            len(self.vertices),
            len(self._edge_seg),
            len(self.cells),
            s.nseint,
            s.nveint,
            s.nnbseint,
            s.nbseint,
        )

    def edge_segment(self, a: int, b: int) -> int:
        return self._edge_seg[_ekey(a, b)]

    def left_cell(self, a: int, b: int) -> Optional[int]:
        return self._left.get((a, b))

    def edges(self) -> list[Edge]:
        out = []
        for (a, b), sid in self._edge_seg.items():
            c1, c2 = self._left.get((a, b)), self._left.get((b, a))
            if c1 is None:
                c1, c2 = c2, None
            out.append(Edge((a, b), sid, (c1, c2)))
        return out

    def internal_segments(self) -> list[int]:
        return [sid for sid, s in self.segments.items() if s.internal]

    def segment_length(self, sid: int) -> float:
        s = self.segments[sid]
        return dist(self.vertices[s.verts[0]].pos, self.vertices[s.verts[-1]].pos)

    def is_blocking(self, sid: int) -> bool:
        s = self.segments[sid]
        return s.internal and len(s.verts) > 2

    def vertex_angle(self, vid: int) -> float:
        """Acute angle between the crossing and the abutting segment at a T-vertex."""
        v = self.vertices[vid]
        if v.corner:
            return 0.0
        return line_angle(self.segments[v.through[0]].line, self.segments[v.ends[0]].line)

    def line_pattern(self):
        from .lines import LinePattern

        return LinePattern([self.segments[s].line for s in self.internal_segments()], self.domain)

    def cell_areas(self) -> list[float]:
        return [c.area for c in self.cells.values()]

    def segment_angles(self, internal_only: bool = False) -> list[float]:
        """Acute angle at every non-corner vertex (or only those off the boundary)."""
        out = []
        for vid, v in self.vertices.items():
            if v.corner or (internal_only and v.boundary):
                continue
            out.append(self.vertex_angle(vid))
        return out

    def cell_polygon(self, cid: int) -> list[Point]:
        return [self.vertices[v].pos for v in self.cells[cid].cycle]

    def copy(self) -> "TTessellation":
        """Independent copy; lines, points and the domain are immutable and shared."""
        t = object.__new__(TTessellation)
        t.domain = self.domain
        t.tol = self.tol
        t.vertices = {
            k: Vertex(v.pos, list(v.through), list(v.ends), v.boundary, v.corner) for k, v in self.vertices.items()
        }
        t.segments = {k: Segment(s.line, list(s.verts), s.internal) for k, s in self.segments.items()}
        t.cells = {k: Cell(list(c.cycle), c.area, c.perimeter) for k, c in self.cells.items()}
        t._left = dict(self._left)
        t._edge_seg = dict(self._edge_seg)
        t.nonblocking = IndexedSet(self.nonblocking)
        t.blocking = IndexedSet(self.blocking)
        t.stats = self.stats.copy()
        t._next_v, t._next_s, t._next_c = self._next_v, self._next_s, self._next_c
        return t

    # ------------------------------------------------------------------
    # graph primitives used by the operators; none of them touch ``stats``

    def _refresh_cell(self, cell: Cell) -> None:
        V = self.vertices
        pts = [V[v].pos for v in cell.cycle]
        a = 0.0
        per = 0.0
        x0, y0 = pts[-1]
        for x1, y1 in pts:
            a += x0 * y1 - x1 * y0
            per += math.hypot(x1 - x0, y1 - y0)
            x0, y0 = x1, y1
        cell.area = 0.5 * a
        cell.perimeter = per

    def _insert_vertex(self, a: int, b: int, v: int) -> int:
        """Put vertex ``v`` on edge ab; returns the carrying segment."""
        sid = self._edge_seg.pop(_ekey(a, b))
        self._edge_seg[_ekey(a, v)] = sid
        self._edge_seg[_ekey(v, b)] = sid
        verts = self.segments[sid].verts
        i, j = verts.index(a), verts.index(b)
        verts.insert(max(i, j), v)
        for x, y in ((a, b), (b, a)):
            cid = self._left.pop((x, y), None)
            if cid is None:
                continue
            cyc = self.cells[cid].cycle
            cyc.insert(cyc.index(x) + 1, v)
            self._left[(x, v)] = cid
            self._left[(v, y)] = cid
        return sid

    def _remove_flat_vertex(self, v: int) -> tuple:
        """Remove a degree-2 vertex from the interior of its segment; returns its neighbours."""
        sid = self.vertices[v].through[0]
        verts = self.segments[sid].verts
        i = verts.index(v)
        a, b = verts[i - 1], verts[i + 1]
        del verts[i]
        del self._edge_seg[_ekey(a, v)]
        del self._edge_seg[_ekey(v, b)]
        self._edge_seg[_ekey(a, b)] = sid
        for x, y in ((a, b), (b, a)):
            cid = self._left.pop((x, v), None)
            if cid is None:
                continue
            del self._left[(v, y)]
            self.cells[cid].cycle.remove(v)
            self._left[(x, y)] = cid
        del self.vertices[v]
        return a, b

    def _add_edge(self, p: int, q: int, cid: int, sid: int) -> int:
        """Split cell ``cid`` along a new edge pq (both already on its cycle)."""
        cell = self.cells[cid]
        cyc = cell.cycle
        i, j = cyc.index(p), cyc.index(q)
        if i < j:
            c1 = cyc[i : j + 1]
            c2 = cyc[j:] + cyc[: i + 1]
        else:
            c1 = cyc[i:] + cyc[: j + 1]
            c2 = cyc[j : i + 1]
        cell.cycle = c1
        self._refresh_cell(cell)
        new = self._new_cell(c2)
        left = self._left
        for k in range(len(c2) - 1):
            left[(c2[k], c2[k + 1])] = new
        left[(p, q)] = new
        left[(q, p)] = cid
        self._edge_seg[_ekey(p, q)] = sid
        return new

    def _remove_edge(self, p: int, q: int) -> int:
        """Merge the two cells on either side of edge pq; returns the surviving cell."""
        c1 = self._left.pop((p, q))
        c2 = self._left.pop((q, p))
        del self._edge_seg[_ekey(p, q)]
        cyc1 = self.cells[c1].cycle
        cyc2 = self.cells.pop(c2).cycle
        i = cyc1.index(q)
        r1 = cyc1[i:] + cyc1[:i]  # q ... p
        j = cyc2.index(p)
        r2 = cyc2[j:] + cyc2[:j]  # p ... q
        merged = r1 + r2[1:-1]
        left = self._left
        for k in range(len(r2) - 2):
            left[(r2[k], r2[k + 1])] = c1
        left[(r2[-2], q)] = c1
        cell = self.cells[c1]
        cell.cycle = merged
        self._refresh_cell(cell)
        return c1

    def _classify(self, sid: int) -> None:
        s = self.segments.get(sid)
        self.nonblocking.discard(sid)
        self.blocking.discard(sid)
        if s is None or not s.internal:
            return
        if len(s.verts) == 2:
            self.nonblocking.add(sid)
        else:
            self.blocking.add(sid)

    def _rebuild_classification(self) -> None:
        self.nonblocking = IndexedSet()
        self.blocking = IndexedSet()
        for sid in self.segments:
            self._classify(sid)

    def _contribution(self, cells: Iterable[int], segs: Iterable[int], verts: Iterable[int]) -> StatsCache:
        """Partial statistics carried by the given (existing) records."""
        out = StatsCache()
        for cid in cells:
            a = self.cells[cid].area
            out.sum_sq_cell_area += a * a
        V = self.vertices
        for sid in segs:
            s = self.segments[sid]
            out.total_edge_length += dist(V[s.verts[0]].pos, V[s.verts[-1]].pos)
            if s.internal:
                out.nseint += 1
                if len(s.verts) == 2:
                    out.nnbseint += 1
                else:
                    out.nbseint += 1
        for vid in verts:
            v = V[vid]
            if v.corner:
                continue
            phi = self.vertex_angle(vid)
            if v.boundary:
                out.sum_phi_boundary += phi
            else:
                out.nveint += 1
                out.sum_phi_internal += phi
        return out

    # ------------------------------------------------------------------
    # recomputation and validation

    def recompute_stats(self) -> StatsCache:
        """All statistics from scratch, from edges, cell cycles and vertices."""
        V = self.vertices
        out = StatsCache()
        for (a, b) in self._edge_seg:
            out.total_edge_length += dist(V[a].pos, V[b].pos)
        for s in self.segments.values():
            if s.internal:
                out.nseint += 1
                if len(s.verts) == 2:
                    out.nnbseint += 1
                else:
                    out.nbseint += 1
        for c in self.cells.values():
            a = signed_area([V[v].pos for v in c.cycle])
            out.sum_sq_cell_area += a * a
        for vid, v in V.items():
            if v.corner:
                continue
            lines = [self.segments[s].line for s in v.through + v.ends]
            angs = [line_angle(l1, l2) for i, l1 in enumerate(lines) for l2 in lines[i + 1 :]]
            angs = [a for a in angs if a > 0.0]
            phi = min(angs) if angs else 0.0
            if v.boundary:
                out.sum_phi_boundary += phi
            else:
                out.nveint += 1
                out.sum_phi_internal += phi
        return out

    def validate(self, tol: Optional[Tolerance] = None, deep: bool = True) -> list[str]:
        """Check every structural invariant; returns violation messages (empty when valid)."""
        tol = tol or self.tol
        eps = tol.eps_len
        V, S, C = self.vertices, self.segments, self.cells
        bad: list[str] = []

        for vid, v in V.items():
            lines = [S[s].line for s in v.through + v.ends if s in S]
            for ln in lines:
                if abs(ln.offset(v.pos)) > 10 * eps:
                    bad.append(f"vertex {vid} off the line of an incident segment")
                    break
            on_bd = any(not S[s].internal for s in v.through + v.ends if s in S)
            if on_bd != v.boundary:
                bad.append(f"vertex {vid} boundary flag inconsistent")
            if v.corner:
                if v.through or len(v.ends) != 2 or any(S[s].internal for s in v.ends):
                    bad.append(f"corner {vid}: an internal segment ends at a vertex of the domain")
            else:
                if len(v.through) != 1 or len(v.ends) != 1:
                    bad.append(
                        f"vertex {vid} is not a T-vertex (through={len(v.through)}, ends={len(v.ends)})"
                    )
                elif S[v.through[0]].line.same_as(S[v.ends[0]].line, tol):
                    bad.append(f"vertex {vid}: incident segments are aligned")

        expected_edges = {}
        for sid, s in S.items():
            if len(s.verts) < 2:
                bad.append(f"segment {sid} has no edge")
                continue
            ts = [s.line.param(V[v].pos) for v in s.verts]
            if any(t1 - t0 <= eps for t0, t1 in zip(ts, ts[1:])):
                bad.append(f"segment {sid}: vertices not strictly ordered along its line")
            for k, v in enumerate(s.verts):
                lst = V[v].ends if k in (0, len(s.verts) - 1) else V[v].through
                if sid not in lst:
                    bad.append(f"segment {sid}: vertex {v} incidence not recorded")
            for a, b in zip(s.verts, s.verts[1:]):
                expected_edges[_ekey(a, b)] = sid
        if expected_edges != self._edge_seg:
            bad.append("edge map out of sync with segment vertex lists")

        segs = sorted(S.items(), key=lambda kv: kv[1].line.theta)
        for i, (si, a) in enumerate(segs):
            for sj, b in segs[i + 1 :]:
                if b.line.theta - a.line.theta > tol.eps_ang:
                    break
                if a.line.same_as(b.line, tol):
                    bad.append(f"segments {si} and {sj} are distinct but aligned")
        head = [kv for kv in segs if kv[1].line.theta <= tol.eps_ang]
        tail = [kv for kv in segs if kv[1].line.theta >= math.pi - tol.eps_ang]
        for si, a in head:
            for sj, b in tail:
                if si != sj and a.line.same_as(b.line, tol):
                    bad.append(f"segments {si} and {sj} are distinct but aligned")

        left_seen = 0
        total_area = 0.0
        total_per = 0.0
        for cid, c in C.items():
            cyc = c.cycle
            n = len(cyc)
            if n < 3:
                bad.append(f"cell {cid} has fewer than 3 vertices")
                continue
            for k in range(n):
                a, b = cyc[k], cyc[(k + 1) % n]
                if self._left.get((a, b)) != cid:
                    bad.append(f"cell {cid}: directed edge ({a},{b}) not mapped to it")
                if _ekey(a, b) not in self._edge_seg:
                    bad.append(f"cell {cid}: ({a},{b}) is not an edge")
            left_seen += n
            pts = [V[v].pos for v in cyc]
            area = signed_area(pts)
            per = sum(dist(pts[k - 1], pts[k]) for k in range(n))
            if area <= 0:
                bad.append(f"cell {cid} has non-positive area")
            for k in range(n):
                (x0, y0), (x1, y1), (x2, y2) = pts[k - 1], pts[k], pts[(k + 1) % n]
                cr = (x1 - x0) * (y2 - y1) - (y1 - y0) * (x2 - x1)
                if cr < -eps * (dist(pts[k - 1], pts[k]) + dist(pts[k], pts[(k + 1) % n])):
                    bad.append(f"cell {cid} is not convex at vertex {cyc[k]}")
                    break
            if not _close(c.area, area, 1e-9, self.domain.area) or not _close(
                c.perimeter, per, 1e-9, self.domain.perimeter
            ):
                bad.append(f"cell {cid}: cached area/perimeter stale")
            total_area += area
            total_per += per
        if left_seen != len(self._left):
            bad.append("directed-edge map has entries for no cell")
        for key, sid in self._edge_seg.items():
            a, b = key
            sides = (self._left.get((a, b)) is not None) + (self._left.get((b, a)) is not None)
            want = 2 if S[sid].internal else 1
            if sides != want:
                bad.append(f"edge {key} borders {sides} cells, expected {want}")

        if not _close(total_area, self.domain.area, 1e-9, 0.0):
            bad.append(f"cell areas sum to {total_area}, domain area is {self.domain.area}")

        fresh = self.recompute_stats()
        if not _close(total_per, 2 * fresh.total_edge_length - self.domain.perimeter, 1e-9, 0.0):
            bad.append("sum of cell perimeters differs from 2 l(T) - l(D)")
        nve, ned, nce = len(V), len(self._edge_seg), len(C)
        nd = self.domain.n_vertices
        if nve != nd + 2 * fresh.nseint:
            bad.append(f"vertex count {nve} != nve(D) + 2 nseint = {nd + 2 * fresh.nseint}")
        if ned != nd + 3 * fresh.nseint:
            bad.append(f"edge count {ned} != nve(D) + 3 nseint = {nd + 3 * fresh.nseint}")
        if nce != fresh.nseint + 1:
            bad.append(f"cell count {nce} != nseint + 1 = {fresh.nseint + 1}")
        if fresh.nnbseint + fresh.nbseint != fresh.nseint:
            bad.append("blocking + non-blocking != internal segments")

        scale = {
            "total_edge_length": self.domain.perimeter,
            "sum_sq_cell_area": self.domain.area ** 2,
            "sum_phi_internal": 1.0,
            "sum_phi_boundary": 1.0,
        }
        for name in _STAT_NAMES:
            got, want = getattr(self.stats, name), getattr(fresh, name)
            if name in _INT_STATS:
                if got != want:
                    bad.append(f"stats.{name} = {got}, recomputed {want}")
            elif not _close(got, want, 1e-8, scale[name]):
                bad.append(f"stats.{name} = {got!r}, recomputed {want!r}")
        nb = {s for s in S if S[s].internal and len(S[s].verts) == 2}
        bl = {s for s in S if S[s].internal and len(S[s].verts) > 2}
        if set(self.nonblocking) != nb or set(self.blocking) != bl:
            bad.append("blocking/non-blocking index out of sync")

        if deep:
            bad.extend(self._crossing_violations(tol))
        return bad

    def _crossing_violations(self, tol: Tolerance) -> list[str]:
        """Segments may only meet at shared vertices."""
        eps = tol.eps_len
        V = self.vertices
        items = []
        for sid, s in self.segments.items():
            t0 = s.line.param(V[s.verts[0]].pos)
            t1 = s.line.param(V[s.verts[-1]].pos)
            items.append((sid, s, t0, t1, set(s.verts)))
        bad = []
        for i, (si, a, a0, a1, av) in enumerate(items):
            for sj, b, b0, b1, bv in items[i + 1 :]:
                if abs(a.line.nx * b.line.ny - a.line.ny * b.line.nx) <= tol.eps_ang:
                    continue
                x = intersect(a.line, b.line)
                ta, tb = a.line.param(x), b.line.param(x)
                if a0 - eps <= ta <= a1 + eps and b0 - eps <= tb <= b1 + eps:
                    if not any(dist(V[v].pos, x) <= 10 * eps for v in av & bv):
                        bad.append(f"segments {si} and {sj} cross away from a shared vertex")
        return bad

    # ------------------------------------------------------------------
    # comparison

    def segment_geometry(self) -> list[tuple]:
        """Sorted ``(theta, p, t_start, t_end, interior params...)`` per internal segment."""
        out = []
        for s in self.segments.values():
            if not s.internal:
                continue
            ts = tuple(s.line.param(self.vertices[v].pos) for v in s.verts)
            out.append((s.line.theta, s.line.p) + ts)
        out.sort()
        return out

    def same_geometry(self, other: "TTessellation", tol: float = 1e-9) -> bool:
        a, b = self.segment_geometry(), other.segment_geometry()
        if len(a) != len(b):
            return False
        for x, y in zip(a, b):
            if len(x) != len(y) or any(abs(u - w) > tol for u, w in zip(x, y)):
                return False
        return True


def _close(a: float, b: float, rel: float, scale: float) -> bool:
    return abs(a - b) <= rel * (abs(b) + scale)


# ----------------------------------------------------------------------
# plain-text serialization
#
#   ttess 1
#   domain <n>
#   <x> <y>                      (n lines, counter-clockwise)
#   segments <m>
#   <theta> <p> <x1> <y1> <x2> <y2> <k> [<x> <y>]*k
#
# One line per internal segment: supporting line, both ends, then the k
# interior vertices where other segments abut it. Floats use repr() so a
# reload is exact.


def dumps(t: TTessellation) -> str:
    V = t.vertices
    out = ["ttess 1", f"domain {t.domain.n_vertices}"]
    out += [f"{x!r} {y!r}" for x, y in t.domain.vertices]
    rows = []
    for s in t.segments.values():
        if not s.internal:
            continue
        pts = [V[v].pos for v in s.verts]
        fields_ = [repr(s.line.theta), repr(s.line.p)]
        fields_ += [repr(c) for c in pts[0]] + [repr(c) for c in pts[-1]]
        fields_.append(str(len(pts) - 2))
        for pt in pts[1:-1]:
            fields_ += [repr(pt[0]), repr(pt[1])]
        rows.append(((s.line.theta, s.line.p), " ".join(fields_)))
    rows.sort()
    out.append(f"segments {len(rows)}")
    out += [r for _, r in rows]
    return "\n".join(out) + "\n"


class FormatError(ValueError):
    pass


def loads(text: str, tol: Optional[Tolerance] = None) -> TTessellation:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    pos = 0

    def take(lineno_hint: str) -> list[str]:
        nonlocal pos
        if pos >= len(lines):
            raise FormatError(f"unexpected end of input, expected {lineno_hint}")
        pos += 1
        return lines[pos - 1].split()

    head = take("header")
    if head != ["ttess", "1"]:
        raise FormatError(f"bad header {' '.join(head)!r}")
    tag = take("domain")
    if len(tag) != 2 or tag[0] != "domain":
        raise FormatError("expected 'domain <n>'")
    try:
        corners = [tuple(float(c) for c in take("domain vertex")) for _ in range(int(tag[1]))]
        tag = take("segments")
        if len(tag) != 2 or tag[0] != "segments":
            raise FormatError("expected 'segments <m>'")
        segs, interiors = [], []
        for k in range(int(tag[1])):
            row = take(f"segment {k}")
            theta, p, x1, y1, x2, y2 = (float(c) for c in row[:6])
            nint = int(row[6])
            vals = [float(c) for c in row[7:]]
            if len(vals) != 2 * nint:
                raise FormatError(f"segment {k}: expected {nint} interior points")
            segs.append((Line(theta, p), Point(x1, y1), Point(x2, y2)))
            interiors.append([Point(vals[2 * i], vals[2 * i + 1]) for i in range(nint)])
    except (ValueError, IndexError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"line {pos}: {exc}") from exc
    t = TTessellation.from_segments(Polygon(corners), segs, tol)
    eps = t.tol.eps_len
    by_line = {(s.line.theta, s.line.p): s for s in t.segments.values() if s.internal}
    for (line, _, _), pts in zip(segs, interiors):
        s = by_line[(line.theta, line.p)]
        got = [t.vertices[v].pos for v in s.verts[1:-1]]
        if len(got) != len(pts) or any(min(dist(g, q) for g in got) > 10 * eps for q in pts):
            raise FormatError(f"interior vertices of segment {line!r} do not match the arrangement")
    return t


def save(t: TTessellation, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(t))


def load(path, tol: Optional[Tolerance] = None) -> TTessellation:
    with open(path) as fh:
        return loads(fh.read(), tol)
