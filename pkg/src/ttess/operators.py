"""Split, merge and flip updates of a T-tessellation.

Every update is applied in place and returns an :class:`UpdateReceipt` that
carries the statistics before the update, their change, and the inverse
update. Applying the inverse restores the previous tessellation up to
renumbering of ids.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .geom import Line, Point, dist, intersect, random_line_hitting
from .tessellation import StatsCache, StatsDelta, TTessellation


class InapplicableUpdate(ValueError):
    """The update does not apply to the tessellation; it was left unchanged."""


@dataclass(frozen=True)
class Split:
    """Insert the chord of ``line`` across ``cell``.

    The chord ends at ``p`` on edge ``p_edge`` and at ``q`` on edge ``q_edge``;
    both edges are directed as in the cell's counter-clockwise cycle.
    """

    cell: int
    line: Line
    p_edge: tuple
    p: Point
    q_edge: tuple
    q: Point

    @property
    def length(self) -> float:
        return dist(self.p, self.q)


@dataclass(frozen=True)
class Merge:
    segment: int


@dataclass(frozen=True)
class Flip:
    """Drop the terminal edge at end ``end`` (0 or 1) of a blocking segment."""

    segment: int
    end: int


Update = Union[Split, Merge, Flip]


@dataclass
class UpdateReceipt:
    update: Update
    inverse: Update
    before: StatsCache
    delta: StatsDelta
    touched_cells: tuple
    touched_segments: tuple
    xi: Optional[int] = None
    removed_length: float = 0.0
    added_length: float = 0.0

    @property
    def kind(self) -> str:
        return type(self.update).__name__.lower()


@dataclass(frozen=True)
class FlipPreview:
    segment: int
    v: int  # vertex removed with the terminal edge
    w: int  # inner end of the terminal edge
    blocked: int  # segment ending at w, extended by the flip
    host_v: int  # segment carrying v
    cell_above: int  # cell on the blocked segment's side of the terminal edge
    cell_below: int  # cell the extension runs through
    target: int  # segment hit by the extension
    x: Point
    removed_length: float
    added_length: float


# ----------------------------------------------------------------------
# enumeration and proposal densities


def enumerate_merges(t: TTessellation) -> list[Merge]:
    return [Merge(s) for s in t.nonblocking]


def enumerate_flips(t: TTessellation) -> list[Flip]:
    return [Flip(s, e) for s in t.blocking for e in (0, 1)]


def split_density_uniform(t: TTessellation) -> float:
    return math.pi / (2.0 * t.stats.total_edge_length - t.domain.perimeter)


def split_total_mass(t: TTessellation) -> float:
    """Mass of the split measure: sum of cell perimeters over pi."""
    return (2.0 * t.stats.total_edge_length - t.domain.perimeter) / math.pi


def merge_pmf_uniform(t: TTessellation) -> float:
    if t.stats.nnbseint == 0:
        raise ValueError("no merge applicable")
    return 1.0 / t.stats.nnbseint


def flip_pmf_uniform(t: TTessellation) -> float:
    if t.stats.nbseint == 0:
        raise ValueError("no flip applicable")
    return 1.0 / (2 * t.stats.nbseint)


def xi(t: TTessellation, s: Split) -> int:
    """Number of internal non-blocking segments the chord's ends land on."""
    hosts = {t.edge_segment(*s.p_edge), t.edge_segment(*s.q_edge)}
    return sum(1 for h in hosts if h in t.nonblocking)


# ----------------------------------------------------------------------
# split proposals


def split_chord(t: TTessellation, cid: int, line: Line) -> Optional[Split]:
    """The split of cell ``cid`` by ``line``, or None if it misses or is degenerate.

    Degenerate means: the line passes within tolerance of a vertex, an end
    falls within tolerance of a vertex, or the line is an existing segment's.
    """
    eps = t.tol.eps_len
    V = t.vertices
    cyc = t.cells[cid].cycle
    n = len(cyc)
    offs = [line.offset(V[v].pos) for v in cyc]
    crossings = []
    for k in range(n):
        fa = offs[k]
        if -eps <= fa <= eps:
            return None
        fb = offs[(k + 1) % n]
        if (fa > 0) != (fb > 0):
            crossings.append((cyc[k], cyc[(k + 1) % n]))
    if len(crossings) != 2:
        return None
    ends = []
    for a, b in crossings:
        host = t.segments[t.edge_segment(a, b)]
        if abs(line.nx * host.line.ny - line.ny * host.line.nx) <= t.tol.eps_ang:
            return None
        pt = intersect(line, host.line)
        if dist(pt, V[a].pos) <= eps or dist(pt, V[b].pos) <= eps:
            return None
        ends.append(pt)
    for sid in t.nonblocking:
        if line.same_as(t.segments[sid].line, t.tol):
            return None
    for sid in t.blocking:
        if line.same_as(t.segments[sid].line, t.tol):
            return None
    return Split(cid, line, crossings[0], ends[0], crossings[1], ends[1])


def cell_containing(t: TTessellation, pt) -> int:
    """Id of a cell whose closure contains ``pt``."""
    V = t.vertices
    for cid, c in t.cells.items():
        cyc = c.cycle
        inside = True
        for k in range(len(cyc)):
            a, b = V[cyc[k - 1]].pos, V[cyc[k]].pos
            if (b[0] - a[0]) * (pt[1] - a[1]) - (b[1] - a[1]) * (pt[0] - a[0]) < -t.tol.eps_len * dist(a, b):
                inside = False
                break
        if inside:
            return cid
    raise ValueError(f"point {tuple(pt)} is outside the domain")


def split_through(t: TTessellation, a, b) -> Split:
    """Split of the cell containing the midpoint of ``a`` and ``b`` by the line through them."""
    line = Line.through(Point(*a), Point(*b))
    cid = cell_containing(t, ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2))
    s = split_chord(t, cid, line)
    if s is None:
        raise InapplicableUpdate("degenerate split")
    return s


def sample_uniform_split(t: TTessellation, rng: np.random.Generator) -> Split:
    """Uniform split: cell with probability proportional to perimeter, then a uniform line hitting it.

    Degenerate chords have probability zero and are redrawn.
    """
    cells = list(t.cells.items())
    total = 0.0
    for _, c in cells:
        total += c.perimeter
    V = t.vertices
    while True:
        r = rng.random() * total
        cid, cell = cells[-1]
        acc = 0.0
        for k, c in cells:
            acc += c.perimeter
            if r < acc:
                cid, cell = k, c
                break
        line = random_line_hitting([V[v].pos for v in cell.cycle], rng)
        s = split_chord(t, cid, line)
        if s is not None:
            return s


def sample_uniform_merge(t: TTessellation, rng: np.random.Generator) -> Merge:
    n = len(t.nonblocking)
    if n == 0:
        raise InapplicableUpdate("no merge applicable")
    return Merge(t.nonblocking[int(rng.random() * n)])


def sample_uniform_flip(t: TTessellation, rng: np.random.Generator) -> Flip:
    n = len(t.blocking)
    if n == 0:
        raise InapplicableUpdate("no flip applicable")
    k = int(rng.random() * 2 * n)
    return Flip(t.blocking[k >> 1], k & 1)


# ----------------------------------------------------------------------
# application


def apply(t: TTessellation, u: Update) -> UpdateReceipt:
    """Apply ``u`` in place. Raises :class:`InapplicableUpdate` and leaves ``t`` intact otherwise."""
    if isinstance(u, Split):
        return _apply_split(t, u)
    if isinstance(u, Merge):
        return _apply_merge(t, u)
    if isinstance(u, Flip):
        return _apply_flip(t, u)
    raise TypeError(f"not an update: {u!r}")


def _oriented(t: TTessellation, a: int, b: int, cid: int) -> tuple:
    return (a, b) if t.left_cell(a, b) == cid else (b, a)


def _apply_split(t: TTessellation, s: Split) -> UpdateReceipt:
    eps = t.tol.eps_len
    cid = s.cell
    if cid not in t.cells:
        raise InapplicableUpdate(f"no cell {cid}")
    for (a, b), pt in ((s.p_edge, s.p), (s.q_edge, s.q)):
        if t.left_cell(a, b) != cid:
            raise InapplicableUpdate(f"({a},{b}) is not an edge of cell {cid}")
        pa, pb = t.vertices[a].pos, t.vertices[b].pos
        if dist(pt, pa) <= eps or dist(pt, pb) <= eps or abs(dist(pa, pt) + dist(pt, pb) - dist(pa, pb)) > 10 * eps:
            raise InapplicableUpdate("chord end not strictly inside its edge")
    hp = t.edge_segment(*s.p_edge)
    hq = t.edge_segment(*s.q_edge)
    if hp == hq:
        raise InapplicableUpdate("both chord ends on one segment")
    for seg in t.segments.values():
        if seg.line.same_as(s.line, t.tol):
            raise InapplicableUpdate("split line coincides with an existing segment")

    before = t.stats.copy()
    n_xi = (hp in t.nonblocking) + (hq in t.nonblocking)
    old = t._contribution((cid,), (hp, hq), ())

    sid = t._new_segment(s.line, [], True)
    ids = []
    for (a, b), pt, host in ((s.p_edge, s.p, hp), (s.q_edge, s.q, hq)):
        vid = t._new_vertex(pt, boundary=not t.segments[host].internal)
        vx = t.vertices[vid]
        vx.through.append(host)
        vx.ends.append(sid)
        t._insert_vertex(a, b, vid)
        ids.append(vid)
    p, q = ids
    if s.line.param(s.p) <= s.line.param(s.q):
        t.segments[sid].verts = [p, q]
    else:
        t.segments[sid].verts = [q, p]
    new = t._add_edge(p, q, cid, sid)
    for h in (hp, hq, sid):
        t._classify(h)

    delta = t._contribution((cid, new), (hp, hq, sid), (p, q)).minus(old)
    t.stats.add(delta)
    return UpdateReceipt(
        s, Merge(sid), before, delta, (cid, new), (hp, hq, sid), xi=n_xi, added_length=s.length
    )


def _apply_merge(t: TTessellation, m: Merge) -> UpdateReceipt:
    sid = m.segment
    seg = t.segments.get(sid)
    if seg is None or not seg.internal or len(seg.verts) != 2:
        raise InapplicableUpdate(f"segment {sid} is not an internal non-blocking segment")
    V = t.vertices
    p, q = seg.verts
    hp, hq = V[p].through[0], V[q].through[0]
    c1, c2 = t.left_cell(p, q), t.left_cell(q, p)
    pp, qp = V[p].pos, V[q].pos
    before = t.stats.copy()
    old = t._contribution((c1, c2), (sid, hp, hq), (p, q))

    cid = t._remove_edge(p, q)
    del t.segments[sid]
    ap, bp = t._remove_flat_vertex(p)
    aq, bq = t._remove_flat_vertex(q)
    for h in (sid, hp, hq):
        t._classify(h)

    delta = t._contribution((cid,), (hp, hq), ()).minus(old)
    t.stats.add(delta)
    inv = Split(cid, seg.line, _oriented(t, ap, bp, cid), pp, _oriented(t, aq, bq, cid), qp)
    return UpdateReceipt(m, inv, before, delta, (cid,), (hp, hq), removed_length=dist(pp, qp))


def preview_flip(t: TTessellation, f: Flip) -> FlipPreview:
    """Geometry of a flip without applying it."""
    seg = t.segments.get(f.segment)
    if seg is None or not seg.internal or len(seg.verts) < 3:
        raise InapplicableUpdate(f"segment {f.segment} is not an internal blocking segment")
    if f.end not in (0, 1):
        raise InapplicableUpdate("flip end must be 0 or 1")
    V = t.vertices
    S = t.segments
    if f.end == 0:
        v, w = seg.verts[0], seg.verts[1]
    else:
        v, w = seg.verts[-1], seg.verts[-2]
    u = V[w].ends[0]
    host_v = V[v].through[0]
    useg = S[u]
    y = useg.verts[1] if useg.verts[0] == w else useg.verts[-2]
    pw, pv, py = V[w].pos, V[v].pos, V[y].pos
    cr = (pv[0] - pw[0]) * (py[1] - pw[1]) - (pv[1] - pw[1]) * (py[0] - pw[0])
    if cr > 0:
        above, below = t.left_cell(w, v), t.left_cell(v, w)
    else:
        above, below = t.left_cell(v, w), t.left_cell(w, v)
    ln = useg.line
    sgn = 1.0 if (pw[0] - py[0]) * ln.dx + (pw[1] - py[1]) * ln.dy > 0 else -1.0
    eps = t.tol.eps_len
    cyc = t.cells[below].cycle
    n = len(cyc)
    hit = None
    for k in range(n):
        a, b = cyc[k], cyc[(k + 1) % n]
        if a == w or b == w:
            continue
        fa, fb = ln.offset(V[a].pos), ln.offset(V[b].pos)
        if abs(fa) <= eps or abs(fb) <= eps:
            raise InapplicableUpdate("flip extension runs into an existing vertex")
        if (fa > 0) != (fb > 0):
            ta, tb = ln.param(V[a].pos), ln.param(V[b].pos)
            tx = ta + fa / (fa - fb) * (tb - ta)
            if sgn * (tx - ln.param(pw)) > 0:
                hit = (a, b)
    if hit is None:
        raise InapplicableUpdate("flip extension found no obstacle")
    target = t.edge_segment(*hit)
    x = intersect(ln, S[target].line)
    if dist(x, V[hit[0]].pos) <= eps or dist(x, V[hit[1]].pos) <= eps:
        raise InapplicableUpdate("flip extension runs into an existing vertex")
    return FlipPreview(f.segment, v, w, u, host_v, above, below, target, x, dist(pw, pv), dist(pw, x))


def _apply_flip(t: TTessellation, f: Flip) -> UpdateReceipt:
    pv = preview_flip(t, f)
    V, S = t.vertices, t.segments
    s, v, w, u, tgt = pv.segment, pv.v, pv.w, pv.blocked, pv.target
    segs = tuple(dict.fromkeys((s, u, pv.host_v, tgt)))
    before = t.stats.copy()
    old = t._contribution((pv.cell_above, pv.cell_below), segs, (v, w))

    m = t._remove_edge(w, v)
    sv = S[s].verts
    if sv[0] == v:
        del sv[0]
    else:
        sv.pop()
    t._remove_flat_vertex(v)
    vw = V[w]
    vw.through = [u]
    vw.ends = [s]

    tl = S[tgt].line
    tx = tl.param(pv.x)
    tverts = S[tgt].verts
    a = b = None
    for i in range(len(tverts) - 1):
        t0, t1 = tl.param(V[tverts[i]].pos), tl.param(V[tverts[i + 1]].pos)
        if t0 < tx < t1:
            a, b = tverts[i], tverts[i + 1]
            break
    if a is None:  # cannot happen once preview_flip succeeded
        raise RuntimeError("flip target edge not found")
    x = t._new_vertex(pv.x, boundary=not S[tgt].internal)
    V[x].through.append(tgt)
    V[x].ends.append(u)
    t._insert_vertex(a, b, x)
    uv = S[u].verts
    if uv[0] == w:
        uv.insert(0, x)
        inv_end = 0
    else:
        uv.append(x)
        inv_end = 1
    new = t._add_edge(w, x, m, u)
    for h in segs:
        t._classify(h)

    delta = t._contribution((m, new), segs, (w, x)).minus(old)
    t.stats.add(delta)
    return UpdateReceipt(
        f,
        Flip(u, inv_end),
        before,
        delta,
        (m, new),
        segs,
        removed_length=pv.removed_length,
        added_length=pv.added_length,
    )


# ----------------------------------------------------------------------
# constructive path to the empty tessellation


def empty_greedily(t: TTessellation, max_steps: Optional[int] = None) -> list[UpdateReceipt]:
    """Merge non-blocking segments; when none is left, flip the blocking segment with fewest edges.

    Returns the receipts of the updates applied, in order. Raises RuntimeError
    when ``max_steps`` is exceeded.
    """
    done = []
    while t.stats.nseint:
        if max_steps is not None and len(done) >= max_steps:
            raise RuntimeError(f"tessellation not emptied within {max_steps} steps")
        if len(t.nonblocking):
            done.append(apply(t, Merge(t.nonblocking[0])))
            continue
        sid = min(t.blocking, key=lambda k: len(t.segments[k].verts))
        try:
            done.append(apply(t, Flip(sid, 1)))
        except InapplicableUpdate:
            done.append(apply(t, Flip(sid, 0)))
    return done
