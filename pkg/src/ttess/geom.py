"""Planar primitives: points, lines in (angle, offset) coordinates, convex polygons.

A line is stored as ``(theta, p)`` with ``theta`` in ``[0, pi)`` the direction
angle and ``p`` the signed offset along the unit normal ``(-sin theta, cos theta)``.
Lines are weighted by the motion-invariant measure ``dtheta dp / pi``, under which
the mass of lines hitting a convex set is its perimeter divided by pi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Raised on degenerate geometric input."""


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Tolerance:
    eps_len: float = 1e-9
    eps_ang: float = 1e-9

    def __post_init__(self):
        if not (self.eps_len > 0 and self.eps_ang > 0):
            raise ValueError("tolerances must be positive")


class Line:
    """Undirected line ``{x : n . x = p}`` with cached direction and normal."""

    __slots__ = ("theta", "p", "dx", "dy", "nx", "ny")

    def __init__(self, theta: float, p: float):
        theta = float(theta) % math.pi
        if theta >= math.pi:  # fmod rounding can land exactly on pi
            theta = 0.0
        self.theta = theta
        self.p = float(p)
        self.dx = math.cos(theta)
        self.dy = math.sin(theta)
        self.nx = -self.dy
        self.ny = self.dx

    @classmethod
    def through(cls, a: Point, b: Point) -> "Line":
        """Line through two distinct points."""
        dx, dy = b[0] - a[0], b[1] - a[1]
        if dx == 0.0 and dy == 0.0:
            raise GeometryError("line through coincident points")
        theta = math.atan2(dy, dx) % math.pi
        line = cls(theta, 0.0)
        line.p = line.nx * a[0] + line.ny * a[1]
        return line

    def offset(self, pt) -> float:
        """Signed distance of ``pt`` to the line."""
        return self.nx * pt[0] + self.ny * pt[1] - self.p

    def param(self, pt) -> float:
        """Coordinate of the projection of ``pt`` along the line direction."""
        return self.dx * pt[0] + self.dy * pt[1]

    def at(self, t: float) -> Point:
        return Point(self.nx * self.p + self.dx * t, self.ny * self.p + self.dy * t)

    def same_as(self, other: "Line", tol: Tolerance) -> bool:
        """Whether both lines coincide up to tolerance (handles the theta=0/pi seam)."""
        dt = abs(self.theta - other.theta)
        if dt <= tol.eps_ang:
            return abs(self.p - other.p) <= tol.eps_len
        if math.pi - dt <= tol.eps_ang:
            return abs(self.p + other.p) <= tol.eps_len
        return False

    def as_tuple(self) -> tuple[float, float]:
        return (self.theta, self.p)

    def __eq__(self, other):
        return isinstance(other, Line) and self.theta == other.theta and self.p == other.p

    def __hash__(self):
        return hash((self.theta, self.p))

    def __repr__(self):
        return f"Line(theta={self.theta!r}, p={self.p!r})"


def intersect(l1: Line, l2: Line) -> Point:
    det = l1.nx * l2.ny - l1.ny * l2.nx
    if det == 0.0:
        raise GeometryError("parallel lines do not intersect")
    return Point((l1.p * l2.ny - l1.ny * l2.p) / det, (l1.nx * l2.p - l1.p * l2.nx) / det)


def dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def signed_area(pts: Sequence) -> float:
    s = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i - 1]
        x1, y1 = pts[i]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def perimeter(pts: Sequence) -> float:
    return sum(dist(pts[i - 1], pts[i]) for i in range(len(pts)))


class Polygon:
    """Convex polygon with counter-clockwise vertices.

    Clockwise input is reversed. Repeated or collinear corners are rejected since
    they would break the vertex/edge counting of the tessellation built on top.
    """

    def __init__(self, vertices: Sequence):
        pts = [Point(float(x), float(y)) for x, y in vertices]
        if len(pts) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        if not all(math.isfinite(c) for pt in pts for c in pt):
            raise GeometryError("polygon coordinates must be finite")
        area = signed_area(pts)
        if area < 0:
            pts.reverse()
            area = -area
        self.vertices: tuple[Point, ...] = tuple(pts)
        self.area = area
        self.perimeter = perimeter(pts)
        self.diameter = max(dist(a, b) for a in pts for b in pts)
        if area <= 1e-12 * self.diameter ** 2:
            raise GeometryError("degenerate polygon (zero area)")
        n = len(pts)
        for i in range(n):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % n]
            cr = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            if cr <= 1e-12 * self.diameter ** 2:
                raise GeometryError(f"polygon is not strictly convex at vertex {i}")

    @classmethod
    def square(cls, side: float = 1.0, origin=(0.0, 0.0)) -> "Polygon":
        x0, y0 = origin
        return cls([(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side)])

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def sides(self):
        n = len(self.vertices)
        return [(self.vertices[i], self.vertices[(i + 1) % n]) for i in range(n)]

    def default_tolerance(self) -> Tolerance:
        return Tolerance(eps_len=1e-9 * self.diameter, eps_ang=1e-9)

    def support(self, nx: float, ny: float) -> tuple[float, float]:
        """Range of ``n . x`` over the polygon."""
        vals = [nx * x + ny * y for x, y in self.vertices]
        return min(vals), max(vals)

    def contains(self, pt, eps: float = 0.0) -> bool:
        n = len(self.vertices)
        for i in range(n):
            a, b = self.vertices[i], self.vertices[(i + 1) % n]
            cr = (b[0] - a[0]) * (pt[1] - a[1]) - (b[1] - a[1]) * (pt[0] - a[0])
            if cr < -eps * dist(a, b):
                return False
        return True

    def __eq__(self, other):
        return isinstance(other, Polygon) and self.vertices == other.vertices

    def __repr__(self):
        return f"Polygon({[tuple(v) for v in self.vertices]!r})"


def haar_mass_hitting(poly: Polygon) -> float:
    """Mass of lines hitting a convex polygon: perimeter / pi."""
    if not isinstance(poly, Polygon):
        poly = Polygon(poly)
    return poly.perimeter / math.pi


def chord(line: Line, poly, tol: Optional[Tolerance] = None) -> Optional[tuple[Point, Point]]:
    """Intersection of a line with a convex polygon, or None if empty or a single point.

    Endpoints are ordered by increasing position along the line direction.
    """
    verts = poly.vertices if isinstance(poly, Polygon) else [Point(*v) for v in poly]
    eps = tol.eps_len if tol is not None else 1e-12
    ts = []
    n = len(verts)
    offs = [line.offset(v) for v in verts]
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        fa, fb = offs[i], offs[(i + 1) % n]
        if abs(fa) <= eps:
            ts.append(line.param(a))
        if (fa > eps and fb < -eps) or (fa < -eps and fb > eps):
            s = fa / (fa - fb)
            ts.append(line.param((a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]))))
    if len(ts) < 2:
        return None
    t0, t1 = min(ts), max(ts)
    if t1 - t0 <= eps:
        return None
    return line.at(t0), line.at(t1)


def acute_angle(dir1, dir2) -> float:
    """Acute angle in ``[0, pi/2]`` between two undirected directions."""
    n1 = math.hypot(dir1[0], dir1[1])
    n2 = math.hypot(dir2[0], dir2[1])
    if n1 == 0.0 or n2 == 0.0:
        raise GeometryError("zero direction vector")
    cr = abs(dir1[0] * dir2[1] - dir1[1] * dir2[0])
    dt = abs(dir1[0] * dir2[0] + dir1[1] * dir2[1])
    return math.atan2(cr, dt)


def line_angle(l1: Line, l2: Line) -> float:
    """Acute angle between two lines from their direction angles."""
    d = abs(l1.theta - l2.theta)
    return min(d, math.pi - d)


def collinear(a, b, c, tol: Tolerance) -> bool:
    """True iff ``c`` lies within ``eps_len`` of the line through ``a`` and ``b``."""
    ab = dist(a, b)
    if ab <= tol.eps_len:
        raise GeometryError("collinearity test needs distinct a and b")
    cr = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return abs(cr) / ab <= tol.eps_len


def random_line_hitting(verts: Sequence, rng: np.random.Generator) -> Line:
    """Draw a line from the invariant measure restricted to lines hitting a convex polygon.

    Lines are drawn uniformly among those hitting a bounding disc and rejected
    when they miss the polygon. Drawing the angle uniformly and the offset
    uniformly over the polygon's projection would bias the angle toward
    directions where the polygon is narrow.
    """
    xs = [v[0] for v in verts]
    ys = [v[1] for v in verts]
    cx = 0.5 * (min(xs) + max(xs))
    cy = 0.5 * (min(ys) + max(ys))
    r = max(math.hypot(x - cx, y - cy) for x, y in zip(xs, ys))
    while True:
        theta = math.pi * rng.random()
        off = r * (2.0 * rng.random() - 1.0)
        nx, ny = -math.sin(theta), math.cos(theta)
        proj = [nx * x + ny * y for x, y in zip(xs, ys)]
        p = nx * cx + ny * cy + off
        if min(proj) < p < max(proj):
            return Line(theta, p)
