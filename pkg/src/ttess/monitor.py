"""Chain diagnostics and summary statistics, with CSV and SVG export.

CSV schemas (header row included):

* trace: ``iteration, energy, acc_split, acc_merge, acc_flip`` (cumulative acceptance rates)
* survival: ``lag, fraction``
* lorenz: ``x, y``
* angles: ``bin_low, bin_high, count``
"""
from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .geom import Line, Tolerance, dist
from .tessellation import TTessellation

TRACE_HEADER = ("iteration", "energy", "acc_split", "acc_merge", "acc_flip")


class MonitorIOError(OSError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    energy: float
    acc_split: float
    acc_merge: float
    acc_flip: float
    proposed: Optional[tuple] = field(default=None, compare=False)
    accepted: Optional[tuple] = field(default=None, compare=False)

    @classmethod
    def from_state(cls, state) -> "TraceRecord":
        kinds = ("split", "merge", "flip")
        return cls(
            state.iteration,
            state.energy,
            *(state.acceptance_rate(k) for k in kinds),
            proposed=tuple(state.proposed[k] for k in kinds),
            accepted=tuple(state.accepted[k] for k in kinds),
        )


class TraceRecorder:
    """Chain callback collecting one :class:`TraceRecord` per call."""

    def __init__(self):
        self.records: list[TraceRecord] = []

    def __call__(self, state) -> None:
        rec = TraceRecord.from_state(state)
        if self.records and rec.iteration <= self.records[-1].iteration:
            raise ValueError("trace iterations must increase")
        self.records.append(rec)


class PatternRecorder:
    """Chain callback keeping the geometry of the internal segments.

    Each snapshot is a list of ``(line, end1, end2)`` triples.
    """

    def __init__(self):
        self.iterations: list[int] = []
        self.patterns: list[list[tuple]] = []

    def __call__(self, state) -> None:
        self.iterations.append(state.iteration)
        self.patterns.append(segment_snapshot(state.tessellation))


def segment_snapshot(t: TTessellation) -> list[tuple]:
    V = t.vertices
    out = []
    for sid in t.internal_segments():
        s = t.segments[sid]
        out.append((s.line, V[s.verts[0]].pos, V[s.verts[-1]].pos))
    return out


# ----------------------------------------------------------------------
# Lorenz curves


def lorenz_curve(areas: Sequence[float]) -> list[tuple]:
    """Points ``(i/n, share of the i smallest areas)`` for ``i = 1..n``."""
    a = np.sort(np.asarray(areas, dtype=float))
    if a.size == 0:
        raise ValueError("Lorenz curve of an empty list")
    if np.any(a <= 0):
        raise ValueError("areas must be positive")
    n = a.size
    cum = np.cumsum(a)
    ys = cum / cum[-1]
    out = [((i + 1) / n, float(ys[i])) for i in range(n)]
    out[-1] = (1.0, 1.0)
    return out


def lorenz_at(points: Sequence[tuple], x: float) -> float:
    """Piecewise-linear interpolation of a Lorenz curve, anchored at (0, 0)."""
    xs = [0.0] + [p[0] for p in points]
    ys = [0.0] + [p[1] for p in points]
    return float(np.interp(x, xs, ys))


def uniform_reference_curve(n_points: int = 101) -> list[tuple]:
    """Plotting aid: ``y = x**2``, the Lorenz curve of areas proportional to uniform order statistics."""
    xs = np.linspace(0.0, 1.0, n_points)
    return [(float(x), float(x * x)) for x in xs]


# ----------------------------------------------------------------------
# segment survival


@dataclass(frozen=True)
class SurvivalCurve:
    lags: list
    fraction_common: list


def _same_ends(a: tuple, b: tuple, eps: float) -> bool:
    (a0, a1), (b0, b1) = a, b
    if dist(a0, b0) <= eps and dist(a1, b1) <= eps:
        return True
    return dist(a0, b1) <= eps and dist(a1, b0) <= eps


def _count_common(a: Sequence[tuple], b: Sequence[tuple], tol: Tolerance) -> int:
    """Number of items of ``a`` matched in ``b``; items are ``(line, ends or None)``."""
    if not a or not b:
        return 0
    bs = sorted(b, key=lambda it: it[0].theta)
    thetas = [it[0].theta for it in bs]
    hits = 0
    for ln, ends in a:
        windows = [(ln.theta - tol.eps_ang, ln.theta + tol.eps_ang)]
        if ln.theta < tol.eps_ang:
            windows.append((math.pi - tol.eps_ang, math.pi))
        if ln.theta > math.pi - tol.eps_ang:
            windows.append((0.0, tol.eps_ang))
        found = False
        for lo, hi in windows:
            for k in range(bisect.bisect_left(thetas, lo), bisect.bisect_right(thetas, hi)):
                other, oends = bs[k]
                if ln.same_as(other, tol) and (ends is None or _same_ends(ends, oends, tol.eps_len)):
                    found = True
                    break
            if found:
                break
        hits += found
    return hits


def _normalize(snapshot, identity: str) -> list[tuple]:
    if isinstance(snapshot, TTessellation):
        snapshot = segment_snapshot(snapshot)
    out = []
    for item in snapshot:
        if isinstance(item, Line):
            if identity == "segment":
                raise ValueError("segment identity needs segment end points, got bare lines")
            out.append((item, None))
        else:
            line, p, q = item
            out.append((line, (p, q) if identity == "segment" else None))
    return out


def segment_survival(
    snapshots: Sequence,
    lags: Iterable[int],
    tol: Optional[Tolerance] = None,
    spacing: int = 1,
    identity: str = "segment",
) -> SurvivalCurve:
    """Mean fraction of the segments of ``T_t`` still present in ``T_{t+lag}``.

    ``snapshots`` are tessellations, :func:`segment_snapshot` lists or (with
    ``identity="line"``) lists of lines, taken every ``spacing`` iterations.
    With ``identity="segment"`` a segment survives when its line and both end
    points are unchanged; with ``identity="line"`` only the supporting line
    counts, so flips never kill a segment. ``lags`` are in iterations and must
    be multiples of ``spacing``. Terms with an empty ``T_t`` are skipped; a lag
    without any term gets NaN.
    """
    if identity not in ("segment", "line"):
        raise ValueError(f"identity must be 'segment' or 'line', got {identity!r}")
    if len(snapshots) < 2:
        raise ValueError("segment survival needs at least 2 snapshots")
    tol = tol or Tolerance()
    pats = [_normalize(s, identity) for s in snapshots]
    out_lags, out_frac = [], []
    for lag in lags:
        if lag < 0 or lag % spacing:
            raise ValueError(f"lag {lag} is not a non-negative multiple of the spacing {spacing}")
        d = lag // spacing
        vals = []
        for i in range(len(pats) - d):
            if pats[i]:
                vals.append(_count_common(pats[i], pats[i + d], tol) / len(pats[i]))
        out_lags.append(lag)
        out_frac.append(float(np.mean(vals)) if vals else float("nan"))
    return SurvivalCurve(out_lags, out_frac)


# ----------------------------------------------------------------------
# angles


@dataclass(frozen=True)
class AngleHistogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.counts) / self.counts.sum()


def angle_histogram(
    source: Union[TTessellation, Iterable], bins: int = 32, internal_only: bool = False
) -> AngleHistogram:
    """Histogram of vertex angles over ``(0, pi/2]``.

    ``source`` is a tessellation, an iterable of tessellations, or an iterable
    of angles.
    """
    if isinstance(source, TTessellation):
        source = [source]
    angles: list[float] = []
    for item in source:
        if isinstance(item, TTessellation):
            angles.extend(item.segment_angles(internal_only))
        else:
            angles.append(float(item))
    if not angles:
        raise ValueError("no vertex angles to histogram")
    counts, edges = np.histogram(angles, bins=bins, range=(0.0, math.pi / 2))
    return AngleHistogram(edges, counts)


# ----------------------------------------------------------------------
# CSV


def _write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    except OSError as exc:
        raise MonitorIOError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _read_rows(path, header: Sequence[str]) -> list[list[str]]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise MonitorIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows or tuple(rows[0]) != tuple(header):
        raise ValueError(f"{path}: expected header {','.join(header)}")
    return rows[1:]


def write_trace_csv(records: Iterable[TraceRecord], path) -> None:
    _write_rows(
        path,
        TRACE_HEADER,
        ((r.iteration, float(r.energy), float(r.acc_split), float(r.acc_merge), float(r.acc_flip)) for r in records),
    )


def read_trace_csv(path) -> list[TraceRecord]:
    return [
        TraceRecord(int(r[0]), float(r[1]), float(r[2]), float(r[3]), float(r[4]))
        for r in _read_rows(path, TRACE_HEADER)
    ]


def write_survival_csv(curve: SurvivalCurve, path) -> None:
    _write_rows(path, ("lag", "fraction"), zip(curve.lags, map(float, curve.fraction_common)))


def read_survival_csv(path) -> SurvivalCurve:
    rows = _read_rows(path, ("lag", "fraction"))
    return SurvivalCurve([int(r[0]) for r in rows], [float(r[1]) for r in rows])


def write_lorenz_csv(points: Iterable[tuple], path) -> None:
    _write_rows(path, ("x", "y"), ((float(x), float(y)) for x, y in points))


def read_lorenz_csv(path) -> list[tuple]:
    return [(float(r[0]), float(r[1])) for r in _read_rows(path, ("x", "y"))]


def write_angles_csv(hist: AngleHistogram, path) -> None:
    e = hist.edges
    _write_rows(
        path,
        ("bin_low", "bin_high", "count"),
        ((float(e[i]), float(e[i + 1]), int(c)) for i, c in enumerate(hist.counts)),
    )


def read_angles_csv(path) -> AngleHistogram:
    rows = _read_rows(path, ("bin_low", "bin_high", "count"))
    edges = [float(r[0]) for r in rows] + ([float(rows[-1][1])] if rows else [])
    return AngleHistogram(np.array(edges), np.array([int(r[2]) for r in rows]))


# ----------------------------------------------------------------------
# SVG

_STYLE = (
    "line{stroke-linecap:round;vector-effect:non-scaling-stroke}"
    ".boundary{stroke:#000;stroke-width:2}"
    ".blocking{stroke:#1f4e9c;stroke-width:1}"
    ".nonblocking{stroke:#c0392b;stroke-width:1}"
    ".plain{stroke:#000;stroke-width:1}"
)


def _fmt(x: float) -> str:
    s = f"{x:.9g}"
    return "0" if s == "-0" else s


def render_svg(t: TTessellation, path=None, color_segments: bool = True, size_px: int = 600) -> str:
    """SVG of all edges in domain coordinates (y pointing up).

    Edge classes: ``boundary``, and for internal edges ``blocking`` /
    ``nonblocking`` (or ``plain`` without coloring). Output depends only on
    the geometry, not on internal ids.
    """
    xs = [v[0] for v in t.domain.vertices]
    ys = [v[1] for v in t.domain.vertices]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    pad = 0.02 * max(x1 - x0, y1 - y0)
    w, h = x1 - x0 + 2 * pad, y1 - y0 + 2 * pad
    V = t.vertices
    items = []
    for (a, b), sid in t._edge_seg.items():
        seg = t.segments[sid]
        if not seg.internal:
            cls = "boundary"
        elif not color_segments:
            cls = "plain"
        else:
            cls = "nonblocking" if len(seg.verts) == 2 else "blocking"
        pa, pb = sorted((tuple(map(_fmt, V[a].pos)), tuple(map(_fmt, V[b].pos))))
        items.append((cls, pa, pb))
    items.sort()
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size_px}" '
        f'height="{int(round(size_px * h / w))}" viewBox="{_fmt(x0 - pad)} {_fmt(-(y1 + pad))} {_fmt(w)} {_fmt(h)}">',
        f"<style>{_STYLE}</style>",
        '<g transform="scale(1,-1)">',
    ]
    for cls, pa, pb in items:
        out.append(f'<line class="{cls}" x1="{pa[0]}" y1="{pa[1]}" x2="{pb[0]}" y2="{pb[1]}"/>')
    out += ["</g>", "</svg>", ""]
    text = "\n".join(out)
    if path is not None:
        p = Path(path)
        try:
            p.write_text(text)
        except OSError as exc:
            raise MonitorIOError(f"cannot write {p}: {exc.strerror or exc}") from exc
    return text
