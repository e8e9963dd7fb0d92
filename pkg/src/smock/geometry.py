"""Exact Euclidean distances between points and segments.

Segments are stored as rows ``(x1, y1, x2, y2)``. A segment whose endpoints
coincide is a point. The scalar kernels are compiled with numba so the
shortest-path engine can call them; ``*_np`` variants broadcast over arrays.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, vectorize


@njit(cache=True, nogil=True)
def point_segment(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    ll = dx * dx + dy * dy
    if ll == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / ll
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


@njit(cache=True, nogil=True)
def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


@njit(cache=True, nogil=True)
def segment_segment(ax, ay, bx, by, cx, cy, dx, dy):
    # A proper crossing gives 0; every other configuration (including touching
    # and collinear overlap) has its minimum at an endpoint of one segment.
    o1 = _orient(ax, ay, bx, by, cx, cy)
    o2 = _orient(ax, ay, bx, by, dx, dy)
    o3 = _orient(cx, cy, dx, dy, ax, ay)
    o4 = _orient(cx, cy, dx, dy, bx, by)
    if o1 * o2 < 0.0 and o3 * o4 < 0.0:
        return 0.0
    d = point_segment(ax, ay, cx, cy, dx, dy)
    d = min(d, point_segment(bx, by, cx, cy, dx, dy))
    d = min(d, point_segment(cx, cy, ax, ay, bx, by))
    d = min(d, point_segment(dx, dy, ax, ay, bx, by))
    return d


@njit(cache=True, nogil=True)
def set_distance(segs, i0, i1, j0, j1):
    """Distance between the segment unions segs[i0:i1] and segs[j0:j1]."""
    best = np.inf
    for i in range(i0, i1):
        for j in range(j0, j1):
            d = segment_segment(segs[i, 0], segs[i, 1], segs[i, 2], segs[i, 3],
                                segs[j, 0], segs[j, 1], segs[j, 2], segs[j, 3])
            if d < best:
                best = d
    return best


@vectorize(["float64(float64, float64, float64, float64, float64, float64)"],
           cache=True)
def point_segment_np(px, py, ax, ay, bx, by):
    return point_segment(px, py, ax, ay, bx, by)


@vectorize(["float64(float64, float64, float64, float64, "
            "float64, float64, float64, float64)"], cache=True)
def segment_segment_np(ax, ay, bx, by, cx, cy, dx, dy):
    return segment_segment(ax, ay, bx, by, cx, cy, dx, dy)


def points_to_segments(points: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Distance from each point to the union of ``segs``; shape (len(points),)."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    segs = np.asarray(segs, dtype=float).reshape(-1, 4)
    out = np.full(len(points), np.inf)
    for s in segs:
        np.minimum(out, point_segment_np(points[:, 0], points[:, 1], *s), out=out)
    return out


def union_distance(segs_a: np.ndarray, segs_b: np.ndarray) -> float:
    a = np.asarray(segs_a, dtype=float).reshape(-1, 4)
    b = np.asarray(segs_b, dtype=float).reshape(-1, 4)
    return float(set_distance(np.vstack([a, b]), 0, len(a), len(a), len(a) + len(b)))


def _project(px, py, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    ll = dx * dx + dy * dy
    if ll == 0.0:
        return ax, ay
    t = min(1.0, max(0.0, ((px - ax) * dx + (py - ay) * dy) / ll))
    return ax + t * dx, ay + t * dy


def _crossing(s, t):
    ax, ay, bx, by = s
    cx, cy, dx, dy = t
    o1 = _orient(ax, ay, bx, by, cx, cy)
    o2 = _orient(ax, ay, bx, by, dx, dy)
    o3 = _orient(cx, cy, dx, dy, ax, ay)
    o4 = _orient(cx, cy, dx, dy, bx, by)
    if o1 * o2 < 0.0 and o3 * o4 < 0.0:
        u = o1 / (o1 - o2)
        x, y = cx + u * (dx - cx), cy + u * (dy - cy)
        return (x, y)
    return None


def closest_pair(segs_a, segs_b, tie: float = 1e-12):
    """Closest points ``(p, q, dist)`` with p in union A, q in union B.

    Among pairs whose length is within ``tie`` of the minimum, the
    lexicographically smallest ``(p, q)`` coordinate tuple wins, so parallel
    segments produce a deterministic answer.
    """
    cands = []
    for s in np.asarray(segs_a, dtype=float).reshape(-1, 4):
        for t in np.asarray(segs_b, dtype=float).reshape(-1, 4):
            s = tuple(map(float, s))
            t = tuple(map(float, t))
            x = _crossing(s, t)
            if x is not None:
                cands.append((0.0, x, x))
                continue
            for p in (s[:2], s[2:]):
                q = _project(*p, *t)
                cands.append((math.hypot(p[0] - q[0], p[1] - q[1]), p, q))
            for q in (t[:2], t[2:]):
                p = _project(*q, *s)
                cands.append((math.hypot(p[0] - q[0], p[1] - q[1]), p, q))
    best = min(c[0] for c in cands)
    pq = min((c[1] + c[2]) for c in cands if c[0] <= best + tie)
    return (pq[0], pq[1]), (pq[2], pq[3]), best


def segments_hit_box(segs: np.ndarray, xmin, ymin, xmax, ymax) -> np.ndarray:
    """Boolean mask: does each segment meet the closed box (Liang-Barsky)."""
    segs = np.asarray(segs, dtype=float).reshape(-1, 4)
    x0, y0, x1, y1 = segs.T
    dx, dy = x1 - x0, y1 - y0
    lo = np.zeros(len(segs))
    hi = np.ones(len(segs))
    ok = np.ones(len(segs), dtype=bool)
    for p, q in ((-dx, x0 - xmin), (dx, xmax - x0), (-dy, y0 - ymin), (dy, ymax - y0)):
        par = p == 0
        ok &= ~(par & (q < 0))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(par, 0.0, q / np.where(par, 1.0, p))
        lo = np.where(~par & (p < 0), np.maximum(lo, r), lo)
        hi = np.where(~par & (p > 0), np.minimum(hi, r), hi)
    return ok & (lo <= hi)
