"""Rasterized ball preimages, frontier stitch sets and ball-growth checks.

Every raster samples a predicate at cell centres. The distance field of a
ball about ``c`` is

    d(c, x) = min( |x - c| (point centre only),  min_J  g_J + dist(x, J) )

over stitches J with g_J = d(c, J) < r, since the last hop of any chain ends
at x. Both sides of the exact identities below use the same primitives, so
they agree bit for bit rather than up to a band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import geometry as geo
from .engine import build_region, separation
from .errors import PreconditionError
from .metric import MetricNode, canonical, node_segments
from .pattern import BoundingBox, Point2, SmockingPattern, StitchId

TOL = 1e-9


@dataclass
class BitRaster:
    origin: Point2
    spacing: float
    width: int
    height: int
    bits: np.ndarray  # (height, width) bool; row j sits at y = origin.y + (j + .5) * spacing
    clipped: bool = False

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if self.bits.shape != (self.height, self.width):
            raise ValueError("bits shape does not match width/height")

    @staticmethod
    def empty(window: BoundingBox, spacing: float) -> "BitRaster":
        if not spacing > 0:
            raise ValueError("spacing must be positive")
        w = max(1, int(math.ceil((window.xmax - window.xmin) / spacing - 1e-9)))
        h = max(1, int(math.ceil((window.ymax - window.ymin) / spacing - 1e-9)))
        return BitRaster(Point2(float(window.xmin), float(window.ymin)), float(spacing),
                         w, h, np.zeros((h, w), dtype=bool))

    def like(self, bits: np.ndarray) -> "BitRaster":
        return BitRaster(self.origin, self.spacing, self.width, self.height, bits)

    def xs(self) -> np.ndarray:
        return self.origin.x + (np.arange(self.width) + 0.5) * self.spacing

    def ys(self) -> np.ndarray:
        return self.origin.y + (np.arange(self.height) + 0.5) * self.spacing

    @property
    def window(self) -> BoundingBox:
        return BoundingBox(self.origin.x, self.origin.y,
                           self.origin.x + self.width * self.spacing,
                           self.origin.y + self.height * self.spacing)

    def count(self) -> int:
        return int(self.bits.sum())

    def touches_border(self) -> bool:
        b = self.bits
        return bool(b[0].any() or b[-1].any() or b[:, 0].any() or b[:, -1].any())


@dataclass(frozen=True)
class FrontierSet:
    radius: float
    ids: tuple[StitchId, ...]
    distances: tuple[float, ...] = ()


# -- distance field --------------------------------------------------------------

@dataclass
class _Reach:
    """Stitches within a distance limit of a centre, with their distances."""
    center: MetricNode
    geometry: np.ndarray
    region: object
    nodes: np.ndarray
    dist: np.ndarray

    @property
    def ids(self) -> np.ndarray:
        return self.region.ids[self.nodes]


def _reach(pattern: SmockingPattern, center: MetricNode, limit: float, extra: float = 0.0,
           tol: float = TOL) -> _Reach:
    center = canonical(pattern, center, tol)
    geom = node_segments(pattern, center)
    if not pattern.templates:
        return _Reach(center, geom, None, np.zeros(0, np.int64), np.zeros(0))
    reg = build_region(pattern, BoundingBox.around(geom.reshape(-1, 2)), limit + extra, n_points=1)
    if center.kind == "point":
        src = reg.set_point(0, center.point)
    else:
        src = reg.node_of(center.stitch)
    dist, _, done = reg.run(src, limit)
    m = reg.n_stitch
    nodes = np.flatnonzero(done[:m] & (dist[:m] <= limit))
    return _Reach(center, geom, reg, nodes, dist[nodes])


def _block(raster: BitRaster, box: BoundingBox):
    sp = raster.spacing
    i0 = max(0, int(math.floor((box.xmin - raster.origin.x) / sp - 0.5)))
    i1 = min(raster.width, int(math.ceil((box.xmax - raster.origin.x) / sp - 0.5)) + 1)
    j0 = max(0, int(math.floor((box.ymin - raster.origin.y) / sp - 0.5)))
    j1 = min(raster.height, int(math.ceil((box.ymax - raster.origin.y) / sp - 0.5)) + 1)
    return slice(j0, max(j0, j1)), slice(i0, max(i0, i1))


def _segs_distance(X: np.ndarray, Y: np.ndarray, segs: np.ndarray) -> np.ndarray:
    out = np.full(np.broadcast(X, Y).shape, np.inf)
    for s in segs:
        np.minimum(out, geo.point_segment_np(X, Y, *s), out=out)
    return out


def _paint(raster: BitRaster, field_: np.ndarray, segs: np.ndarray, base: float, radius: float):
    """field = min(field, base + dist(x, segs)) on the cells that can be < base + radius."""
    xs, ys = raster.xs(), raster.ys()
    pts = segs.reshape(-1, 2)
    box = BoundingBox(pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max())
    rows, cols = _block(raster, box.inflate(radius))
    if rows.start >= rows.stop or cols.start >= cols.stop:
        return
    d = _segs_distance(xs[None, cols], ys[rows, None], segs)
    np.minimum(field_[rows, cols], base + d, out=field_[rows, cols])


def _ball_window(reach: _Reach, r: float, margin: float) -> BoundingBox:
    boxes = []
    pts = reach.geometry.reshape(-1, 2)
    boxes.append(BoundingBox.around(pts, r))
    reg = reach.region
    for k, g in zip(reach.nodes, reach.dist):
        if g < r:
            b = reg.bbox[k]
            boxes.append(BoundingBox(b[0], b[1], b[2], b[3]).inflate(r - g))
    return BoundingBox(min(b.xmin for b in boxes), min(b.ymin for b in boxes),
                       max(b.xmax for b in boxes), max(b.ymax for b in boxes)).inflate(margin)


def distance_field(pattern: SmockingPattern, center: MetricNode, r: float,
                   raster: BitRaster, tol: float = TOL, reach: _Reach | None = None) -> np.ndarray:
    """d(center, cell centre) where it is < r; +inf elsewhere."""
    reach = reach or _reach(pattern, center, r, tol=tol)
    fld = np.full((raster.height, raster.width), np.inf)
    if reach.center.kind == "point":
        c = reach.center.point
        fld = np.hypot(raster.xs()[None, :] - c.x, raster.ys()[:, None] - c.y)
    reg = reach.region
    for k, g in zip(reach.nodes, reach.dist):
        if g < r:
            _paint(raster, fld, reg.stitch_segments(k), float(g), r - float(g))
    return fld


def ball_raster(pattern: SmockingPattern, center: MetricNode, r: float,
                spacing: float | None = None, window: BoundingBox | None = None,
                tol: float = TOL) -> BitRaster:
    """Cells whose centre is at smocked distance < r from ``center``.

    ``clipped`` is set when the ball reaches the edge of a caller-supplied window.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    spacing = spacing or r / 256
    reach = _reach(pattern, center, r, tol=tol)
    if window is None:
        window = _ball_window(reach, r, 2 * spacing)
    raster = BitRaster.empty(window, spacing)
    raster.bits = distance_field(pattern, center, r, raster, tol, reach) < r
    raster.clipped = raster.touches_border()
    return raster


def tube_raster(segs: np.ndarray, radius: float, like: BitRaster) -> BitRaster:
    """Open tube of ``radius`` about a segment union, on the grid of ``like``."""
    d = _segs_distance(like.xs()[None, :], like.ys()[:, None], np.asarray(segs, float).reshape(-1, 4))
    return like.like(d < radius)


def disk_raster(c, radius: float, like: BitRaster) -> BitRaster:
    d = np.hypot(like.xs()[None, :] - c[0], like.ys()[:, None] - c[1])
    return like.like(d < radius)


def raster_dilate(raster: BitRaster, s: float) -> BitRaster:
    """Cells within Euclidean distance < s of a set cell (exact on cell centres)."""
    if s < 0:
        raise ValueError("dilation radius must be >= 0")
    if s == 0 or not raster.bits.any():
        return raster.like(raster.bits.copy())
    d = ndimage.distance_transform_edt(~raster.bits, sampling=raster.spacing)
    return raster.like(d < s)


# -- frontier and growth ---------------------------------------------------------------

def frontier_stitches(pattern: SmockingPattern, center: MetricNode, r: float,
                      tol: float = 1e-9) -> FrontierSet:
    """Stitches at distance r (within tol) from ``center``, sorted by id."""
    if not r > 0:
        raise ValueError("radius must be positive")
    reach = _reach(pattern, center, r + tol, tol=TOL)
    sel = np.abs(reach.dist - r) <= tol
    if reach.center.kind == "stitch":
        sel &= np.any(reach.ids != np.array(reach.center.stitch), axis=1)
    ids = reach.ids[sel]
    dist = reach.dist[sel]
    order = np.lexsort((ids[:, 2], ids[:, 1], ids[:, 0])) if len(ids) else []
    return FrontierSet(float(r), tuple(StitchId(*map(int, ids[k])) for k in order),
                       tuple(float(dist[k]) for k in order))


@dataclass(frozen=True)
class Margin:
    value: float          # min over outside stitches of their distance to the closed ball
    stitch: StitchId | None
    exact: bool           # False: no outside stitch closer than ``value`` was searched for


def outside_margin(pattern: SmockingPattern, center: MetricNode, r: float,
                   search: float, tol: float = 1e-9) -> Margin:
    """Distance from the stitches outside the closed ball preimage to that preimage.

    Only stitches within ``search`` of the preimage are examined; if none is
    found the returned value is ``search`` and ``exact`` is False.
    """
    reach = _reach(pattern, center, r + tol, extra=r + search, tol=TOL)
    reg = reach.region
    best, who = math.inf, None
    if reg is None:
        return Margin(search, None, False)
    m = reg.n_stitch
    inside = np.zeros(m, dtype=bool)
    inside[reach.nodes] = True
    if reach.center.kind == "stitch":
        inside[reg.node_of(reach.center.stitch)] = True
    outside = np.flatnonzero(~inside)
    ob = reg.bbox[outside]
    sources = [(int(k), float(g)) for k, g in zip(reach.nodes, reach.dist)]
    if reach.center.kind == "point":
        sources.append((reg.point_node(0), 0.0))
    for k, g in sources:
        rho = max(r - g, 0.0)
        b = reg.bbox[k]
        gx = np.maximum.reduce([ob[:, 0] - b[2], b[0] - ob[:, 2], np.zeros(len(ob))])
        gy = np.maximum.reduce([ob[:, 1] - b[3], b[1] - ob[:, 3], np.zeros(len(ob))])
        near = outside[np.hypot(gx, gy) <= rho + search]
        if not len(near):
            continue
        d = np.maximum(reg.distances_from(k, near) - rho, 0.0)
        j = int(np.argmin(d))
        if d[j] < best or (d[j] == best and tuple(reg.ids[near[j]]) < tuple(who)):
            best, who = float(d[j]), StitchId(*map(int, reg.ids[near[j]]))
    if best < search:
        return Margin(best, who, True)
    return Margin(search, None, False)


@dataclass
class GrowthReport:
    radius: float
    step: float
    frontier: FrontierSet
    margin: Margin
    lhs_cells: int
    rhs_cells: int
    mismatched: int
    unexplained: list = field(default_factory=list)
    raster: BitRaster | None = None

    @property
    def ok(self) -> bool:
        return not self.unexplained

    def to_json(self) -> dict:
        return {"radius": self.radius, "step": self.step,
                "frontier": [list(s) for s in self.frontier.ids],
                "margin": self.margin.value, "margin_exact": self.margin.exact,
                "lhs_cells": self.lhs_cells, "rhs_cells": self.rhs_cells,
                "mismatched": self.mismatched, "unexplained": self.unexplained[:50],
                "ok": self.ok}


def _boundary_band(bits: np.ndarray) -> np.ndarray:
    """Cells within one cell (Chebyshev) of a place where ``bits`` changes."""
    k = np.ones((3, 3), dtype=bool)
    grown = ndimage.binary_dilation(bits, k)
    shrunk = ndimage.binary_erosion(bits, k, border_value=1)
    return ndimage.binary_dilation(grown & ~shrunk, k)


def growth_check(pattern: SmockingPattern, center: MetricNode, r: float, s: float,
                 spacing: float | None = None, window: BoundingBox | None = None,
                 cells: int = 256, tol: float = 1e-9) -> GrowthReport:
    """Compare B_{r+s} with T_s(B_r) plus the s-tubes of the frontier stitches.

    Requires s not to exceed the margin to the nearest outside stitch. Cells
    that disagree are tolerated when they lie in the one-cell band around the
    boundary of B_{r+s}. The default grid has ``cells`` cells across the larger
    side of the window.
    """
    if not (r > 0 and s >= 0):
        raise ValueError("need r > 0 and s >= 0")
    delta = separation(pattern) if pattern.templates else math.inf
    search = s + (delta if math.isfinite(delta) else pattern.l_max + 1.0)
    margin = outside_margin(pattern, center, r, search, tol)
    if s > margin.value + 1e-12:
        raise PreconditionError(
            f"step {s} exceeds the outside margin {margin.value:.12g} set by stitch "
            f"{tuple(margin.stitch)}")
    frontier = frontier_stitches(pattern, center, r, tol)
    big = _reach(pattern, center, r + s, tol=TOL)
    if window is None:
        window = _ball_window(big, r + s, 0.0)
        ext = max(window.xmax - window.xmin, window.ymax - window.ymin)
        window = window.inflate(3 * ext / cells)
    if spacing is None:
        spacing = max(window.xmax - window.xmin, window.ymax - window.ymin) / cells
    grid = BitRaster.empty(window, spacing)
    lhs = distance_field(pattern, center, r + s, grid, tol, big) < r + s
    small = distance_field(pattern, center, r, grid, tol) < r
    rhs = raster_dilate(grid.like(small), s).bits.copy()
    for sid in frontier.ids:
        rhs |= tube_raster(pattern.stitch(sid).array, s, grid).bits
    diff = lhs ^ rhs
    bad = diff & ~_boundary_band(lhs)
    xs, ys = grid.xs(), grid.ys()
    unexplained = [{"x": float(xs[i]), "y": float(ys[j]), "lhs": bool(lhs[j, i])}
                   for j, i in zip(*np.nonzero(bad))]
    out = grid.like(lhs)
    return GrowthReport(float(r), float(s), frontier, margin, int(lhs.sum()), int(rhs.sum()),
                        int(diff.sum()), unexplained, out)


# -- shape probe for the plus pattern ------------------------------------------------------

@dataclass
class ShapeProbe:
    radius: float
    k: int
    inner_violations: int
    outer_violations: int
    samples: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.inner_violations == 0 and self.outer_violations == 0

    def to_json(self) -> dict:
        return {"radius": self.radius, "k": self.k, "inner_violations": self.inner_violations,
                "outer_violations": self.outer_violations, "samples": self.samples[:50],
                "ok": self.ok}


def ball_shape_probe_plus(pattern: SmockingPattern, r: float, cells: int = 256) -> ShapeProbe:
    """Check {|x|+|y| < 3(k-2)} within the ball about I_0 within {|x|+|y| < 3k}, k = ceil(r)."""
    if not r > 1:
        raise ValueError("the probe needs r > 1")
    k = int(math.ceil(r))
    half = 3 * k + 1
    window = BoundingBox(-half, -half, half, half)
    center = MetricNode.of(StitchId(0, 0, pattern.slots[0]))
    ball = ball_raster(pattern, center, r, spacing=2 * half / cells, window=window)
    taxi = np.abs(ball.xs())[None, :] + np.abs(ball.ys())[:, None]
    inner = taxi < 3 * (k - 2)
    outer = taxi < 3 * k
    miss_in = inner & ~ball.bits
    miss_out = ball.bits & ~outer
    xs, ys = ball.xs(), ball.ys()
    samples = [{"x": float(xs[i]), "y": float(ys[j]), "kind": "inner"}
               for j, i in zip(*np.nonzero(miss_in))][:25]
    samples += [{"x": float(xs[i]), "y": float(ys[j]), "kind": "outer"}
                for j, i in zip(*np.nonzero(miss_out))][:25]
    return ShapeProbe(float(r), k, int(miss_in.sum()), int(miss_out.sum()), samples)
