"""Correspondences, Hausdorff distance and rescaled-ball experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from . import geometry as geo
from .balls import BitRaster, distance_field
from .engine import CERT_TOL, build_region, map_sources, stitch_hop_cap
from .errors import PreconditionError
from .metric import MetricNode, canonical
from .norms import NormSpec
from .pattern import BoundingBox, Point2, SmockingPattern, distances_to_set


@dataclass
class FiniteMetricSample:
    labels: list
    dist: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] != len(self.labels):
            raise ValueError("distance matrix must be square and match the labels")
        if np.any(np.diag(d) != 0):
            raise ValueError("distance matrix needs a zero diagonal")
        if not np.array_equal(d, d.T):
            raise ValueError("distance matrix must be exactly symmetric")
        self.dist = d

    def __len__(self):
        return len(self.labels)

    def triangle_defect(self) -> float:
        """Largest d(i,k) - d(i,j) - d(j,k); <= 0 for a metric."""
        d = self.dist
        worst = -math.inf
        for j in range(len(d)):
            worst = max(worst, float(np.max(d - d[:, j][:, None] - d[j][None, :])))
        return worst

    @staticmethod
    def from_points(points, metric: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "FiniteMetricSample":
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        d = np.asarray(metric(pts, pts), dtype=float)
        d = np.minimum(d, d.T)
        np.fill_diagonal(d, 0.0)
        return FiniteMetricSample([tuple(p) for p in pts.tolist()], d)


@dataclass(frozen=True)
class Correspondence:
    pairs: tuple[tuple[int, int], ...]

    @staticmethod
    def identity(n: int) -> "Correspondence":
        return Correspondence(tuple((i, i) for i in range(n)))

    def reversed(self) -> "Correspondence":
        return Correspondence(tuple((b, a) for a, b in self.pairs))

    def covers(self, nx: int, ny: int) -> bool:
        xs = {a for a, _ in self.pairs}
        ys = {b for _, b in self.pairs}
        return xs == set(range(nx)) and ys == set(range(ny))


def correspondence_distortion(c: Correspondence, dx: FiniteMetricSample,
                              dy: FiniteMetricSample) -> float:
    """sup |d_X(x1, x2) - d_Y(y1, y2)| over pairs of related pairs."""
    if not c.pairs:
        raise PreconditionError("empty correspondence")
    p = np.asarray(c.pairs, dtype=np.int64)
    if p.min() < 0 or p[:, 0].max() >= len(dx) or p[:, 1].max() >= len(dy):
        raise PreconditionError("correspondence index out of range")
    if not c.covers(len(dx), len(dy)):
        raise PreconditionError("correspondence does not cover both samples")
    a = dx.dist[np.ix_(p[:, 0], p[:, 0])]
    b = dy.dist[np.ix_(p[:, 1], p[:, 1])]
    return float(np.max(np.abs(a - b)))


def gh_upper_bound(c: Correspondence, dx: FiniteMetricSample, dy: FiniteMetricSample) -> float:
    return 2.0 * correspondence_distortion(c, dx, dy)


def hausdorff_distance(a, b, metric: Callable | None = None) -> float:
    """max of the two directed sup-min distances between finite sets."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not len(a) or not len(b):
        raise ValueError("hausdorff distance needs nonempty sets")
    d = cdist(a.reshape(len(a), -1), b.reshape(len(b), -1)) if metric is None else np.asarray(metric(a, b))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def taxicab(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return cdist(np.asarray(a, float), np.asarray(b, float), "cityblock")


def norm_metric(spec: NormSpec) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    def metric(a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return spec(a[:, None, :] - b[None, :, :])
    return metric


# -- smocked distances between many points -------------------------------------------

def smocked_distance_matrix(pattern: SmockingPattern, points, D: float,
                            threads: int | None = None) -> np.ndarray:
    """All pairwise smocked distances among ``points``, all assumed <= D.

    Each point is a source once. A point source w only needs first hops to
    stitches within some radius c_w, provided every farther stitch J within D
    is reached by the capped search at cost <= |w - J|; this is checked per
    point; c_w is raised to the largest violation when the check fails.
    By symmetry the same radius limits the last hop into w from any source,
    so d(v, w) = min(|v - w|, min over J near w of d(v, J) + |J - w|).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if not pattern.templates or n == 0:
        return cdist(pts, pts)
    limit = D * (1 + 1e-12)
    nodes = [canonical(pattern, MetricNode.at(*p)) for p in pts]
    region = build_region(pattern, BoundingBox.around(pts), D, n_points=n)
    cap = stitch_hop_cap(pattern, D)
    src = np.array([region.set_point(k, nd.point) if nd.kind == "point"
                    else region.node_of(nd.stitch) for k, nd in enumerate(nodes)], dtype=np.int64)
    m = region.n_stitch
    sb = region.bbox[:m]
    depth = distances_to_set(pattern, pts)[0]

    def near(k, radius):
        x, y = pts[k]
        gx = np.maximum(np.maximum(sb[:, 0] - x, x - sb[:, 2]), 0.0)
        gy = np.maximum(np.maximum(sb[:, 1] - y, y - sb[:, 3]), 0.0)
        return np.flatnonzero(np.hypot(gx, gy) <= radius)

    # columns most likely needed: stitches within the initial last-hop radius
    guess = np.unique(np.concatenate(
        [[src[k]] if nodes[k].kind == "stitch" else near(k, depth[k] + cap) for k in range(n)]))

    def certify(k):
        i = int(src[k])
        if nodes[k].kind == "stitch":
            dist, _, _ = region.run(i, limit)
            return np.array([i]), np.zeros(1), None, dist[guess]
        cand = near(k, limit)
        w = region.distances_from(i, cand)
        c_w = float(w.min()) + cap
        for _ in range(2):
            dist, _, done = region.run(i, limit, src_cap=c_w)
            bad = (w > c_w) & (w <= limit) & (~done[cand] | (dist[cand] > w + CERT_TOL))
            if not bad.any():
                break
            c_w = float(w[bad].max())
        else:
            # raising to the largest violation is sound without another check
            dist = region.run(i, limit, src_cap=c_w)[0]
        keep = w <= c_w
        return cand[keep], w[keep], c_w, dist[guess]

    out = map_sources(certify, list(range(n)), threads)
    hoods = [(h[0], h[1]) for h in out]
    cols = np.unique(np.concatenate([h[0] for h in hoods]))
    if np.isin(cols, guess).all():
        pos = np.searchsorted(guess, cols)
        rows = np.array([h[3][pos] for h in out])
    else:
        def rerun(k):
            c_w = out[k][2]
            return region.run(int(src[k]), limit, src_cap=c_w)[0][cols]
        rows = np.array(map_sources(rerun, list(range(n)), threads))
    M = cdist(pts, pts)
    for k, (hood, w) in enumerate(hoods):
        via = (rows[:, np.searchsorted(cols, hood)] + w[None, :]).min(axis=1)
        np.minimum(M[:, k], via, out=M[:, k])
    M = np.minimum(M, M.T)
    np.fill_diagonal(M, 0.0)
    return M


# -- rescaled balls -----------------------------------------------------------------

@dataclass(frozen=True)
class RescaleRow:
    R: float
    epsilon: float
    samples: int
    bound: float = math.inf


@dataclass
class RescaleReport:
    rows: list[RescaleRow] = field(default_factory=list)
    K: float | None = None

    @property
    def decreasing(self) -> bool:
        eps = [row.epsilon for row in self.rows]
        return all(b < a for a, b in zip(eps, eps[1:]))

    @property
    def max_scaled(self) -> float:
        return max(row.epsilon * row.R for row in self.rows)

    @property
    def bounded(self) -> bool:
        """max of epsilon*R within twice the deviation constant."""
        return self.K is None or self.max_scaled <= 2 * self.K

    def to_csv(self) -> str:
        lines = ["R,epsilon,epsilon_times_R"]
        lines += [f"{_fmt(row.R)},{_fmt(row.epsilon)},{_fmt(row.epsilon * row.R)}"
                  for row in self.rows]
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def norm_halfwidth(spec: NormSpec) -> float:
    """Largest coordinate reached by the unit ball of ``spec``."""
    th = np.concatenate([np.linspace(0, 2 * np.pi, 7200, endpoint=False),
                         np.arange(8) * np.pi / 4])
    u = np.stack([np.cos(th), np.sin(th)], 1)
    return float(np.max(np.abs(u).max(1) / spec(u)))


def base_stitch(pattern: SmockingPattern) -> MetricNode:
    """The stitch nearest the origin."""
    from .pattern import distance_to_smocking_set
    return MetricNode.of(distance_to_smocking_set(pattern, (0.0, 0.0))[1])


def _sample_grid(S: float, grid: float) -> BitRaster:
    n = int(math.floor(2.0 / grid + 1e-9)) + 1
    if n < 8:
        raise PreconditionError(f"grid {grid} gives {n} samples per axis; at least 8 are needed")
    h = 2.0 * S / (n - 1)
    return BitRaster(Point2(-S - h / 2, -S - h / 2), h, n, n, np.zeros((n, n), dtype=bool))


def rescaled_ball_sample(pattern: SmockingPattern, spec: NormSpec, R: float, r: float,
                         grid: float) -> np.ndarray:
    """Grid points w of the square scaled to the norm ball of radius R*r with d(x0, w) <= R*r."""
    S = R * r * norm_halfwidth(spec)
    raster = _sample_grid(S, grid)
    X, Y = np.meshgrid(raster.xs(), raster.ys())
    if not pattern.templates:
        inside = spec(np.stack([X, Y], -1)) <= R * r
    else:
        fld = distance_field(pattern, base_stitch(pattern), R * r * (1 + 1e-12), raster)
        inside = fld <= R * r
    return np.stack([X[inside], Y[inside]], 1)


def rescaled_ball_distortion(pattern: SmockingPattern, spec: NormSpec, R: float, r: float,
                             grid: float, K: float | None = None,
                             threads: int | None = None) -> RescaleRow:
    """Distortion of w -> f(w) between the ball of radius R*r (metric scaled by 1/R)
    and the closed norm ball of radius r, on a grid sample.

    f(w) = w/R when F(w) <= R*r and is pulled radially onto the sphere of
    radius r otherwise. With K a uniform bound on |d - F| (origin on the base
    stitch) the true distortion is at most 3K/R, reported as ``bound``.
    """
    if not (R >= 1 and r > 0):
        raise ValueError("need R >= 1 and r > 0")
    pts = rescaled_ball_sample(pattern, spec, R, r, grid)
    M = smocked_distance_matrix(pattern, pts, 2 * R * r * (1 + 1e-9), threads) / R
    Fw = spec(pts)
    scale = np.where(Fw <= R * r, 1.0 / R, r / np.where(Fw > 0, Fw, 1.0))
    f = pts * scale[:, None]
    Y = norm_metric(spec)(f, f)
    eps = float(np.max(np.abs(M - Y))) if len(pts) else 0.0
    return RescaleRow(float(R), eps, len(pts), 3 * K / R if K is not None else math.inf)


def convergence_experiment(pattern: SmockingPattern, spec: NormSpec, scales: Sequence[float],
                           r: float, grid: float, K: float | None = None,
                           threads: int | None = None) -> RescaleReport:
    scales = [float(s) for s in scales]
    if not scales:
        raise ValueError("no scales given")
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly ascending")
    rows = [rescaled_ball_distortion(pattern, spec, R, r, grid, K, threads) for R in scales]
    return RescaleReport(rows, K)
