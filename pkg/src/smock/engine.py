"""Shortest paths over stitch graphs.

Why a graph computes the smocked distance: in a chain v -> I_1 -> ... -> I_k
-> w the entry and exit points on each stitch are chosen independently, so
the cheapest chain through a fixed stitch sequence costs the sum of the
set-to-set distances between consecutive members. Minimizing over sequences is
then a shortest path on the graph whose nodes are stitches (plus the two
endpoints) and whose edge weights are exact Euclidean set distances.

Two facts keep the graph finite and sparse:

* Region. A chain of cost H starting at v makes at most H/delta + 1 stitch
  visits, each teleport moving at most L_max, so every stitch it touches lies
  within ``H*(1 + L_max/delta) + L_max`` of v.
* Hop cap. For periodic patterns we find a cap c such that every stitch pair
  with set distance w in (c, D] is already joined by a path of hops <= c with
  cost <= w. Long edges can then be dropped without changing any distance up
  to D. The cap is computed once per pattern and scale by running capped
  searches from each template's base stitch (lattice translation covers the
  rest), raising c until no undominated edge is left. Patterns with open
  corridors (ribbed) end up with c ~ D, which just means no pruning.

Point endpoints are never capped: a point source scans every stitch within
the search limit, and a point target is checked against every settled node.
"""

from __future__ import annotations

import math
import weakref
from concurrent.futures import ThreadPoolExecutor
from heapq import heappop, heappush

import numpy as np
from numba import njit

from . import geometry as geo
from .config import thread_count
from .pattern import BoundingBox, SmockingPattern, StitchId, _all_finite, min_separation

CERT_TOL = 1e-10
CAP_ROUNDS = 6


@njit(cache=True, nogil=True)
def _build_grid(bbox, n, x0, y0, cs, nx, ny):
    counts = np.zeros(nx * ny + 1, dtype=np.int64)
    for i in range(n):
        ia = max(0, min(nx - 1, int((bbox[i, 0] - x0) / cs)))
        ib = max(0, min(nx - 1, int((bbox[i, 2] - x0) / cs)))
        ja = max(0, min(ny - 1, int((bbox[i, 1] - y0) / cs)))
        jb = max(0, min(ny - 1, int((bbox[i, 3] - y0) / cs)))
        for a in range(ia, ib + 1):
            for b in range(ja, jb + 1):
                counts[a * ny + b + 1] += 1
    start = np.cumsum(counts)
    fill = start[:-1].copy()
    items = np.empty(start[-1], dtype=np.int64)
    for i in range(n):
        ia = max(0, min(nx - 1, int((bbox[i, 0] - x0) / cs)))
        ib = max(0, min(nx - 1, int((bbox[i, 2] - x0) / cs)))
        ja = max(0, min(ny - 1, int((bbox[i, 1] - y0) / cs)))
        jb = max(0, min(ny - 1, int((bbox[i, 3] - y0) / cs)))
        for a in range(ia, ib + 1):
            for b in range(ja, jb + 1):
                items[fill[a * ny + b]] = i
                fill[a * ny + b] += 1
    return start, items


@njit(cache=True, nogil=True)
def _node_dist(segs, ptr, u, v):
    return geo.set_distance(segs, ptr[u], ptr[u + 1], ptr[v], ptr[v + 1])


@njit(cache=True, nogil=True)
def _sssp(segs, ptr, bbox, gstart, gitems, x0, y0, cs, nx, ny,
          cap, src, src_cap, target, limit, watch):
    """Lazy Dijkstra; edges are discovered through the grid at settle time.

    From a settled node u only nodes within min(U - g(u), cap(u)) are
    relaxed, where U is the search limit (tightened to the target's tentative
    distance when a target is given). ``watch`` nodes are checked from every
    settled node regardless of caps and grid membership.
    """
    n = ptr.size - 1
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    stamp = np.full(n, -1, dtype=np.int64)
    dist[src] = 0.0
    heap = [(0.0, src)]
    U = limit
    while len(heap) > 0:
        g, u = heappop(heap)
        if done[u] or g > dist[u]:
            continue
        if g > U:
            break
        done[u] = True
        if u == target:
            break
        rad = U - g
        c = src_cap if u == src else cap[u]
        if c < rad:
            rad = c
        ia = max(0, int((bbox[u, 0] - rad - x0) / cs))
        ib = min(nx - 1, int((bbox[u, 2] + rad - x0) / cs))
        ja = max(0, int((bbox[u, 1] - rad - y0) / cs))
        jb = min(ny - 1, int((bbox[u, 3] + rad - y0) / cs))
        for a in range(ia, ib + 1):
            for b in range(ja, jb + 1):
                cell = a * ny + b
                for k in range(gstart[cell], gstart[cell + 1]):
                    v = gitems[k]
                    if done[v] or stamp[v] == u:
                        continue
                    stamp[v] = u
                    gx = max(bbox[v, 0] - bbox[u, 2], bbox[u, 0] - bbox[v, 2], 0.0)
                    gy = max(bbox[v, 1] - bbox[u, 3], bbox[u, 1] - bbox[v, 3], 0.0)
                    if gx * gx + gy * gy > rad * rad:
                        continue
                    w = _node_dist(segs, ptr, u, v)
                    if w > rad:
                        continue
                    nd = g + w
                    if nd < dist[v] and nd <= U:
                        dist[v] = nd
                        pred[v] = u
                        heappush(heap, (nd, v))
                        if v == target:
                            U = nd
        for i in range(watch.size):
            v = watch[i]
            if done[v]:
                continue
            nd = g + _node_dist(segs, ptr, u, v)
            if nd < dist[v] and nd <= U:
                dist[v] = nd
                pred[v] = u
                heappush(heap, (nd, v))
                if v == target:
                    U = nd
    return dist, pred, done


def reach_radius(pattern: SmockingPattern, D: float) -> float:
    """Radius about a source containing every stitch of any chain of cost <= D."""
    if not pattern.templates:
        return 0.0
    delta = separation(pattern)
    L = pattern.l_max
    if math.isinf(delta):
        return D + L
    return D * (1.0 + L / delta) + L


_sep_cache: "weakref.WeakKeyDictionary[SmockingPattern, float]" = weakref.WeakKeyDictionary()
_cap_cache: "weakref.WeakKeyDictionary[SmockingPattern, dict]" = weakref.WeakKeyDictionary()


def separation(pattern: SmockingPattern) -> float:
    if pattern not in _sep_cache:
        if len(pattern.templates) < 2 and pattern.basis is None:
            _sep_cache[pattern] = math.inf
        else:
            _sep_cache[pattern] = min_separation(pattern)[0]
    return _sep_cache[pattern]


class Region:
    """Stitches meeting a box, plus ``n_points`` reusable point nodes.

    Stitch nodes come first in id order; point nodes follow and are kept out
    of the spatial grid, so they are only reachable as sources or watches.
    """

    def __init__(self, pattern: SmockingPattern, box: BoundingBox, n_points: int = 0,
                 cap: float = math.inf):
        self.pattern = pattern
        if pattern.basis is None:
            ids, ptr, segs = _all_finite(pattern) if pattern.templates else (
                np.zeros((0, 3), np.int64), np.zeros(1, np.int64), np.zeros((0, 4)))
        else:
            ids, ptr, segs = pattern.enumerate(box)
        self.ids = ids
        self.n_stitch = len(ids)
        self.n = self.n_stitch + n_points
        self.ptr = np.concatenate([ptr, ptr[-1] + 1 + np.arange(n_points)]).astype(np.int64)
        self.segs = np.ascontiguousarray(np.vstack([segs, np.zeros((n_points, 4))]))
        owner = np.repeat(np.arange(self.n), np.diff(self.ptr))
        bb = np.empty((self.n, 4))
        if self.n:
            xs = np.minimum(self.segs[:, 0], self.segs[:, 2])
            ys = np.minimum(self.segs[:, 1], self.segs[:, 3])
            xe = np.maximum(self.segs[:, 0], self.segs[:, 2])
            ye = np.maximum(self.segs[:, 1], self.segs[:, 3])
            starts = self.ptr[:-1]
            bb[:, 0] = np.minimum.reduceat(xs, starts)
            bb[:, 1] = np.minimum.reduceat(ys, starts)
            bb[:, 2] = np.maximum.reduceat(xe, starts)
            bb[:, 3] = np.maximum.reduceat(ye, starts)
        self.bbox = bb
        del owner
        self.cap = np.full(self.n, float(cap))
        self._grid()
        self._lookup()

    def _grid(self):
        m = self.n_stitch
        if m:
            b = self.bbox[:m]
            x0, y0 = b[:, 0].min(), b[:, 1].min()
            x1, y1 = b[:, 2].max(), b[:, 3].max()
            ext = max(float(np.max(b[:, 2] - b[:, 0])), float(np.max(b[:, 3] - b[:, 1])))
            cs = max(ext, 1e-6 * max(1.0, x1 - x0, y1 - y0))
            area = max((x1 - x0) * (y1 - y0), cs * cs)
            # keep cell count near the stitch count
            cs = max(cs, math.sqrt(area / max(m, 1)))
        else:
            x0 = y0 = 0.0
            x1 = y1 = cs = 1.0
        nx = int((x1 - x0) / cs) + 1
        ny = int((y1 - y0) / cs) + 1
        self.gx0, self.gy0, self.cs, self.nx, self.ny = float(x0), float(y0), float(cs), nx, ny
        self.gstart, self.gitems = _build_grid(self.bbox, m, self.gx0, self.gy0, self.cs, nx, ny)

    def _lookup(self):
        self._slot_index = {s: k for k, s in enumerate(self.pattern.slots)}
        if self.n_stitch:
            self._lo = self.ids[:, :2].min(0)
            span = self.ids[:, :2].max(0) - self._lo + 1
            self._span = span
            S = len(self._slot_index)
            table = np.full(int(span[0] * span[1] * S), -1, dtype=np.int64)
            sk = np.array([self._slot_index[s] for s in self.ids[:, 2]], dtype=np.int64) \
                if S > 1 else np.zeros(self.n_stitch, np.int64)
            key = ((self.ids[:, 0] - self._lo[0]) * span[1] + (self.ids[:, 1] - self._lo[1])) * S + sk
            table[key] = np.arange(self.n_stitch)
            self._table = table

    def node_of(self, sid: StitchId) -> int:
        if not self.n_stitch:
            return -1
        n1, n2, slot = sid
        k = self._slot_index.get(slot)
        a, b = n1 - self._lo[0], n2 - self._lo[1]
        if k is None or not (0 <= a < self._span[0] and 0 <= b < self._span[1]):
            return -1
        return int(self._table[(a * self._span[1] + b) * len(self._slot_index) + k])

    def point_node(self, k: int) -> int:
        return self.n_stitch + k

    def set_point(self, k: int, xy) -> int:
        i = self.n_stitch + k
        x, y = float(xy[0]), float(xy[1])
        self.segs[self.ptr[i]] = (x, y, x, y)
        self.bbox[i] = (x, y, x, y)
        return i

    def stitch_segments(self, i: int) -> np.ndarray:
        return self.segs[self.ptr[i]:self.ptr[i + 1]]

    def run(self, src: int, limit: float, target: int = -1, watch=(), src_cap: float | None = None):
        if src_cap is None:
            src_cap = self.cap[src] if src < self.n_stitch else math.inf
        watch = np.asarray(watch, dtype=np.int64).reshape(-1)
        return _sssp(self.segs, self.ptr, self.bbox, self.gstart, self.gitems,
                     self.gx0, self.gy0, self.cs, self.nx, self.ny, self.cap,
                     int(src), float(src_cap), int(target), float(limit), watch)

    def distances_from(self, i: int, nodes=None) -> np.ndarray:
        """Exact set distances from node i to ``nodes`` (default: all stitches)."""
        if nodes is None:
            nodes = np.arange(self.n_stitch)
        nodes = np.asarray(nodes, dtype=np.int64)
        own = self.stitch_segments(i)
        cnt = self.ptr[nodes + 1] - self.ptr[nodes]
        rows = np.repeat(self.ptr[nodes], cnt) + (np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt))
        tgt = self.segs[rows]
        d = np.full(len(rows), np.inf)
        for s in own:
            np.minimum(d, geo.segment_segment_np(*s, tgt[:, 0], tgt[:, 1], tgt[:, 2], tgt[:, 3]), out=d)
        out = np.full(len(nodes), np.inf)
        if len(rows):
            starts = np.cumsum(cnt) - cnt
            nz = cnt > 0
            out[nz] = np.minimum.reduceat(d, starts[nz])
        return out


def _round_scale(D: float) -> float:
    return float(2.0 ** max(3, math.ceil(math.log2(max(D, 1.0)))))


def stitch_hop_cap(pattern: SmockingPattern, D: float) -> float:
    """Certified hop cap valid for all distances up to D (see module doc)."""
    if pattern.basis is None or not pattern.templates:
        return math.inf
    table = _cap_cache.setdefault(pattern, {})
    for scale in sorted(table):
        if scale >= D:
            return table[scale]
    scale = _round_scale(D)
    rho = reach_radius(pattern, scale)
    regions = []
    for t in pattern.templates:
        sid = StitchId(0, 0, t.slot)
        st = pattern.stitch(sid)
        reg = Region(pattern, BoundingBox.around(np.array(st.segments).reshape(-1, 2), rho))
        src = reg.node_of(sid)
        regions.append((reg, src, reg.distances_from(src)))
    c = separation(pattern) * (1.0 + 1e-9)
    # Raising c to the smallest undominated edge and re-checking usually
    # settles on a short cap; raising to the largest one is always sound
    # without a re-check (edges above it were dominated under a smaller cap).
    for rounds_left in range(CAP_ROUNDS, 0, -1):
        bad_w = []
        for reg, src, w in regions:
            reg.cap[:] = c
            dist, _, done = reg.run(src, scale * (1 + 1e-12))
            bad = (w > c) & (w <= scale) & (~done | (dist > w + CERT_TOL))
            bad_w.extend(w[bad].tolist())
        if not bad_w:
            break
        c = max(bad_w) if rounds_left == 1 else min(bad_w)
    table[scale] = c
    return c


def build_region(pattern: SmockingPattern, box: BoundingBox, D: float, n_points: int = 0) -> Region:
    """Region about ``box`` valid for chains of cost <= D from sources inside it."""
    cap = stitch_hop_cap(pattern, D)
    return Region(pattern, box.inflate(reach_radius(pattern, D)), n_points, cap=cap)


def map_sources(fn, items, threads: int | None = None):
    """Run ``fn`` over ``items`` on a thread pool (kernels release the GIL)."""
    threads = threads or thread_count()
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
