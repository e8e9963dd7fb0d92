"""The smocked pseudometric: exact distances, witness chains, oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import geometry as geo
from .engine import Region, build_region, separation
from .errors import BudgetExceeded, DomainError
from .pattern import (BoundingBox, Point2, SmockingPattern, Stitch, StitchId,
                      distance_to_smocking_set)

TOL = 1e-9


@dataclass(frozen=True)
class MetricNode:
    kind: str
    point: Point2 | None = None
    stitch: StitchId | None = None

    def __post_init__(self):
        if self.kind == "point":
            if self.point is None or self.stitch is not None:
                raise ValueError("point node needs exactly a point")
            if not all(math.isfinite(c) for c in self.point):
                raise ValueError("point coordinates must be finite")
        elif self.kind == "stitch":
            if self.stitch is None or self.point is not None:
                raise ValueError("stitch node needs exactly a stitch id")
        else:
            raise ValueError(f"unknown node kind {self.kind!r}")

    @staticmethod
    def at(x: float, y: float) -> "MetricNode":
        return MetricNode("point", point=Point2(float(x), float(y)))

    @staticmethod
    def of(sid) -> "MetricNode":
        return MetricNode("stitch", stitch=StitchId(*map(int, sid)))

    def sort_key(self):
        if self.kind == "stitch":
            return (0, *self.stitch)
        return (1, *self.point)


@dataclass(frozen=True)
class Hop:
    exit: Point2
    entry: Point2
    length: float


@dataclass(frozen=True)
class WitnessPath:
    nodes: tuple[MetricNode, ...]
    hops: tuple[Hop, ...]
    total: float

    @property
    def jump_count(self) -> int:
        return max(0, len(self.nodes) - 2)

    def reversed(self) -> "WitnessPath":
        hops = tuple(Hop(h.entry, h.exit, h.length) for h in reversed(self.hops))
        return WitnessPath(tuple(reversed(self.nodes)), hops, self.total)


@dataclass(frozen=True)
class DistanceResult:
    distance: float
    witness: WitnessPath

    def to_json(self, pattern: SmockingPattern | None = None) -> dict:
        return {
            "distance": self.distance,
            "jumps": self.witness.jump_count,
            "nodes": [node_json(n, pattern) for n in self.witness.nodes],
            "hops": [{"exit": list(h.exit), "entry": list(h.entry), "len": h.length}
                     for h in self.witness.hops],
        }


def node_json(node: MetricNode, pattern: SmockingPattern | None = None) -> dict:
    if node.kind == "point":
        return {"point": list(node.point)}
    out = {"stitch": list(node.stitch)}
    if pattern is not None:
        out["index"] = list(pattern.index_point(node.stitch))
    return out


def canonical(pattern: SmockingPattern, node: MetricNode, tol: float = TOL) -> MetricNode:
    """Apply the smocking map: a point on (within tol of) a stitch becomes it."""
    if node.kind == "stitch":
        pattern.template(node.stitch.slot)
        if pattern.basis is None and node.stitch[:2] != (0, 0):
            raise DomainError(f"stitch {tuple(node.stitch)} is not in the pattern")
        return node
    if not pattern.templates:
        return node
    d, sid = distance_to_smocking_set(pattern, node.point)
    return MetricNode.of(sid) if d <= tol else node


def node_segments(pattern: SmockingPattern, node: MetricNode) -> np.ndarray:
    if node.kind == "point":
        x, y = node.point
        return np.array([[x, y, x, y]])
    return pattern.stitch(node.stitch).array


class Session:
    """A region reused for many queries whose endpoints lie in ``box``.

    ``D`` bounds the distances that will be asked for (e.g. the box
    diagonal). Not thread-safe: point endpoints are written into two reusable
    point slots.
    """

    def __init__(self, pattern: SmockingPattern, box: BoundingBox, D: float):
        self.pattern = pattern
        self.box = box
        self.D = D
        self.region: Region = build_region(pattern, box, D, n_points=2)

    def _index(self, node: MetricNode, slot: int) -> int:
        if node.kind == "point":
            return self.region.set_point(slot, node.point)
        i = self.region.node_of(node.stitch)
        if i < 0:
            raise DomainError(f"stitch {tuple(node.stitch)} lies outside the query window")
        return i

    def _run(self, a: MetricNode, b: MetricNode, limit: float):
        ia = self._index(a, 0)
        ib = self._index(b, 1)
        watch = [ib] if b.kind == "point" else []
        dist, pred, done = self.region.run(ia, limit, target=ib, watch=watch)
        return ia, ib, dist, done

    def value(self, a: MetricNode, b: MetricNode) -> float:
        """Distance between canonical nodes (no witness)."""
        if a == b:
            return 0.0
        if b.sort_key() < a.sort_key():
            a, b = b, a
        direct = geo.union_distance(node_segments(self.pattern, a), node_segments(self.pattern, b))
        if direct > self.D * (1 + 1e-12):
            raise DomainError("query distance exceeds the session bound")
        _, ib, dist, done = self._run(a, b, direct * (1 + 1e-12))
        return float(min(dist[ib], direct)) if done[ib] else float(direct)

    def result(self, a: MetricNode, b: MetricNode, tol: float = TOL) -> DistanceResult:
        """Distance and lexicographically smallest witness chain.

        The witness is built in a canonical orientation (smaller node first)
        and reversed if needed, so d(a, b) and d(b, a) are the same number.
        """
        if a == b:
            return DistanceResult(0.0, WitnessPath((a,), (), 0.0))
        flip = b.sort_key() < a.sort_key()
        if flip:
            a, b = b, a
        d = self.value(a, b)
        # distances to b, then walk forward from a along tight edges
        ib, ia, db, done = self._run(b, a, d * (1 + 1e-12) + 1e-300)
        if not done[ia]:
            db[ia] = d
            done[ia] = True
        reg = self.region
        slack = tol * max(1.0, d)
        seq = [ia]
        cur = ia
        stitch_ids = reg.ids
        while cur != ib:
            cand = np.flatnonzero(done[:reg.n_stitch] & (db[:reg.n_stitch] < db[cur] - 0.5 * slack))
            cand = cand[cand != cur]
            w_b = float(reg.distances_from(cur, [ib])[0])
            if abs(w_b - db[cur]) <= slack or not len(cand):
                cur = ib
            else:
                w = reg.distances_from(cur, cand)
                tight = cand[np.abs(w + db[cand] - db[cur]) <= slack]
                if not len(tight):
                    cur = ib  # float noise only; the direct hop is the fallback
                else:
                    order = np.lexsort((stitch_ids[tight, 2], stitch_ids[tight, 1],
                                        stitch_ids[tight, 0]))
                    cur = int(tight[order[0]])
            seq.append(cur)
            if len(seq) > reg.n + 2:
                raise RuntimeError("witness reconstruction did not terminate")
        nodes = [a] + [MetricNode.of(tuple(stitch_ids[i])) for i in seq[1:-1]] + [b]
        hops = []
        for x, y in zip(nodes, nodes[1:]):
            p, q, ln = geo.closest_pair(node_segments(self.pattern, x),
                                        node_segments(self.pattern, y))
            hops.append(Hop(Point2(*p), Point2(*q), float(ln)))
        total = math.fsum(h.length for h in hops)
        wp = WitnessPath(tuple(nodes), tuple(hops), total)
        return DistanceResult(total, wp.reversed() if flip else wp)


def _session_for(pattern: SmockingPattern, a: MetricNode, b: MetricNode) -> Session:
    ga, gb = node_segments(pattern, a), node_segments(pattern, b)
    D = geo.union_distance(ga, gb)
    pts = np.vstack([ga.reshape(-1, 2), gb.reshape(-1, 2)])
    return Session(pattern, BoundingBox.around(pts), max(D, 1e-9))


def smocked_distance(pattern: SmockingPattern, a: MetricNode, b: MetricNode,
                     tol: float = TOL) -> DistanceResult:
    """Exact smocked distance between two nodes, with a witness chain."""
    a, b = canonical(pattern, a, tol), canonical(pattern, b, tol)
    if not pattern.templates:
        if a.kind != "point" or b.kind != "point":
            raise DomainError("stitch nodes need a pattern with stitches")
        d = math.hypot(a.point.x - b.point.x, a.point.y - b.point.y)
        if a == b:
            return DistanceResult(0.0, WitnessPath((a,), (), 0.0))
        return DistanceResult(d, WitnessPath((a, b), (Hop(a.point, b.point, d),), d))
    return _session_for(pattern, a, b).result(a, b, tol)


def distance_value(pattern: SmockingPattern, a: MetricNode, b: MetricNode,
                   tol: float = TOL) -> float:
    a, b = canonical(pattern, a, tol), canonical(pattern, b, tol)
    if not pattern.templates:
        return math.hypot(a.point.x - b.point.x, a.point.y - b.point.y)
    return _session_for(pattern, a, b).value(a, b)


# -- brute force oracle --------------------------------------------------------

def brute_force_distance(pattern: SmockingPattern, a: MetricNode, b: MetricNode,
                         max_jumps: int, budget: int = 2_000_000,
                         tol: float = TOL) -> DistanceResult:
    """Minimum over d_0..d_max_jumps by depth-first enumeration of stitch chains.

    Candidates are the stitches within ``|a-b| + delta`` of ``a``. A branch is
    cut when its cost already reaches the best complete chain, or when the
    same stitch was reached before at no greater cost with no more jumps.
    """
    a, b = canonical(pattern, a, tol), canonical(pattern, b, tol)
    ga, gb = node_segments(pattern, a), node_segments(pattern, b)
    direct = geo.union_distance(ga, gb)
    if a == b:
        return DistanceResult(0.0, WitnessPath((a,), (), 0.0))
    best, best_chain = direct, ()
    if max_jumps > 0 and pattern.templates:
        delta = separation(pattern)
        reach = direct + (delta if math.isfinite(delta) else pattern.l_max)
        if pattern.basis is None:
            from .pattern import _all_finite
            ids, ptr, segs = _all_finite(pattern)
        else:
            ids, ptr, segs = pattern.enumerate(BoundingBox.around(ga.reshape(-1, 2), reach))
        n = len(ids)
        owner = np.repeat(np.arange(n), np.diff(ptr))

        def to_all(g):
            out = np.full(n, np.inf)
            for s in g:
                d = geo.segment_segment_np(*s, segs[:, 0], segs[:, 1], segs[:, 2], segs[:, 3])
                np.minimum.at(out, owner, d)
            return out

        wa, wb = to_all(ga), to_all(gb)
        keep = wa <= reach
        for node in (a, b):
            if node.kind == "stitch":
                keep &= ~np.all(ids == np.array(node.stitch), axis=1)
        idx = np.flatnonzero(keep)
        ids_k, wa, wb = ids[idx], wa[idx], wb[idx]
        m = len(idx)
        W = np.full((m, m), np.inf)
        for i, k in enumerate(idx):
            W[i] = to_all(segs[ptr[k]:ptr[k + 1]])[idx]
        np.fill_diagonal(W, np.inf)
        lab = np.full((m, max_jumps + 1), np.inf)
        stack = []
        order = np.argsort(-wa, kind="stable")
        for c in order:
            if wa[c] < best:
                stack.append((float(wa[c]), int(c), 1, (int(c),)))
                lab[c, 1:] = np.minimum(lab[c, 1:], wa[c])
        expansions = 0
        while stack:
            cost, c, depth, chain = stack.pop()
            if cost >= best or lab[c, depth] < cost:
                continue
            expansions += 1
            if expansions > budget:
                raise BudgetExceeded(f"brute force exceeded {budget} node expansions")
            total = cost + wb[c]
            if total < best:
                best, best_chain = total, chain
            if depth >= max_jumps:
                continue
            new = cost + W[c]
            ok = (new < best) & (new < lab[:, depth + 1])
            kids = np.flatnonzero(ok)
            for k in kids:
                lab[k, depth + 1:] = np.minimum(lab[k, depth + 1:], new[k])
            for k in kids[np.argsort(-new[kids], kind="stable")]:
                stack.append((float(new[k]), int(k), depth + 1, chain + (int(k),)))
        chain_nodes = [MetricNode.of(tuple(ids_k[c])) for c in best_chain]
    else:
        chain_nodes = []
    nodes = [a] + chain_nodes + [b]
    hops = []
    for x, y in zip(nodes, nodes[1:]):
        p, q, ln = geo.closest_pair(node_segments(pattern, x), node_segments(pattern, y))
        hops.append(Hop(Point2(*p), Point2(*q), float(ln)))
    total = math.fsum(h.length for h in hops)
    return DistanceResult(total, WitnessPath(tuple(nodes), tuple(hops), total))


def pulled_thread_distance(interval: Stitch, a, b) -> float:
    """Distance in the plane with one stitch collapsed: direct or via the stitch."""
    segs = interval.array
    pa = np.asarray(a, dtype=float).reshape(1, 2)
    pb = np.asarray(b, dtype=float).reshape(1, 2)
    direct = float(np.hypot(*(pa - pb)[0]))
    via = float(geo.points_to_segments(pa, segs)[0] + geo.points_to_segments(pb, segs)[0])
    return min(direct, via)


# -- property checks -------------------------------------------------------------

@dataclass
class CheckReport:
    name: str
    samples: int
    violations: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


def default_window(pattern: SmockingPattern, half: float = 8.0) -> BoundingBox:
    if pattern.basis is not None or not pattern.templates:
        return BoundingBox(-half, -half, half, half)
    from .pattern import _all_finite
    segs = _all_finite(pattern)[2]
    return BoundingBox.around(segs.reshape(-1, 2), 2 * pattern.l_max + 2)


def _random_node(pattern, rng, box, stitches, on_stitch: float):
    if stitches and rng.random() < on_stitch:
        s = stitches[rng.integers(len(stitches))]
        seg = s.array[rng.integers(len(s.segments))]
        t = rng.random()
        return MetricNode.at(seg[0] + t * (seg[2] - seg[0]), seg[1] + t * (seg[3] - seg[1]))
    return MetricNode.at(rng.uniform(box.xmin, box.xmax), rng.uniform(box.ymin, box.ymax))


def metric_axiom_check(pattern: SmockingPattern, samples: int, seed: int,
                       window: BoundingBox | None = None, tol: float = TOL) -> CheckReport:
    """Symmetry, triangle inequality and definiteness on random triples."""
    from .pattern import stitches_in_box
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    box = window or default_window(pattern)
    stitches = stitches_in_box(pattern, box) if pattern.templates else []
    diag = math.hypot(box.xmax - box.xmin, box.ymax - box.ymin) + 2 * pattern.l_max
    sess = Session(pattern, box.inflate(pattern.l_max), diag) if pattern.templates else None
    report = CheckReport("metric-axioms", samples)
    worst = math.inf

    def dist(x, y):
        if sess is None:
            return math.hypot(x.point.x - y.point.x, x.point.y - y.point.y)
        return sess.value(x, y)

    for _ in range(samples):
        raw = [_random_node(pattern, rng, box, stitches, 0.2) for _ in range(3)]
        if rng.random() < 0.05:
            raw[1] = raw[0]
        v, w, x = (canonical(pattern, n, tol) for n in raw)
        dvw, dwv = dist(v, w), dist(w, v)
        dwx, dvx = dist(w, x), dist(v, x)
        triple = [node_json(n) for n in raw]
        if dvw != dwv:
            report.violations.append({"axiom": "symmetry", "triple": triple, "d": [dvw, dwv]})
        slack = dvw + dwx - dvx
        worst = min(worst, slack)
        if slack < -tol:
            report.violations.append({"axiom": "triangle", "triple": triple, "slack": slack})
        if (dvw <= tol) != (v == w):
            report.violations.append({"axiom": "definiteness", "triple": triple, "d": dvw})
    report.stats["min_triangle_slack"] = worst
    return report


def one_stitch_property_check(pattern: SmockingPattern, samples: int, seed: int,
                              window: BoundingBox | None = None,
                              tol: float = TOL) -> CheckReport:
    """Pairs closer than delta use at most one stitch and are not far apart."""
    rng = np.random.default_rng(seed)
    box = window or default_window(pattern)
    delta = separation(pattern) if pattern.templates else math.inf
    L = pattern.l_max
    reach = (delta if math.isfinite(delta) else 2 * L + 1) + L
    report = CheckReport("one-stitch", samples)
    sess = Session(pattern, box.inflate(reach + L), 2 * reach + 2 * L) if pattern.templates else None
    found = attempts = 0
    while found < samples and attempts < 50 * samples:
        attempts += 1
        v = MetricNode.at(rng.uniform(box.xmin, box.xmax), rng.uniform(box.ymin, box.ymax))
        r, th = rng.uniform(0, reach), rng.uniform(0, 2 * math.pi)
        w = MetricNode.at(v.point.x + r * math.cos(th), v.point.y + r * math.sin(th))
        if sess is None:
            continue
        cv, cw = canonical(pattern, v, tol), canonical(pattern, w, tol)
        res = sess.result(cv, cw, tol)
        if not res.distance < delta:
            continue
        found += 1
        eu = math.hypot(v.point.x - w.point.x, v.point.y - w.point.y)
        if res.witness.jump_count > 1 or eu > res.distance + L + tol:
            report.violations.append({"pair": [list(v.point), list(w.point)],
                                      "distance": res.distance,
                                      "jumps": res.witness.jump_count})
    report.samples = found
    return report


def pairwise_values(pattern: SmockingPattern, pairs: Sequence[tuple[MetricNode, MetricNode]],
                    tol: float = TOL) -> np.ndarray:
    """Distances for many pairs, sharing one region."""
    if not pairs:
        return np.zeros(0)
    canon = [(canonical(pattern, a, tol), canonical(pattern, b, tol)) for a, b in pairs]
    if not pattern.templates:
        return np.array([math.hypot(a.point.x - b.point.x, a.point.y - b.point.y) for a, b in canon])
    pts = np.vstack([np.vstack([node_segments(pattern, a).reshape(-1, 2),
                                node_segments(pattern, b).reshape(-1, 2)]) for a, b in canon])
    box = BoundingBox.around(pts)
    D = max(geo.union_distance(node_segments(pattern, a), node_segments(pattern, b))
            for a, b in canon)
    sess = Session(pattern, box, max(D, 1e-9))
    return np.array([sess.value(a, b) for a, b in canon])


def stitch_distance_table(pattern: SmockingPattern, sources: Sequence[StitchId],
                          targets: Sequence[StitchId], threads: int | None = None) -> np.ndarray:
    """Matrix of distances between stitches: one bounded search per source.

    Each search is limited by the largest direct set distance from its source
    to a target, which bounds every wanted distance from above.
    """
    from .engine import map_sources
    src = [StitchId(*map(int, s)) for s in sources]
    tgt = [StitchId(*map(int, t)) for t in targets]
    if not src or not tgt:
        return np.zeros((len(src), len(tgt)))
    geoms = {s: pattern.stitch(s).array for s in set(src) | set(tgt)}
    pts = np.vstack([g.reshape(-1, 2) for g in geoms.values()])
    box = BoundingBox.around(pts)
    D = math.hypot(box.xmax - box.xmin, box.ymax - box.ymin)
    region = build_region(pattern, box, max(D, 1e-9))
    ti = np.array([region.node_of(t) for t in tgt], dtype=np.int64)

    def one(s):
        i = region.node_of(s)
        direct = region.distances_from(i, ti)
        dist, _, done = region.run(i, float(direct.max()) * (1 + 1e-12))
        return np.where(done[ti], np.minimum(dist[ti], direct), direct)

    return np.array(map_sources(one, src, threads))
