"""Smocking patterns: stitches, lattices, the pattern file format, builtins.

A pattern is either periodic (a lattice basis plus stitch templates) or
finite (an explicit list of stitches). Stitches are unions of segments and are
addressed by ``StitchId(n1, n2, slot)``: template ``slot`` translated by
``n1*u + n2*v``. Each template carries an anchor point; ``anchor + n1*u +
n2*v`` is the stitch's index point, which is how the conventional pattern
indices (e.g. ``I_(3,0)`` for the plus pattern) are recovered.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from . import geometry as geo
from .errors import DomainError, PatternSyntaxError, ValidationError

Seg = tuple[float, float, float, float]


class Point2(NamedTuple):
    x: float
    y: float


class StitchId(NamedTuple):
    n1: int
    n2: int
    slot: int


@dataclass(frozen=True)
class BoundingBox:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin <= self.xmax and self.ymin <= self.ymax):
            raise ValueError("bounding box min must not exceed max")

    def inflate(self, r: float) -> "BoundingBox":
        return BoundingBox(self.xmin - r, self.ymin - r, self.xmax + r, self.ymax + r)

    @staticmethod
    def around(points: Iterable, r: float = 0.0) -> "BoundingBox":
        p = np.asarray(list(points), dtype=float).reshape(-1, 2)
        return BoundingBox(p[:, 0].min() - r, p[:, 1].min() - r,
                           p[:, 0].max() + r, p[:, 1].max() + r)


@dataclass(frozen=True)
class StitchTemplate:
    slot: int
    segments: tuple[Seg, ...]
    anchor: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class Stitch:
    id: StitchId
    segments: tuple[Seg, ...]

    @property
    def array(self) -> np.ndarray:
        return np.array(self.segments, dtype=float).reshape(-1, 4)


@dataclass(frozen=True, eq=False)
class SmockingPattern:
    """Immutable pattern. Equality is identity, so instances can key caches."""

    templates: tuple[StitchTemplate, ...]
    basis: tuple[tuple[float, float], tuple[float, float]] | None = None
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def periodic(self) -> bool:
        return self.basis is not None

    @cached_property
    def slots(self) -> tuple[int, ...]:
        return tuple(t.slot for t in self.templates)

    @cached_property
    def _by_slot(self) -> dict[int, StitchTemplate]:
        return {t.slot: t for t in self.templates}

    @cached_property
    def diameters(self) -> np.ndarray:
        out = []
        for t in self.templates:
            pts = np.array(t.segments, dtype=float).reshape(-1, 2)
            diff = pts[:, None, :] - pts[None, :, :]
            out.append(float(np.sqrt((diff ** 2).sum(-1)).max()))
        return np.array(out)

    @property
    def l_max(self) -> float:
        return float(self.diameters.max()) if self.templates else 0.0

    @cached_property
    def basis_matrix(self) -> np.ndarray:
        if self.basis is None:
            raise DomainError("pattern has no lattice basis")
        return np.array(self.basis, dtype=float).T  # columns u, v

    def template(self, slot: int) -> StitchTemplate:
        try:
            return self._by_slot[slot]
        except KeyError:
            raise DomainError(f"no template with slot {slot}") from None

    def offset(self, n1: int, n2: int) -> np.ndarray:
        if self.basis is None:
            if (n1, n2) != (0, 0):
                raise DomainError("finite patterns only have lattice cell (0, 0)")
            return np.zeros(2)
        return self.basis_matrix @ np.array([n1, n2], dtype=float)

    def stitch(self, sid: StitchId | tuple) -> Stitch:
        sid = StitchId(*sid)
        t = self.template(sid.slot)
        ox, oy = self.offset(sid.n1, sid.n2)
        segs = tuple((a + ox, b + oy, c + ox, d + oy) for a, b, c, d in t.segments)
        return Stitch(sid, segs)

    def index_point(self, sid: StitchId | tuple) -> Point2:
        sid = StitchId(*sid)
        ax, ay = self.template(sid.slot).anchor
        ox, oy = self.offset(sid.n1, sid.n2)
        return Point2(float(ax + ox), float(ay + oy))

    def id_from_index(self, j: tuple[float, float], slot: int | None = None,
                      tol: float = 1e-9) -> StitchId:
        """Resolve a conventional index point to a stitch id, or DomainError."""
        slots = self.slots if slot is None else (slot,)
        for s in slots:
            anchor = np.array(self.template(s).anchor)
            rel = np.asarray(j, dtype=float) - anchor
            if self.basis is None:
                if np.all(np.abs(rel) <= tol):
                    return StitchId(0, 0, s)
                continue
            n = np.linalg.solve(self.basis_matrix, rel)
            nr = np.round(n)
            if np.all(np.abs(self.basis_matrix @ (n - nr)) <= tol):
                return StitchId(int(nr[0]), int(nr[1]), s)
        raise DomainError(f"index {tuple(j)} is not a stitch of pattern {self.name!r}")

    # -- enumeration --------------------------------------------------------

    @cached_property
    def _template_arrays(self):
        segs = [np.array(t.segments, dtype=float).reshape(-1, 4) for t in self.templates]
        boxes = np.array([[s[:, [0, 2]].min(), s[:, [1, 3]].min(),
                           s[:, [0, 2]].max(), s[:, [1, 3]].max()] for s in segs])
        return segs, boxes

    def enumerate(self, box: BoundingBox):
        """Stitches whose bounding box meets ``box``, as flat arrays.

        Returns ``(ids (N,3) int64, ptr (N+1,) int64, segs (M,4) float)`` where
        the segments of stitch i are ``segs[ptr[i]:ptr[i+1]]``. Sorted by id.
        """
        segs_t, boxes_t = self._template_arrays
        id_parts, seg_parts, counts = [], [], []
        for k, t in enumerate(self.templates):
            tb = boxes_t[k]
            if self.basis is None:
                n = np.zeros((1, 2), dtype=np.int64)
            else:
                # offsets o with (tb + o) meeting box
                lo = np.array([box.xmin - tb[2], box.ymin - tb[3]])
                hi = np.array([box.xmax - tb[0], box.ymax - tb[1]])
                corners = np.array([[lo[0], lo[1]], [lo[0], hi[1]],
                                    [hi[0], lo[1]], [hi[0], hi[1]]])
                nc = np.linalg.solve(self.basis_matrix, corners.T).T
                a = np.floor(nc.min(0) - 1e-9).astype(np.int64)
                b = np.ceil(nc.max(0) + 1e-9).astype(np.int64)
                g1, g2 = np.meshgrid(np.arange(a[0], b[0] + 1), np.arange(a[1], b[1] + 1),
                                     indexing="ij")
                n = np.stack([g1.ravel(), g2.ravel()], axis=1)
            off = n @ self.basis_matrix.T if self.basis is not None else np.zeros((len(n), 2))
            keep = ((tb[0] + off[:, 0] <= box.xmax) & (tb[2] + off[:, 0] >= box.xmin)
                    & (tb[1] + off[:, 1] <= box.ymax) & (tb[3] + off[:, 1] >= box.ymin))
            n, off = n[keep], off[keep]
            s = segs_t[k]
            shifted = s[None, :, :] + np.concatenate([off, off], axis=1)[:, None, :]
            id_parts.append(np.column_stack([n, np.full(len(n), t.slot, dtype=np.int64)]))
            seg_parts.append(shifted.reshape(-1, 4))
            counts.append(np.full(len(n), len(s), dtype=np.int64))
        if not id_parts:
            return (np.zeros((0, 3), np.int64), np.zeros(1, np.int64), np.zeros((0, 4)))
        ids = np.concatenate(id_parts)
        cnt = np.concatenate(counts)
        segs = np.concatenate(seg_parts)
        starts = np.concatenate([[0], np.cumsum(cnt)[:-1]])
        order = np.lexsort((ids[:, 2], ids[:, 1], ids[:, 0]))
        ids, cnt, starts = ids[order], cnt[order], starts[order]
        ptr = np.concatenate([[0], np.cumsum(cnt)]).astype(np.int64)
        idx = np.arange(ptr[-1]) + np.repeat(starts - ptr[:-1], cnt)
        return ids.astype(np.int64), ptr, segs[idx]

    def with_name(self, name: str) -> "SmockingPattern":
        return SmockingPattern(self.templates, self.basis, name, dict(self.meta))


# -- validation ---------------------------------------------------------------

def _template_connected(segs: tuple[Seg, ...], tol: float) -> bool:
    arr = np.array(segs, dtype=float).reshape(-1, 4)
    n = len(arr)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if geo.segment_segment(*arr[i], *arr[j]) <= tol:
                parent[find(i)] = find(j)
    return len({find(i) for i in range(n)}) == 1


def min_separation(pattern: SmockingPattern):
    """Smallest distance between distinct stitches and a pair attaining it.

    Periodic case: every template against every lattice translate of every
    template whose offset could bring it within ``|u|+|v|+2*L_max`` (and at
    least within the shortest lattice vector, which already bounds the
    minimum since a stitch and its own translate by u are |u| apart).
    """
    segs_t, _ = pattern._template_arrays
    best, pair = math.inf, None
    temps = pattern.templates
    if pattern.basis is None:
        for i in range(len(temps)):
            for j in range(i + 1, len(temps)):
                d = geo.union_distance(segs_t[i], segs_t[j])
                if d < best:
                    best, pair = d, (StitchId(0, 0, temps[i].slot), StitchId(0, 0, temps[j].slot))
        return best, pair
    B = pattern.basis_matrix
    u, v = B[:, 0], B[:, 1]
    ext = max(float(np.hypot(s[:, [0, 2]], s[:, [1, 3]]).max()) for s in segs_t)
    radius = max(np.linalg.norm(u) + np.linalg.norm(v) + 2 * pattern.l_max,
                 min(np.linalg.norm(u), np.linalg.norm(v)) + 2 * ext)
    box = BoundingBox(-radius - ext, -radius - ext, radius + ext, radius + ext)
    ids, ptr, segs = pattern.enumerate(box)
    for i, t in enumerate(temps):
        s = segs_t[i]
        d = np.full(len(ids), np.inf)
        for row in s:
            dd = geo.segment_segment_np(*row, segs[:, 0], segs[:, 1], segs[:, 2], segs[:, 3])
            stitch_min = np.minimum.reduceat(dd, ptr[:-1]) if len(dd) else dd
            d = np.minimum(d, stitch_min)
        self_mask = (ids[:, 0] == 0) & (ids[:, 1] == 0) & (ids[:, 2] == t.slot)
        d[self_mask] = np.inf
        k = int(np.argmin(d))
        if d[k] < best:
            best, pair = float(d[k]), (StitchId(0, 0, t.slot), StitchId(*map(int, ids[k])))
    return best, pair


def validate(pattern: SmockingPattern, tol: float = 1e-9) -> SmockingPattern:
    if not pattern.templates:
        raise ValidationError("no templates")
    if len(set(pattern.slots)) != len(pattern.slots):
        raise ValidationError("duplicate template slot")
    if pattern.basis is not None:
        B = np.array(pattern.basis, dtype=float)
        if not np.all(np.isfinite(B)) or abs(np.linalg.det(B)) <= tol:
            raise ValidationError("degenerate basis (parallel or zero vectors)")
    for t in pattern.templates:
        arr = np.array(t.segments, dtype=float).reshape(-1, 4)
        if not len(arr) or not np.all(np.isfinite(arr)):
            raise ValidationError(f"template {t.slot} has no finite segments")
        if np.any(np.hypot(arr[:, 2] - arr[:, 0], arr[:, 3] - arr[:, 1]) == 0):
            raise ValidationError(f"template {t.slot} has a zero-length segment")
        if not _template_connected(t.segments, tol):
            raise ValidationError(f"template {t.slot} is not connected")
    if len(pattern.templates) > 1 or pattern.basis is not None:
        d, pair = min_separation(pattern)
        if d <= tol:
            raise ValidationError(f"separation factor is zero (stitches {pair[0]} and {pair[1]})")
    return pattern


# -- pattern file format ------------------------------------------------------

def _floats(tokens: list[str], line_no: int, cols: list[int]) -> list[float]:
    out = []
    for tok, col in zip(tokens, cols):
        try:
            val = float(tok)
        except ValueError:
            raise PatternSyntaxError(f"expected a number, got {tok!r}", line_no, col) from None
        if not math.isfinite(val):
            raise PatternSyntaxError(f"non-finite number {tok!r}", line_no, col)
        out.append(val)
    return out


def _polyline(vals: list[float]) -> list[Seg]:
    pts = list(zip(vals[0::2], vals[1::2]))
    return [(a[0], a[1], b[0], b[1]) for a, b in zip(pts, pts[1:])]


def parse_pattern(text: str, name: str = "", tol: float = 1e-9) -> SmockingPattern:
    """Parse and validate pattern-file text."""
    lines = text.splitlines()
    header_seen = False
    basis = None
    templates: dict[int, list[Seg]] = {}
    anchors: dict[int, tuple[float, float]] = {}
    absolutes: list[list[Seg]] = []
    for line_no, raw in enumerate(lines, start=1):
        body = raw.split("#", 1)[0]
        found = list(re.finditer(r"\S+", body))
        tokens = [m.group() for m in found]
        cols = [m.start() + 1 for m in found]
        if not tokens:
            continue
        if not header_seen:
            if tokens != ["smockpattern", "1"]:
                raise PatternSyntaxError("expected header 'smockpattern 1'", line_no, cols[0])
            header_seen = True
            continue
        kw = tokens[0]
        if kw == "basis":
            if len(tokens) != 5:
                raise PatternSyntaxError("basis needs 4 numbers", line_no, cols[0])
            if basis is not None:
                raise PatternSyntaxError("duplicate basis", line_no, cols[0])
            ux, uy, vx, vy = _floats(tokens[1:], line_no, cols[1:])
            basis = ((ux, uy), (vx, vy))
        elif kw == "stitch":
            if len(tokens) < 3:
                raise PatternSyntaxError("stitch needs a slot and 'seg'", line_no, cols[0])
            try:
                slot = int(tokens[1])
            except ValueError:
                raise PatternSyntaxError(f"slot must be an integer, got {tokens[1]!r}",
                                         line_no, cols[1]) from None
            if slot < 0:
                raise PatternSyntaxError("slot must be non-negative", line_no, cols[1])
            templates.setdefault(slot, []).extend(_seg_body(tokens[2:], cols[2:], line_no))
        elif kw == "absolute":
            absolutes.append(_seg_body(tokens[1:], cols[1:], line_no))
        elif kw == "anchor":
            if len(tokens) != 4:
                raise PatternSyntaxError("anchor needs a slot and 2 numbers", line_no, cols[0])
            try:
                slot = int(tokens[1])
            except ValueError:
                raise PatternSyntaxError(f"slot must be an integer, got {tokens[1]!r}",
                                         line_no, cols[1]) from None
            x, y = _floats(tokens[2:], line_no, cols[2:])
            anchors[slot] = (x, y)
        else:
            raise PatternSyntaxError(f"unknown directive {kw!r}", line_no, cols[0])
    if not header_seen:
        raise PatternSyntaxError("empty pattern file (missing 'smockpattern 1')", 1, 1)
    missing = set(anchors) - set(templates)
    if missing:
        raise ValidationError(f"anchor given for unknown slot {min(missing)}")
    if absolutes and basis is not None:
        raise ValidationError("absolute stitches are only allowed in finite patterns (no basis)")
    temps = [StitchTemplate(s, tuple(templates[s]), anchors.get(s, (0.0, 0.0)))
             for s in sorted(templates)]
    nxt = max(templates, default=-1) + 1
    for k, segs in enumerate(absolutes):
        temps.append(StitchTemplate(nxt + k, tuple(segs), (segs[0][0], segs[0][1])))
    return validate(SmockingPattern(tuple(temps), basis, name), tol)


def _seg_body(tokens: list[str], cols: list[int], line_no: int) -> list[Seg]:
    if not tokens or tokens[0] != "seg":
        raise PatternSyntaxError("expected 'seg'", line_no, cols[0] if cols else 1)
    nums = tokens[1:]
    if len(nums) < 4 or len(nums) % 2:
        col = cols[-1] if cols else 1
        raise PatternSyntaxError("seg needs an even count of at least 4 numbers", line_no, col)
    return _polyline(_floats(nums, line_no, cols[1:]))


def format_pattern(pattern: SmockingPattern) -> str:
    out = ["smockpattern 1"]
    if pattern.basis:
        (ux, uy), (vx, vy) = pattern.basis
        out.append(f"basis {ux!r} {uy!r} {vx!r} {vy!r}")
    for t in pattern.templates:
        for s in t.segments:
            out.append(f"stitch {t.slot} seg " + " ".join(repr(float(c)) for c in s))
        if t.anchor != (0.0, 0.0):
            out.append(f"anchor {t.slot} {t.anchor[0]!r} {t.anchor[1]!r}")
    return "\n".join(out) + "\n"


# -- builtins -----------------------------------------------------------------

def _tpl(slot, segs, anchor=(0.0, 0.0)):
    return StitchTemplate(slot, tuple(tuple(float(c) for c in s) for s in segs),
                          (float(anchor[0]), float(anchor[1])))


_BUILTINS = {
    "diamond": lambda: SmockingPattern(
        (_tpl(0, [(-0.5, 0, 0.5, 0)]),), ((2.0, 0.0), (-1.0, 1.0)), "diamond"),
    "ribbed": lambda: SmockingPattern(
        (_tpl(0, [(-0.5, 0, 0.5, 0)]),), ((2.0, 0.0), (0.0, 1.0)), "ribbed"),
    "woven": lambda: SmockingPattern(
        (_tpl(0, [(-1, 0, 1, 0)]), _tpl(1, [(2, -1, 2, 1)], (2, 0))),
        ((4.0, 0.0), (2.0, 2.0)), "woven"),
    "plus": lambda: SmockingPattern(
        (_tpl(0, [(-1, 0, 1, 0), (0, -1, 0, 1)]),), ((3.0, 0.0), (0.0, 3.0)), "plus"),
    "checkered": lambda: SmockingPattern(
        (_tpl(0, [(-0.5, 0, 0.5, 0)]), _tpl(1, [(1.5, 1, 1.5, 2)], (1.5, 1.5))),
        ((3.0, 0.0), (0.0, 3.0)), "checkered"),
    "bumpy": lambda: SmockingPattern(
        (_tpl(0, [(0, 0, 1, 0), (1, 0, 1, 1), (1, 1, 0, 1), (0, 1, 0, 0)]),),
        ((3.0, 0.0), (0.0, 3.0)), "bumpy"),
}

BUILTIN_NAMES = tuple(_BUILTINS)
_builtin_cache: dict[str, SmockingPattern] = {}


def builtin_pattern(name: str) -> SmockingPattern:
    if name not in _BUILTINS:
        raise DomainError(f"unknown builtin pattern {name!r}; choose from {', '.join(_BUILTINS)}")
    if name not in _builtin_cache:
        _builtin_cache[name] = validate(_BUILTINS[name]())
    return _builtin_cache[name]


def interval_pattern(a=(0.0, 0.0), b=(1.0, 0.0)) -> SmockingPattern:
    """Finite pattern with a single straight stitch (the pulled thread)."""
    return SmockingPattern((_tpl(0, [(a[0], a[1], b[0], b[1])], a),), None, "interval")


def load_pattern(spec: str) -> SmockingPattern:
    """``builtin:<name>`` or a path to a pattern file."""
    if spec.startswith("builtin:"):
        return builtin_pattern(spec[len("builtin:"):])
    try:
        text = Path(spec).read_text(encoding="utf-8")
    except OSError as exc:
        raise PatternSyntaxError(f"cannot read pattern file {spec!r}: {exc.strerror}") from None
    return parse_pattern(text, name=Path(spec).stem)


# -- distances ----------------------------------------------------------------

def stitches_in_box(pattern: SmockingPattern, box: BoundingBox) -> list[Stitch]:
    ids, ptr, segs = pattern.enumerate(box)
    out = []
    for i in range(len(ids)):
        s = segs[ptr[i]:ptr[i + 1]]
        if geo.segments_hit_box(s, box.xmin, box.ymin, box.xmax, box.ymax).any():
            out.append(Stitch(StitchId(*map(int, ids[i])), tuple(map(tuple, s.tolist()))))
    return out


def point_stitch_distance(p, s: Stitch) -> float:
    return float(geo.points_to_segments(np.asarray(p, dtype=float), s.array)[0])


def stitch_stitch_distance(s1: Stitch, s2: Stitch) -> float:
    return geo.union_distance(s1.array, s2.array)


def _cover_radius(pattern: SmockingPattern) -> float:
    if pattern.basis is None:
        return math.inf
    B = pattern.basis_matrix
    return float(np.linalg.norm(B[:, 0]) + np.linalg.norm(B[:, 1]))


def distances_to_set(pattern: SmockingPattern, points: np.ndarray):
    """D(p) and nearest stitch row index for many points.

    Returns ``(dist, nearest_index, ids)`` with ``ids`` the enumerated stitch
    ids the indices refer to.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    reach = _cover_radius(pattern)
    if math.isinf(reach):
        ids, ptr, segs = _all_finite(pattern)
    else:
        # every point is within |u|+|v| of some stitch
        ids, ptr, segs = pattern.enumerate(BoundingBox.around(pts, reach))
    owner = np.repeat(np.arange(len(ids)), np.diff(ptr))
    best = np.full(len(pts), np.inf)
    arg = np.full(len(pts), -1, dtype=np.int64)
    for k, s in enumerate(segs):
        d = geo.point_segment_np(pts[:, 0], pts[:, 1], *s)
        better = d < best
        best[better] = d[better]
        arg[better] = owner[k]
    return best, arg, ids


def _all_finite(pattern: SmockingPattern):
    segs_t, _ = pattern._template_arrays
    ids = np.array([[0, 0, t.slot] for t in pattern.templates], dtype=np.int64)
    cnt = [len(s) for s in segs_t]
    ptr = np.concatenate([[0], np.cumsum(cnt)]).astype(np.int64)
    return ids, ptr, np.concatenate(segs_t)


def distance_to_smocking_set(pattern: SmockingPattern, p) -> tuple[float, StitchId]:
    """D(p) with a nearest stitch; ties resolve to the smallest id."""
    if not pattern.templates:
        raise DomainError("pattern has no stitches")
    pt = np.asarray(p, dtype=float).reshape(1, 2)
    if pattern.basis is None:
        ids, ptr, segs = _all_finite(pattern)
    else:
        # Any stitch within r of p meets the box [p-r, p+r], so once the
        # nearest stitch in the box is within r the search is complete.
        r = max(pattern.l_max, 1e-3)
        while True:
            ids, ptr, segs = pattern.enumerate(BoundingBox.around(pt, r))
            if len(ids) and geo.points_to_segments(pt, segs).min() <= r:
                break
            r *= 2
    owner = np.repeat(np.arange(len(ids)), np.diff(ptr))
    d = geo.point_segment_np(pt[0, 0], pt[0, 1], segs[:, 0], segs[:, 1], segs[:, 2], segs[:, 3])
    per = np.full(len(ids), np.inf)
    np.minimum.at(per, owner, d)
    k = int(np.argmin(per))  # ids are sorted, argmin takes the first
    return float(per[k]), StitchId(*map(int, ids[k]))


def tube_contains(s, radius: float, p) -> bool:
    """True iff the distance from ``p`` to ``s`` is strictly below ``radius``.

    ``s`` is a Stitch or an array of points (N, 2).
    """
    if isinstance(s, Stitch):
        d = point_stitch_distance(p, s)
    else:
        pts = np.asarray(s, dtype=float).reshape(-1, 2)
        d = float(np.hypot(pts[:, 0] - p[0], pts[:, 1] - p[1]).min())
    return d < radius
