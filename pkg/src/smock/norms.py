"""Limit norms of the periodic patterns and the deviation bounds around them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError
from .metric import (CheckReport, MetricNode, pairwise_values, smocked_distance,
                     stitch_distance_table)
from .pattern import BoundingBox, SmockingPattern, builtin_pattern

SQRT2 = math.sqrt(2.0)
KINDS = ("plus", "woven", "bumpy", "custom", "taxicab", "euclidean")

# analytic Lipschitz constants used when assembling bounds
DILATION = {"plus": 1.0, "woven": 1.0, "bumpy": 4.0 / 3.0}
# lattice step of the index set of each closed-form pattern
INDEX_STEP = {"plus": 3, "woven": 2, "bumpy": 3}
PATTERN_OF = {"plus": "plus", "woven": "woven", "bumpy": "bumpy"}


@dataclass(frozen=True)
class NormSpec:
    """A planar norm.

    ``custom`` is a*min(|x1|,|x2|) + b*||x1|-|x2||, which is a norm exactly
    when 0 < b <= a <= 2b; ``taxicab`` is scale*(|x1|+|x2|).
    """
    kind: str
    a: float = 0.0
    b: float = 0.0
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown norm kind {self.kind!r}")
        if self.kind == "custom" and not (0 < self.b <= self.a <= 2 * self.b):
            raise ValidationError("custom norm needs 0 < b <= a <= 2b")
        if self.kind == "taxicab" and not self.scale > 0:
            raise ValidationError("taxicab scale must be positive")
        _sample_axioms(self)

    @staticmethod
    def named(kind: str) -> "NormSpec":
        if kind not in ("plus", "woven", "bumpy", "euclidean"):
            raise ValidationError(f"no parameter-free norm called {kind!r}")
        return NormSpec(kind)

    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        a1, a2 = np.abs(x[..., 0]), np.abs(x[..., 1])
        if self.kind == "plus":
            out = (a1 + a2) / 3
        elif self.kind == "woven":
            out = (a1 + a2) / 2
        elif self.kind == "bumpy":
            out = (2 * SQRT2 * np.minimum(a1, a2) + 2 * np.abs(a1 - a2)) / 3
        elif self.kind == "custom":
            out = self.a * np.minimum(a1, a2) + self.b * np.abs(a1 - a2)
        elif self.kind == "taxicab":
            out = self.scale * (a1 + a2)
        else:
            out = np.hypot(a1, a2)
        return float(out) if out.ndim == 0 else out

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "custom":
            out.update(a=self.a, b=self.b)
        if self.kind == "taxicab":
            out["scale"] = self.scale
        return out


def _sample_axioms(spec: NormSpec, n: int = 256):
    rng = np.random.default_rng(12345)
    x, y = rng.normal(size=(2, n, 2))
    fx, fy, fxy = spec(x), spec(y), spec(x + y)
    if spec((0.0, 0.0)) != 0 or np.any(fx <= 0):
        raise ValidationError("norm is not definite")
    if np.any(fxy > fx + fy + 1e-12 * (fx + fy)):
        raise ValidationError("norm violates the triangle inequality")
    if np.any(np.abs(spec(-2 * x) - 2 * fx) > 1e-12 * fx):
        raise ValidationError("norm is not absolutely homogeneous")


def norm_eval(spec: NormSpec, x) -> float:
    return spec(x)


def _check_index(kind: str, j) -> tuple[int, int]:
    step = INDEX_STEP[kind]
    try:
        a, b = (int(v) for v in j)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"bad index {j!r}") from exc
    if (a, b) != tuple(j) or a % step or b % step:
        raise DomainError(f"index {tuple(j)} is not in the {kind} index set "
                          f"(coordinates must be multiples of {step})")
    return a, b


def stitch_distance_closed_form(kind: str, j, k) -> float:
    """Distance between stitches I_j and I_k of a closed-form pattern."""
    if kind not in INDEX_STEP:
        raise DomainError(f"no closed form for {kind!r}")
    j, k = _check_index(kind, j), _check_index(kind, k)
    d1, d2 = abs(k[0] - j[0]), abs(k[1] - j[1])
    if kind == "plus":
        return (d1 + d2) / 3
    if kind == "woven":
        return (d1 + d2) / 2
    return 2 * SQRT2 * min(d1, d2) / 3 + 2 * abs(d1 - d2) / 3


def index_window(kind: str, radius: int) -> list[tuple[int, int]]:
    step = INDEX_STEP[kind]
    lo = -(radius // step) * step
    vals = range(lo, radius + 1, step)
    return [(a, b) for a in vals for b in vals]


@dataclass
class ClosedFormReport:
    kind: str
    pairs: int
    max_error: float
    failures: list = field(default_factory=list)
    spot_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {"kind": self.kind, "pairs": self.pairs, "max_error": self.max_error,
                "failures": self.failures[:50], "spot_checked": self.spot_checked,
                "ok": self.ok}


def closed_form_vs_engine(kind: str, radius: int, tol: float = 1e-9, spot: int = 50,
                          seed: int = 0, pattern: SmockingPattern | None = None,
                          threads: int | None = None) -> ClosedFormReport:
    """Compare the closed form with the engine on every index pair in the window.

    The full table comes from one bounded search per source index; ``spot``
    random pairs are also run through ``smocked_distance`` end to end.
    """
    pattern = pattern or builtin_pattern(PATTERN_OF[kind])
    idx = index_window(kind, radius)
    sids = [pattern.id_from_index(j) for j in idx]
    table = stitch_distance_table(pattern, sids, sids, threads)
    arr = np.array(idx, dtype=float)
    diff = np.abs(arr[None, :, :] - arr[:, None, :])
    if kind == "bumpy":
        closed = (2 * SQRT2 * diff.min(-1) / 3 + 2 * np.abs(diff[..., 0] - diff[..., 1]) / 3)
    else:
        closed = diff.sum(-1) / (3 if kind == "plus" else 2)
    err = np.abs(table - closed)
    rep = ClosedFormReport(kind, len(idx) * (len(idx) + 1) // 2, float(err.max()))
    for a, b in zip(*np.nonzero(np.triu(err > tol))):
        rep.failures.append({"j": list(idx[a]), "k": list(idx[b]),
                             "closed": float(closed[a, b]), "engine": float(table[a, b])})
    rng = np.random.default_rng(seed)
    for _ in range(spot):
        a, b = rng.integers(len(idx), size=2)
        got = smocked_distance(pattern, MetricNode.of(sids[a]), MetricNode.of(sids[b])).distance
        want = stitch_distance_closed_form(kind, idx[a], idx[b])
        rep.max_error = max(rep.max_error, abs(got - want))
        if abs(got - want) > tol:
            rep.failures.append({"j": list(idx[a]), "k": list(idx[b]), "closed": want,
                                 "engine": got, "via": "smocked_distance"})
        rep.spot_checked += 1
    return rep


def dilation_estimate(spec: NormSpec, samples: int, seed: int) -> float:
    """Sampled lower bound on the Lipschitz constant of ``spec``."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(samples, 2))
    b = rng.normal(size=(samples, 2))
    th = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    dirs = np.stack([np.cos(th), np.sin(th)], 1)
    a = np.vstack([a, dirs, [[1.0, 0.0]]])
    b = np.vstack([b, np.zeros((len(dirs) + 1, 2))])
    gap = np.hypot(*(a - b).T)
    keep = gap > 0
    ratio = np.abs(spec(a[keep]) - spec(b[keep])) / gap[keep]
    return float(ratio.max())


@dataclass(frozen=True)
class DeviationBound:
    K: float
    h: float
    L: float
    C: float
    dil: float

    def to_json(self) -> dict:
        return {"K": self.K, "h": self.h, "L": self.L, "C": self.C, "dil": self.dil}


def deviation_bound_assemble(h: float, L: float, C: float, dil: float) -> DeviationBound:
    """K = 2h + C + 2*dil*(h + L)."""
    if min(h, L, C, dil) < 0:
        raise ValueError("bound components must be >= 0")
    return DeviationBound(2 * h + C + 2 * dil * (h + L), h, L, C, dil)


def deviation_bound_for(kind: str, h: float, L: float) -> DeviationBound:
    """4h + 2L for plus and woven, (14/3)h + (8/3)L for bumpy."""
    if kind not in DILATION:
        raise DomainError(f"no deviation bound for {kind!r}")
    return deviation_bound_assemble(h, L, 0.0, DILATION[kind])


def point_bound_check(pattern: SmockingPattern, spec: NormSpec, K: float, samples: int,
                      seed: int, window: BoundingBox | None = None) -> CheckReport:
    """Largest |d(x, y) - F(x - y)| over random point pairs, against the bound K."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    window = window or BoundingBox(-40, -40, 40, 40)
    rng = np.random.default_rng(seed)
    lo = (window.xmin, window.ymin)
    hi = (window.xmax, window.ymax)
    x = rng.uniform(lo, hi, size=(samples, 2))
    y = rng.uniform(lo, hi, size=(samples, 2))
    pairs = [(MetricNode.at(*p), MetricNode.at(*q)) for p, q in zip(x, y)]
    d = pairwise_values(pattern, pairs)
    dev = np.abs(d - spec(x - y))
    k = int(np.argmax(dev))
    rep = CheckReport("point-bound", samples)
    rep.stats.update(max_dev=float(dev[k]), bound_K=float(K), exceeded=bool(dev[k] > K),
                     worst_pair=[x[k].tolist(), y[k].tolist()])
    for i in np.flatnonzero(dev > K):
        rep.violations.append({"pair": [x[i].tolist(), y[i].tolist()], "dev": float(dev[i])})
    return rep
