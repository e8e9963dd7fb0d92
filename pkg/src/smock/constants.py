"""Separation factor, stitch lengths and depth of a pattern."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .engine import separation
from .errors import DomainError, ValidationError
from .pattern import SmockingPattern, distances_to_set


@dataclass(frozen=True)
class SmockingConstants:
    delta: float
    l_min: float
    l_max: float
    depth_lo: float
    depth_hi: float
    depth_witness: tuple[float, float]

    def to_json(self) -> dict:
        out = asdict(self)
        out["depth_witness"] = list(self.depth_witness)
        return out


def separation_factor(pattern: SmockingPattern) -> float:
    """Smallest set distance between two distinct stitches."""
    if not pattern.templates:
        raise ValidationError("no templates")
    d = separation(pattern)
    if not d > 0:
        raise ValidationError("separation factor is zero")
    return d


def smocking_lengths(pattern: SmockingPattern) -> tuple[float, float]:
    """(min, max) stitch diameter; diameters are attained at segment endpoints."""
    if not pattern.templates:
        raise ValidationError("no templates")
    d = pattern.diameters
    return float(d.min()), float(d.max())


def _depth_at(pattern: SmockingPattern, pts: np.ndarray) -> np.ndarray:
    return distances_to_set(pattern, pts)[0]


def smocking_depth(pattern: SmockingPattern, tol: float = 1e-7, start: int = 16,
                   max_cells: int = 4_000_000):
    """Certified bracket ``(lo, hi, witness)`` for sup over the plane of D(x).

    Branch and bound over the basis parallelogram: D is 1-Lipschitz, so a
    cell whose image has centre c and circumradius g satisfies sup D <= D(c) + g.
    Cells that cannot beat the best sample are discarded; the rest split in four.
    """
    if pattern.basis is None:
        raise DomainError("depth undefined/infinite for a non-periodic pattern")
    if not tol > 0:
        raise ValueError("tol must be positive")
    B = pattern.basis_matrix
    u, v = B[:, 0], B[:, 1]
    side = 1.0 / start
    g1, g2 = np.meshgrid(np.arange(start), np.arange(start), indexing="ij")
    corner = np.stack([g1.ravel(), g2.ravel()], axis=1) * side
    lo, witness = -math.inf, (0.0, 0.0)
    while True:
        centres = (corner + side / 2) @ B.T
        D = _depth_at(pattern, centres)
        k = int(np.argmax(D))
        if D[k] > lo:
            lo, witness = float(D[k]), (float(centres[k, 0]), float(centres[k, 1]))
        g = 0.5 * side * max(np.linalg.norm(u + v), np.linalg.norm(u - v))
        upper = D + g
        hi = max(lo, float(upper.max()))
        if hi - lo <= tol:
            return lo, hi, witness
        corner = corner[upper > lo]
        if 4 * len(corner) > max_cells:
            return lo, hi, witness
        side /= 2
        corner = np.concatenate([corner, corner + [side, 0], corner + [0, side],
                                 corner + [side, side]])


def cover_check(pattern: SmockingPattern, r: float, grid: float) -> bool:
    """True iff every grid sample of the fundamental domain has D(x) < r."""
    if pattern.basis is None:
        raise DomainError("cover check needs a periodic pattern")
    if not grid > 0:
        raise ValueError("grid spacing must be positive")
    B = pattern.basis_matrix
    n1 = int(math.ceil(np.linalg.norm(B[:, 0]) / grid)) + 1
    n2 = int(math.ceil(np.linalg.norm(B[:, 1]) / grid)) + 1
    s, t = np.meshgrid(np.linspace(0, 1, n1), np.linspace(0, 1, n2), indexing="ij")
    pts = np.stack([s.ravel(), t.ravel()], axis=1) @ B.T
    return bool(np.all(_depth_at(pattern, pts) < r))


def compute_constants(pattern: SmockingPattern, tol: float = 1e-7) -> SmockingConstants:
    delta = separation_factor(pattern)
    l_min, l_max = smocking_lengths(pattern)
    if pattern.basis is None:
        lo = hi = math.inf
        witness = (math.nan, math.nan)
    else:
        lo, hi, witness = smocking_depth(pattern, tol)
    return SmockingConstants(delta, l_min, l_max, lo, hi, witness)
