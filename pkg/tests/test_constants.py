import math

import numpy as np
import pytest

from smock import DomainError, ValidationError, builtin_pattern, interval_pattern
from smock.constants import (compute_constants, cover_check, separation_factor,
                             smocking_depth, smocking_lengths)
from smock.pattern import SmockingPattern, StitchTemplate, distances_to_set

P = builtin_pattern

EXPECTED = {
    "diamond": (1.0, 1.0, 5 / 8),
    "ribbed": (1.0, 1.0, math.sqrt(2) / 2),
    "woven": (1.0, 2.0, 1.0),
    "plus": (1.0, 2.0, math.sqrt(2.5)),
    "checkered": (math.sqrt(2), 1.0, 1.5),
    "bumpy": (2.0, math.sqrt(2), math.sqrt(2)),
}


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_constants_bracket_known_values(name):
    delta, L, h = EXPECTED[name]
    c = compute_constants(P(name), tol=1e-7)
    assert c.delta == pytest.approx(delta, abs=1e-12)
    assert c.l_max == pytest.approx(L, abs=1e-12)
    assert c.depth_lo <= h <= c.depth_hi
    assert c.depth_hi - c.depth_lo <= 1e-6
    assert distances_to_set(P(name), np.array([c.depth_witness]))[0][0] >= c.depth_lo


def test_lengths():
    assert smocking_lengths(P("plus")) == (2.0, 2.0)
    assert smocking_lengths(P("bumpy")) == pytest.approx((math.sqrt(2), math.sqrt(2)))
    assert smocking_lengths(interval_pattern((0, 0), (1, 0))) == (1.0, 1.0)


def test_depth_needs_basis():
    with pytest.raises(DomainError, match="non-periodic"):
        smocking_depth(interval_pattern(), 1e-6)


def test_depth_tolerance_is_honoured():
    lo, hi, _ = smocking_depth(P("diamond"), tol=1e-9)
    assert hi - lo <= 1e-9 and lo <= 5 / 8 <= hi


def test_cover_check_examples():
    assert cover_check(P("woven"), 1 + 2 + 1e-6, 0.05)
    assert not cover_check(P("woven"), 0.0, 0.05)
    assert cover_check(P("checkered"), 1.51, 0.01)
    assert not cover_check(P("checkered"), 1.49, 0.01)


def test_cover_by_depth_plus_length(builtin):
    c = compute_constants(builtin)
    assert cover_check(builtin, c.depth_hi + 1e-6, 0.05)


def test_separation_invariant_under_translation_and_relabeling():
    base = P("woven")
    shifted = SmockingPattern(tuple(
        StitchTemplate(10 - t.slot, tuple((a + 0.25, b + 3, c + 0.25, d + 3) for a, b, c, d in t.segments),
                       t.anchor) for t in base.templates), base.basis)
    assert separation_factor(shifted) == pytest.approx(separation_factor(base), abs=1e-12)


def test_separation_of_overlapping_pattern_is_rejected():
    p = SmockingPattern((StitchTemplate(0, ((0, 0, 2, 0),), (0, 0)),), ((1.0, 0.0), (0.0, 1.0)))
    with pytest.raises(ValidationError):
        separation_factor(p)


def test_constants_json_shape():
    out = compute_constants(P("plus")).to_json()
    assert set(out) == {"delta", "l_min", "l_max", "depth_lo", "depth_hi", "depth_witness"}
    assert len(out["depth_witness"]) == 2
