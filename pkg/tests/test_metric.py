import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smock import BudgetExceeded, DomainError, StitchId, builtin_pattern, interval_pattern
from smock.engine import separation
from smock.geometry import points_to_segments
from smock.metric import (MetricNode, brute_force_distance, canonical, distance_value,
                          metric_axiom_check, node_segments, one_stitch_property_check,
                          pairwise_values, pulled_thread_distance, smocked_distance,
                          stitch_distance_table)
from smock.pattern import BUILTIN_NAMES, SmockingPattern

P = builtin_pattern
at = MetricNode.at
of = MetricNode.of
small = st.integers(-1500, 1500).map(lambda v: v / 100)


def check_witness(pattern, res, a, b):
    w = res.witness
    assert res.distance == w.total
    assert w.total == math.fsum(h.length for h in w.hops)
    assert w.jump_count == len(w.nodes) - 2
    assert w.nodes[0] == canonical(pattern, a) and w.nodes[-1] == canonical(pattern, b)
    inner = w.nodes[1:-1]
    assert all(x != y for x, y in zip(inner, inner[1:]))
    # consecutive stitches are at least delta apart; the end hops can be short
    if len(inner) > 1:
        assert w.total >= (w.jump_count - 1) * separation(pattern) - 1e-9
    for (x, y), h in zip(zip(w.nodes, w.nodes[1:]), w.hops):
        assert points_to_segments([h.exit], node_segments(pattern, x))[0] < 1e-9
        assert points_to_segments([h.entry], node_segments(pattern, y))[0] < 1e-9
        assert math.dist(h.exit, h.entry) == pytest.approx(h.length, abs=1e-12)


def test_woven_anchor_distance():
    w = P("woven")
    res = smocked_distance(w, of(w.id_from_index((0, 0))), of(w.id_from_index((0, 4))))
    assert res.distance == 2.0
    check_witness(w, res, of(w.id_from_index((0, 0))), of(w.id_from_index((0, 4))))


def test_same_node_is_zero_with_empty_witness():
    res = smocked_distance(P("plus"), at(0.3, 4.1), at(0.3, 4.1))
    assert res.distance == 0.0 and res.witness.hops == ()


def test_points_on_one_stitch_are_identified():
    res = smocked_distance(P("plus"), at(-1, 0), at(0, 0.7))
    assert res.distance == 0.0


def test_plus_point_pair_equals_brute_force():
    a, b = at(0.2, 0.1), at(7.9, -2.3)
    got = smocked_distance(P("plus"), a, b)
    want = brute_force_distance(P("plus"), a, b, max_jumps=9)
    assert got.distance == pytest.approx(want.distance, abs=1e-9)
    check_witness(P("plus"), got, a, b)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_engine_matches_brute_force(name):
    p = P(name)
    rng = np.random.default_rng(hash(name) % 2**32)
    delta = separation(p)
    pairs = [(rng.uniform(-5, 5, 2), rng.uniform(-5, 5, 2)) for _ in range(150)]
    pairs += [(rng.uniform(-15, 15, 2), rng.uniform(-15, 15, 2)) for _ in range(15)]
    for u, v in pairs:
        a, b = at(*u), at(*v)
        got = smocked_distance(p, a, b)
        want = brute_force_distance(p, a, b, math.ceil(math.dist(u, v) / delta))
        assert got.distance == pytest.approx(want.distance, abs=1e-9), (u, v)
        check_witness(p, got, a, b)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_stitch_to_stitch_matches_brute_force(name):
    p = P(name)
    rng = np.random.default_rng(7)
    delta = separation(p)
    for _ in range(20):
        s, t = rng.integers(-4, 5, (2, 2))
        a = of((*s, p.slots[rng.integers(len(p.slots))]))
        b = of((*t, p.slots[rng.integers(len(p.slots))]))
        got = smocked_distance(p, a, b)
        D = math.ceil(got.distance / delta) + 1
        assert got.distance == pytest.approx(brute_force_distance(p, a, b, D).distance, abs=1e-9)
        check_witness(p, got, a, b)


@given(small, small, small, small)
def test_symmetry_is_exact(x1, y1, x2, y2):
    for name in ("plus", "checkered"):
        p = P(name)
        a, b = at(x1, y1), at(x2, y2)
        ab, ba = smocked_distance(p, a, b), smocked_distance(p, b, a)
        assert ab.distance == ba.distance
        assert ab.witness.nodes == tuple(reversed(ba.witness.nodes))


@given(small, small, small, small, st.integers(-3, 3), st.integers(-3, 3))
def test_translation_invariance(x1, y1, x2, y2, n1, n2):
    p = P("woven")
    u, v = np.array(p.basis, float)
    shift = n1 * u + n2 * v
    d0 = distance_value(p, at(x1, y1), at(x2, y2))
    d1 = distance_value(p, at(x1 + shift[0], y1 + shift[1]), at(x2 + shift[0], y2 + shift[1]))
    assert d1 == pytest.approx(d0, abs=1e-9)


@given(small, small, small, small)
def test_bounded_by_euclidean(x1, y1, x2, y2):
    d = distance_value(P("diamond"), at(x1, y1), at(x2, y2))
    assert 0 <= d <= math.hypot(x1 - x2, y1 - y2) + 1e-12


@given(small, small, small, small)
def test_pulled_thread_closed_form(x1, y1, x2, y2):
    p = interval_pattern((-1, 0.5), (2, 1))
    d = distance_value(p, at(x1, y1), at(x2, y2))
    assert d == pytest.approx(pulled_thread_distance(p.stitch((0, 0, 0)), (x1, y1), (x2, y2)), abs=1e-9)


def test_pattern_without_stitches_is_euclidean():
    empty = SmockingPattern((), None)
    assert smocked_distance(empty, at(0, 0), at(3, 4)).distance == 5.0
    with pytest.raises(DomainError):
        smocked_distance(empty, of((0, 0, 0)), at(1, 1))


def test_unknown_slot_and_offlattice_stitch():
    with pytest.raises(DomainError):
        smocked_distance(interval_pattern(), of((1, 0, 0)), at(0, 0))


def test_canonical_snaps_points_on_stitches():
    p = P("bumpy")
    assert canonical(p, at(0.5, 0)) == of((0, 0, 0))
    assert canonical(p, at(0.5, 0.5)).kind == "point"


def test_brute_force_budget():
    with pytest.raises(BudgetExceeded):
        brute_force_distance(P("diamond"), at(-12, -9), at(12, 9), 30, budget=10)


def test_distance_table_matches_single_queries():
    p = P("checkered")
    ids = [StitchId(a, b, s) for a in range(-2, 3) for b in range(-2, 2) for s in (0, 1)]
    table = stitch_distance_table(p, ids[:10], ids)
    for i in range(10):
        for j in range(0, len(ids), 7):
            assert table[i, j] == pytest.approx(smocked_distance(p, of(ids[i]), of(ids[j])).distance,
                                                abs=1e-12)


def test_pairwise_values_match():
    p = P("plus")
    rng = np.random.default_rng(2)
    pairs = [(at(*rng.uniform(-9, 9, 2)), at(*rng.uniform(-9, 9, 2))) for _ in range(30)]
    vals = pairwise_values(p, pairs)
    for (a, b), v in zip(pairs, vals):
        assert v == pytest.approx(smocked_distance(p, a, b).distance, abs=1e-12)


def test_property_checks_pass(builtin):
    rep = metric_axiom_check(builtin, 60, seed=5)
    assert rep.ok, rep.violations[:3]
    assert rep.stats["min_triangle_slack"] >= -1e-9
    rep = one_stitch_property_check(builtin, 60, seed=5)
    assert rep.ok and rep.samples == 60


def test_property_checks_on_finite_pattern():
    p = interval_pattern((0, 0), (3, 0))
    assert metric_axiom_check(p, 50, seed=1).ok
