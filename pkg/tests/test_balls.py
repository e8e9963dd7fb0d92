import math

import numpy as np
import pytest

from smock import PreconditionError, StitchId, builtin_pattern, interval_pattern
from smock.balls import (BitRaster, ball_raster, ball_shape_probe_plus, disk_raster,
                         frontier_stitches, growth_check, outside_margin, raster_dilate,
                         tube_raster)
from smock.constants import separation_factor
from smock.metric import MetricNode
from smock.pattern import BUILTIN_NAMES, BoundingBox, distances_to_set
from smock.render import raster_to_pgm, svg_document

P = builtin_pattern
of = MetricNode.of
at = MetricNode.at


def index_set(pattern, fs):
    return {tuple(int(round(c)) for c in pattern.index_point(s)) for s in fs.ids}


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_ball_about_stitch_below_delta_is_tube(name):
    p = P(name)
    r = 0.95 * separation_factor(p)
    c = of((0, 0, p.slots[0]))
    ball = ball_raster(p, c, r, spacing=r / 100)
    tube = tube_raster(p.stitch(c.stitch).array, r, ball)
    assert np.array_equal(ball.bits, tube.bits)
    assert not ball.clipped


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_ball_about_point_below_depth_is_disk(name):
    p = P(name)
    rng = np.random.default_rng(4)
    pts = rng.uniform(-3, 3, (40, 2))
    D = distances_to_set(p, pts)[0]
    k = int(np.argmax(D))
    r = 0.9 * D[k]
    ball = ball_raster(p, at(*pts[k]), r, spacing=r / 64)
    assert np.array_equal(ball.bits, disk_raster(pts[k], r, ball).bits)


def test_woven_radius_two_decomposes():
    p = P("woven")
    c = of((0, 0, 0))
    f1 = frontier_stitches(p, c, 1.0)
    assert index_set(p, f1) == {(2, 0), (0, 2), (-2, 0), (0, -2)}
    rep = growth_check(p, c, 1.0, 1.0)
    assert rep.ok and rep.mismatched <= 0.01 * rep.lhs_cells


def test_plus_frontier_at_one():
    p = P("plus")
    assert index_set(p, frontier_stitches(p, of((0, 0, 0)), 1.0)) == {(3, 0), (-3, 0), (0, 3), (0, -3)}


def test_bumpy_frontier_sequence():
    p = P("bumpy")
    c = of((0, 0, 0))
    assert index_set(p, frontier_stitches(p, c, 2.0)) == {(3, 0), (-3, 0), (0, 3), (0, -3)}
    assert index_set(p, frontier_stitches(p, c, math.sqrt(8))) == {(3, 3), (-3, 3), (3, -3), (-3, -3)}


def test_frontier_empty_below_nearest_stitch():
    assert frontier_stitches(P("plus"), at(1.5, 1.5), 0.2).ids == ()


@pytest.mark.parametrize("name, r, s, count", [("diamond", 1.0, 0.5, 6), ("woven", 2.0, 1.0, 8)])
def test_growth_worked_cases(name, r, s, count):
    rep = growth_check(P(name), of((0, 0, 0)), r, s)
    assert len(rep.frontier.ids) == count
    assert rep.ok, rep.unexplained[:5]


def test_growth_with_tiny_step_is_the_ball():
    p = P("checkered")
    rep = growth_check(p, of((0, 0, 0)), 1.2, 1e-9)
    assert rep.ok


def test_growth_step_beyond_margin_is_rejected():
    p = P("woven")
    m = outside_margin(p, of((0, 0, 0)), 2.0, 3.0)
    assert m.exact and m.value == pytest.approx(1.0)
    with pytest.raises(PreconditionError, match="stitch"):
        growth_check(p, of((0, 0, 0)), 2.0, 1.5)


def test_nested_balls():
    p = P("checkered")
    c = at(0.3, 0.7)
    big = ball_raster(p, c, 3.0, spacing=0.02)
    prev = None
    for r in (0.5, 1.0, 1.7, 2.4, 3.0):
        b = ball_raster(p, c, r, window=big.window, spacing=0.02)
        if prev is not None:
            assert not np.any(prev.bits & ~b.bits)
        prev = b


def test_dilation_identities():
    window = BoundingBox(-3, -3, 3, 3)
    blank = BitRaster.empty(window, 0.02)
    disk = disk_raster((0.1, -0.2), 1.0, blank)
    assert np.array_equal(raster_dilate(disk, 0).bits, disk.bits)
    grown = raster_dilate(disk, 0.5)
    target = disk_raster((0.1, -0.2), 1.5, blank)
    ring = np.abs(np.hypot(blank.xs()[None, :] - 0.1, blank.ys()[:, None] + 0.2) - 1.5) <= 2 * 0.02
    assert not np.any((grown.bits ^ target.bits) & ~ring)
    other = disk_raster((1.5, 1.0), 0.4, blank)
    union = blank.like(disk.bits | other.bits)
    assert np.array_equal(raster_dilate(union, 0.3).bits,
                          raster_dilate(disk, 0.3).bits | raster_dilate(other, 0.3).bits)


def test_lemma_inclusions():
    p = P("plus")
    x = (0.4, 1.3)
    window = BoundingBox(-6, -6, 6, 6)
    r, s = 1.5, 0.7
    b_r = ball_raster(p, at(*x), r, spacing=0.03, window=window)
    b_rs = ball_raster(p, at(*x), r + s, spacing=0.03, window=window)
    assert not np.any(disk_raster(x, r, b_r).bits & ~b_r.bits)
    assert not np.any(raster_dilate(b_r, s).bits & ~b_rs.bits)


def test_pulled_thread_sandwich():
    p = interval_pattern((-1, 0), (1, 0))
    L = 2.0
    for x, r in [((0.0, 1.0), 1.5), ((3.0, -0.5), 2.5), ((0.2, 0.0), 0.8)]:
        ball = ball_raster(p, at(*x), r, spacing=0.02, window=BoundingBox(-6, -6, 6, 6))
        assert not np.any(disk_raster(x, r, ball).bits & ~ball.bits)
        assert not np.any(ball.bits & ~disk_raster(x, r + L, ball).bits)


@pytest.mark.parametrize("r", [1.5, 4.0])
def test_plus_shape_probe(r):
    rep = ball_shape_probe_plus(P("plus"), r)
    assert rep.ok, rep.samples[:4]


def test_clipped_flag():
    ball = ball_raster(P("plus"), of((0, 0, 0)), 3.0, spacing=0.05, window=BoundingBox(-2, -2, 2, 2))
    assert ball.clipped


def test_outputs():
    p = P("woven")
    ball = ball_raster(p, of((0, 0, 0)), 1.0, spacing=0.05)
    pgm = raster_to_pgm(ball)
    header = f"P5\n{ball.width} {ball.height}\n255\n".encode()
    assert pgm.startswith(header) and len(pgm) == len(header) + ball.width * ball.height
    body = np.frombuffer(pgm[len(header):], np.uint8).reshape(ball.height, ball.width)
    assert np.array_equal(body[::-1] == 255, ball.bits)
    svg = svg_document(p, ball.window, [ball])
    assert svg.startswith("<!-- smock") and "<svg" in svg and 'stroke="black"' in svg


def test_bad_radius():
    with pytest.raises(ValueError):
        ball_raster(P("plus"), of((0, 0, 0)), 0.0)
    with pytest.raises(ValueError):
        raster_dilate(BitRaster.empty(BoundingBox(0, 0, 1, 1), 0.1), -1)
