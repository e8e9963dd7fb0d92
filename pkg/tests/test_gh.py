import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial.distance import cdist

from smock import PreconditionError, builtin_pattern, interval_pattern
from smock.gh import (Correspondence, FiniteMetricSample, RescaleReport, RescaleRow,
                      convergence_experiment, correspondence_distortion, gh_upper_bound,
                      hausdorff_distance, norm_halfwidth, norm_metric,
                      rescaled_ball_distortion, rescaled_ball_sample,
                      smocked_distance_matrix, taxicab)
from smock.metric import MetricNode, pairwise_values
from smock.norms import NormSpec
from smock.pattern import SmockingPattern

EMPTY = SmockingPattern((), None)


def taxi_samples(n=100, seed=0):
    pts = np.random.default_rng(seed).integers(-50, 50, size=(n, 2)).astype(float)
    full = FiniteMetricSample.from_points(pts, taxicab)
    half = FiniteMetricSample.from_points(2 * pts, lambda a, b: taxicab(a, b) / 2)
    return full, half


def test_taxi_doubling_is_an_isometry():
    x, y = taxi_samples()
    c = Correspondence.identity(100)
    assert correspondence_distortion(c, x, y) == 0.0
    assert gh_upper_bound(c, x, y) == 0.0


def test_identity_on_identical_samples():
    x, _ = taxi_samples(30, 1)
    assert correspondence_distortion(Correspondence.identity(30), x, x) == 0.0


@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=1, max_size=40),
       st.integers(0, 99))
def test_distortion_symmetry_and_monotonicity(extra, seed):
    rng = np.random.default_rng(seed)
    x = FiniteMetricSample.from_points(rng.normal(size=(10, 2)), cdist)
    y = FiniteMetricSample.from_points(rng.normal(size=(10, 2)), taxicab)
    base = Correspondence.identity(10)
    bigger = Correspondence(base.pairs + tuple(extra))
    d0 = correspondence_distortion(base, x, y)
    d1 = correspondence_distortion(bigger, x, y)
    assert d1 >= d0
    assert correspondence_distortion(bigger.reversed(), y, x) == d1


def test_correspondence_must_cover():
    x, y = taxi_samples(5)
    with pytest.raises(PreconditionError):
        correspondence_distortion(Correspondence(((0, 0), (1, 1))), x, y)
    with pytest.raises(PreconditionError):
        correspondence_distortion(Correspondence(()), x, y)
    with pytest.raises(PreconditionError):
        correspondence_distortion(Correspondence(((0, 7),)), x, y)


def test_sample_validation():
    with pytest.raises(ValueError):
        FiniteMetricSample([0, 1], np.array([[0, 1], [2, 0]]))
    with pytest.raises(ValueError):
        FiniteMetricSample([0, 1], np.array([[1, 1], [1, 0]]))
    with pytest.raises(ValueError):
        FiniteMetricSample([0], np.zeros((2, 2)))
    bad = FiniteMetricSample([0, 1, 2], np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], float))
    assert bad.triangle_defect() == 3


def test_hausdorff():
    a = np.array([[0.0, 0.0]])
    assert hausdorff_distance(a, a) == 0
    assert hausdorff_distance(a, np.array([[0.0, 0.0], [2.5, 0.0]])) == 2.5
    assert hausdorff_distance(a, np.array([[1.0, 1.0]]), taxicab) == 2
    with pytest.raises(ValueError):
        hausdorff_distance(a, np.empty((0, 2)))


@pytest.mark.parametrize("name", ["plus", "woven", "checkered"])
def test_matrix_matches_pairwise_queries(name):
    p = builtin_pattern(name)
    pts = np.random.default_rng(5).uniform(-4, 4, (25, 2))
    M = smocked_distance_matrix(p, pts, 12.0)
    nodes = [MetricNode.at(*q) for q in pts]
    pairs = [(nodes[i], nodes[j]) for i in range(25) for j in range(i + 1, 25)]
    want = pairwise_values(p, pairs)
    got = M[np.triu_indices(25, 1)]
    assert np.max(np.abs(got - want)) <= 1e-12
    assert np.array_equal(M, M.T) and np.all(np.diag(M) == 0)


def test_matrix_without_stitches_is_euclidean():
    pts = np.random.default_rng(0).normal(size=(10, 2))
    assert np.array_equal(smocked_distance_matrix(EMPTY, pts, 10.0), cdist(pts, pts))


def test_pulled_thread_rescaling():
    p = interval_pattern((-0.5, 0.0), (0.5, 0.0))
    L = 1.0
    rng = np.random.default_rng(2)
    a, b = rng.uniform(-1, 1, (2, 40, 2))
    for R in (4.0, 16.0, 64.0):
        pairs = [(MetricNode.at(*(R * u)), MetricNode.at(*(R * v))) for u, v in zip(a, b)]
        d = pairwise_values(p, pairs) / R
        assert np.all(np.abs(d - np.hypot(*(a - b).T)) <= L / R + 1e-12)


def test_thread_identity_pairing_distortion_at_most_length():
    p = interval_pattern((-1.0, 0.0), (1.0, 0.0))
    pts = np.random.default_rng(8).uniform(-3, 3, (40, 2))
    x = FiniteMetricSample(list(range(40)), smocked_distance_matrix(p, pts, 20.0))
    y = FiniteMetricSample.from_points(pts, cdist)
    assert correspondence_distortion(Correspondence.identity(40), x, y) <= 2.0


def test_norm_against_itself_is_exact():
    row = rescaled_ball_distortion(EMPTY, NormSpec.named("euclidean"), 1.0, 1.0, 0.1)
    assert row.epsilon <= 1e-12 and row.samples > 0


def test_coarse_grid_rejected():
    with pytest.raises(PreconditionError, match="at least 8"):
        rescaled_ball_sample(EMPTY, NormSpec.named("euclidean"), 1.0, 1.0, 0.3)


def test_halfwidths():
    assert norm_halfwidth(NormSpec.named("plus")) == pytest.approx(3.0)
    assert norm_halfwidth(NormSpec.named("woven")) == pytest.approx(2.0)
    assert norm_halfwidth(NormSpec.named("euclidean")) == pytest.approx(1.0)


def test_sample_lies_in_the_ball():
    p = builtin_pattern("woven")
    pts = rescaled_ball_sample(p, NormSpec.named("woven"), 4.0, 1.0, 0.1)
    nodes = [MetricNode.at(*q) for q in pts[::7]]
    from smock.gh import base_stitch
    c = base_stitch(p)
    d = pairwise_values(p, [(c, n) for n in nodes])
    assert np.all(d <= 4.0 + 1e-9)


def test_woven_rescaling_small_scales():
    rep = convergence_experiment(builtin_pattern("woven"), NormSpec.named("woven"),
                                 [2, 4, 8], 1.0, 0.1, K=8.0)
    assert rep.decreasing and rep.bounded
    for row in rep.rows:
        assert 0 <= row.epsilon <= row.bound
    assert rep.to_csv().splitlines()[0] == "R,epsilon,epsilon_times_R"


def test_single_scale_single_row():
    rep = convergence_experiment(EMPTY, NormSpec.named("euclidean"), [2], 1.0, 0.2)
    assert len(rep.rows) == 1 and rep.decreasing


def test_scales_must_ascend():
    with pytest.raises(ValueError):
        convergence_experiment(EMPTY, NormSpec.named("euclidean"), [4, 2], 1.0, 0.2)


def test_report_summary():
    rep = RescaleReport([RescaleRow(8, 0.25, 10), RescaleRow(16, 0.125, 10)], K=1.0)
    assert rep.decreasing and rep.max_scaled == 2.0 and rep.bounded
    assert rep.to_csv() == "R,epsilon,epsilon_times_R\n8,0.25,2\n16,0.125,2\n"
