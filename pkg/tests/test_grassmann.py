"""Grassmann 距离: 夹逼不等式、乘积不变性、单调性、图像界与切空间"""
import math

import numpy as np
import pytest

from src.core.errors import DegenerateChartError, DomainError, GrassmannInputError
from src.core.grassmann import (
    Chart, LinearMap, Subspace, dist_subspace, dist_vec_subspace, dtilde, graph_of_linear_map,
    dtilde_batch, dist_subspace_batch, graph_frames, operator_norm_batch, product_with_line, product_with_line_batch,
    random_frames, random_linear_map, random_map_images, random_subspace, tangent_space,
)

SLACK = 1e-9
DIMS = range(2, 7)


def random_line(n, rng):
    return Subspace.span(rng.standard_normal(n))


# ============ 具体例子 ============

def test_vector_to_line():
    v = np.array([1.0, 1.0]) / math.sqrt(2)
    assert dist_vec_subspace(v, Subspace.span([[1.0], [0.0]])) == pytest.approx(math.sqrt(2) / 2)
    assert dist_vec_subspace(v, Subspace.zero(2)) == 1.0
    assert dist_vec_subspace(v, Subspace.full(2)) == pytest.approx(0.0, abs=1e-15)


def test_non_unit_vector_is_rejected():
    with pytest.raises(GrassmannInputError):
        dist_vec_subspace([1.0, 1.0], Subspace.full(2))
    with pytest.raises(GrassmannInputError):
        dist_vec_subspace([1.0, 0.0, 0.0], Subspace.full(2))


def test_dtilde_examples():
    e1 = Subspace.span([1.0, 0.0])
    e2 = Subspace.span([0.0, 1.0])
    assert dtilde(e1, e2) == pytest.approx(math.sqrt(2))
    rotated = Subspace.span([math.cos(math.pi / 3), math.sin(math.pi / 3)])
    assert dtilde(e1, rotated) == pytest.approx(1.0)
    # 方向取反不改变直线
    assert dtilde(e1, Subspace.span([-1.0, 0.0])) == pytest.approx(0.0, abs=1e-15)


def test_dtilde_needs_lines():
    with pytest.raises(GrassmannInputError):
        dtilde(Subspace.full(2), Subspace.span([1.0, 0.0]))
    with pytest.raises(GrassmannInputError):
        dtilde(Subspace.span([1.0, 0.0]), Subspace.span([1.0, 0.0, 0.0]))


def test_degenerate_dimensions():
    assert dist_subspace(Subspace.zero(3), Subspace.full(3)) == 0.0
    assert dist_subspace(Subspace.span([1.0, 0.0, 0.0]), Subspace.zero(3)) == 1.0
    with pytest.raises(GrassmannInputError):
        dist_subspace(Subspace.full(2), Subspace.full(3))


def test_bad_frames():
    with pytest.raises(GrassmannInputError):
        Subspace(np.ones(3))
    with pytest.raises(GrassmannInputError):
        Subspace(np.eye(3)[:2])
    with pytest.raises(GrassmannInputError):
        Subspace(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(GrassmannInputError):
        Subspace.span([])


def test_linear_map_must_land_in_the_complement():
    E = Subspace.span([1.0, 0.0])
    with pytest.raises(GrassmannInputError):
        LinearMap(E, np.array([[1.0], [0.0]]))
    l = LinearMap.from_matrix(E, np.array([[3.0, 0.0], [2.0, 0.0]]))
    assert l.operator_norm == pytest.approx(2.0)
    assert np.allclose(l(np.array([1.0, 0.0])), [0.0, 2.0])


def test_graph_of_zero_map_is_the_domain():
    rng = np.random.default_rng(0)
    E = random_subspace(4, 2, rng)
    zero = LinearMap(E, np.zeros((4, 2)))
    assert dist_subspace(graph_of_linear_map(zero), E) == pytest.approx(0.0, abs=1e-12)


# ============ 随机性质 (每个 n 一万组) ============

INSTANCES = 10_000


def by_dims(draws):
    """按维数组合分组，返回 [(dims, 个数)]"""
    keys, counts = np.unique(draws, axis=0, return_counts=True)
    return [(tuple(int(x) for x in key), int(c)) for key, c in zip(keys, counts)]


@pytest.mark.parametrize("n", DIMS)
def test_batch_distance_agrees_with_single_pairs(n):
    rng = np.random.default_rng(50 + n)
    for k, j in [(1, 1), (1, n), (n - 1, 1), (2, n - 1)]:
        P, Q = random_frames(n, k, 50, rng), random_frames(n, j, 50, rng)
        batch = dist_subspace_batch(P, Q)
        single = [dist_subspace(Subspace(p), Subspace(q)) for p, q in zip(P, Q)]
        np.testing.assert_allclose(batch, single, atol=1e-12, rtol=0)
        lifted = product_with_line_batch(P)
        assert dist_subspace(product_with_line(Subspace(P[0])), Subspace(lifted[0])) == pytest.approx(0.0, abs=1e-12)
    E = random_frames(n, 1, 20, rng)
    F = random_map_images(E, rng, 0.5)
    for e, f, g, norm in zip(E, F, graph_frames(E, F), operator_norm_batch(F)):
        l = LinearMap(Subspace(e), f)
        assert dist_subspace(Subspace(g), graph_of_linear_map(l)) == pytest.approx(0.0, abs=1e-12)
        assert norm == pytest.approx(l.operator_norm)
    f = random_linear_map(Subspace(E[0]), rng)
    g = graph_frames(E[:1], f.images[np.newaxis])
    assert dist_subspace(Subspace(g[0]), graph_of_linear_map(f)) == pytest.approx(0.0, abs=1e-12)
    assert np.all(dist_subspace_batch(np.zeros((3, n, 0)), random_frames(n, 1, 3, rng)) == 0.0)
    assert np.all(dist_subspace_batch(random_frames(n, 1, 3, rng), np.zeros((3, n, 0))) == 1.0)


def test_batch_shapes_are_checked():
    rng = np.random.default_rng(0)
    with pytest.raises(GrassmannInputError):
        dist_subspace_batch(random_frames(3, 1, 4, rng), random_frames(4, 1, 4, rng))
    with pytest.raises(GrassmannInputError):
        dist_subspace_batch(np.zeros((4, 3)), random_frames(3, 1, 4, rng))
    with pytest.raises(GrassmannInputError):
        dtilde_batch(np.zeros((4, 3)), np.zeros((4, 2)))


@pytest.mark.parametrize("n", DIMS)
def test_sandwich_for_lines(n):
    rng = np.random.default_rng(100 + n)
    U, W = random_frames(n, 1, INSTANCES, rng), random_frames(n, 1, INSTANCES, rng)
    d = dist_subspace_batch(U, W)
    dt = dtilde_batch(U[:, :, 0], W[:, :, 0])
    assert np.all(dt / math.sqrt(2) <= d + SLACK)
    assert np.all(d <= dt + SLACK)


@pytest.mark.parametrize("n", DIMS)
def test_product_with_a_line_preserves_distance(n):
    rng = np.random.default_rng(200 + n)
    total = 0
    for (kv, kw), count in by_dims(rng.integers(0, n + 1, size=(INSTANCES, 2))):
        V, W = random_frames(n, kv, count, rng), random_frames(n, kw, count, rng)
        lifted = dist_subspace_batch(product_with_line_batch(V), product_with_line_batch(W))
        np.testing.assert_allclose(lifted, dist_subspace_batch(V, W), atol=SLACK, rtol=0)
        total += count
    assert total == INSTANCES


@pytest.mark.parametrize("n", DIMS)
def test_distance_shrinks_as_the_target_grows(n):
    rng = np.random.default_rng(300 + n)
    kp, kq = rng.integers(1, n + 1, size=(2, INSTANCES))
    j = np.floor(rng.random(INSTANCES) * (kq + 1)).astype(int)
    for (a, b, c), count in by_dims(np.column_stack([kp, kq, j])):
        P, Q = random_frames(n, a, count, rng), random_frames(n, b, count, rng)
        assert np.all(dist_subspace_batch(P, Q) <= dist_subspace_batch(P, Q[:, :, :c]) + SLACK)


@pytest.mark.parametrize("n", DIMS)
def test_metric_axioms_in_a_fixed_grassmannian(n):
    rng = np.random.default_rng(400 + n)
    for (k,), count in by_dims(rng.integers(1, n, size=(INSTANCES, 1))):
        P, Q, R = (random_frames(n, k, count, rng) for _ in range(3))
        pq, qp = dist_subspace_batch(P, Q), dist_subspace_batch(Q, P)
        assert np.all(dist_subspace_batch(P, P) <= SLACK)
        assert np.all(np.abs(pq - qp) <= SLACK)
        assert np.all(dist_subspace_batch(P, R) <= pq + dist_subspace_batch(Q, R) + SLACK)


@pytest.mark.parametrize("n", DIMS)
def test_graphs_of_nearby_maps_are_nearby(n):
    rng = np.random.default_rng(500 + n)
    for (k,), count in by_dims(rng.integers(1, n, size=(INSTANCES, 1))):
        E = random_frames(n, k, count, rng)
        F = random_map_images(E, rng, rng.uniform(0.01, 2.0, count))
        G = random_map_images(E, rng, rng.uniform(0.01, 2.0, count))
        gap = dist_subspace_batch(graph_frames(E, F), graph_frames(E, G))
        assert np.all(gap <= 2 * operator_norm_batch(F - G) + SLACK)


# ============ 切空间 ============

def test_tangent_of_a_parabola():
    chart = Chart.from_expressions(["y", "y**2"], ["y"], label="parabola")
    at_zero = tangent_space(chart, [0.0])
    assert dist_subspace(at_zero, Subspace.span([1.0, 0.0])) == pytest.approx(0.0, abs=1e-12)
    at_one = tangent_space(chart, [1.0])
    expected = Subspace.span(np.array([1.0, 2.0]) / math.sqrt(5))
    assert dist_subspace(at_one, expected) == pytest.approx(0.0, abs=1e-12)


def test_finite_difference_jacobian_agrees_with_sympy():
    exact = Chart.from_expressions(["u", "v", "u*v + u**3"], ["u", "v"])
    numeric = Chart(lambda w: np.array([w[0], w[1], w[0] * w[1] + w[0] ** 3]), 2, 3)
    x = [0.3, -0.7]
    assert dist_subspace(tangent_space(exact, x), tangent_space(numeric, x)) < 1e-6


def test_tangent_outside_the_domain():
    chart = Chart.from_expressions(["t", "t**2"], ["t"], ["t > 0"], label="half")
    with pytest.raises(DomainError):
        tangent_space(chart, [-1.0])


def test_rank_deficient_chart():
    chart = Chart.from_expressions(["t**3", "t**2"], ["t"], label="cusp")
    with pytest.raises(DegenerateChartError):
        tangent_space(chart, [0.0])


def test_simplex_chart_and_products():
    chart = Chart.for_simplex([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], label="tri")
    assert chart.contains([0.2, 0.3])
    assert not chart.contains([0.8, 0.3])
    assert tangent_space(chart, [0.2, 0.3]).k == 2
    prism = chart.product_interval()
    assert prism.dim == 3 and prism.ambient_dim == 3
    assert np.allclose(prism([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5])
    assert not prism.contains([0.2, 0.3, 1.5])
    lid = chart.product_point(1.0)
    assert np.allclose(lid([0.2, 0.3]), [0.2, 0.3, 1.0])
    assert dist_subspace(tangent_space(lid, [0.2, 0.3]),
                         Subspace(np.eye(3)[:, :2])) == pytest.approx(0.0, abs=1e-12)
