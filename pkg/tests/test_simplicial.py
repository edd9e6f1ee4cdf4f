"""单纯复形: 精确重心坐标、面格、重心细分组合数与星形细分"""
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.core.errors import DegenerateSimplexError, DomainError
from src.core.simplicial import (
    IndexedComplex, Simplex, SimplicialComplex, barycentric_subdivision, barycentric_subdivision_with_carriers,
    mean_point, skeleton, stellar_subdivision, subdivide,
)


def standard_simplex(d: int) -> Simplex:
    """ℝ^d 中的 conv{0, e_1, …, e_d}"""
    origin = (0,) * d
    basis = [tuple(1 if j == i else 0 for j in range(d)) for i in range(d)]
    return Simplex.of(origin, *basis)


def closed(s: Simplex) -> SimplicialComplex:
    return SimplicialComplex([s], close=True)


@st.composite
def interior_weights(draw, size):
    """正整数权重归一化后的有理重心坐标"""
    raw = draw(st.lists(st.integers(min_value=1, max_value=50), min_size=size, max_size=size))
    total = sum(raw)
    return [Fraction(r, total) for r in raw]


TRIANGLE = Simplex.of((0, 0), (1, 0), (0, 1))


def test_vertices_are_sorted_and_exact():
    s = Simplex.of((1, 0), (0, 1), (0, 0))
    assert s.vertices == ((0, 0), (0, 1), (1, 0))
    assert s.exact
    assert all(isinstance(c, Fraction) for v in s.vertices for c in v)


def test_degenerate_simplices_are_rejected():
    with pytest.raises(DegenerateSimplexError):
        Simplex.of((0, 0), (1, 1), (2, 2))
    with pytest.raises(DegenerateSimplexError):
        Simplex.of((0, 0), (0, 0))
    with pytest.raises(DegenerateSimplexError):
        Simplex.of((0, 0), (1,))


@pytest.mark.parametrize("d", [0, 1, 2, 3, 4])
def test_face_count(d):
    s = standard_simplex(d) if d else Simplex.of((0,))
    assert len(s.faces()) == 2 ** (d + 1) - 1
    assert len(s.boundary()) == 2 ** (d + 1) - 2


def test_barycentric_coordinates_are_exact():
    p = (Fraction(1, 4), Fraction(1, 4))
    coords = TRIANGLE.barycentric_coordinates(p)
    assert coords == (Fraction(1, 2), Fraction(1, 4), Fraction(1, 4))
    assert TRIANGLE.contains(p)
    assert TRIANGLE.point_at(coords) == p


def test_closure_and_open_membership_on_an_edge():
    mid = (Fraction(1, 2), Fraction(1, 2))
    assert TRIANGLE.closure_contains(mid)
    assert not TRIANGLE.contains(mid)
    assert TRIANGLE.support(mid) == Simplex.of((1, 0), (0, 1))
    assert TRIANGLE.support((Fraction(1), Fraction(1))) is None


def test_point_off_the_affine_hull():
    edge = Simplex.of((0, 0), (1, 0))
    assert edge.barycentric_coordinates((Fraction(1, 2), Fraction(1, 3))) is None
    with pytest.raises(DomainError):
        edge.barycentric_coordinates((Fraction(1, 2),))


def test_closed_simplex_is_a_valid_complex():
    K = closed(TRIANGLE)
    assert K.counts() == {0: 3, 1: 3, 2: 1}
    assert K.validate() == []
    assert K.is_pure()
    assert K.maximal() == [TRIANGLE]


def test_missing_faces_are_reported():
    K = SimplicialComplex([TRIANGLE])
    issues = K.validate()
    assert issues and all(i.startswith("Face closure") for i in issues)


def test_overlapping_simplices_are_reported():
    a = Simplex.of((0, 0), (2, 0), (0, 2))
    b = Simplex.of((1, 0), (3, 0), (1, 2))
    issues = SimplicialComplex([a, b], close=True).validate()
    assert any(i.startswith("Disjointness") for i in issues)


def test_star_and_cofaces():
    K = closed(TRIANGLE)
    v = Simplex.of((0, 0))
    assert K.cofaces(v) == {Simplex.of((0, 0), (1, 0)), Simplex.of((0, 0), (0, 1)), TRIANGLE}
    assert K.star(v) == K.cofaces(v) | {v}


def test_components():
    K = SimplicialComplex([Simplex.of((0,), (1,)), Simplex.of((2,), (3,))], close=True)
    groups = K.components()
    assert len(groups) == 2
    assert sorted(len(g) for g in groups) == [2, 2]


def test_skeleton():
    K = closed(standard_simplex(3))
    assert skeleton(K, 1).counts() == {0: 4, 1: 6}
    assert K.skeleton(0).dim == 0
    with pytest.raises(ValueError):
        skeleton(K, -1)


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_subdivision_counts(d):
    s = standard_simplex(d)
    sub = barycentric_subdivision(closed(s))
    assert len(sub.of_dim(d)) == math.factorial(d + 1)
    assert len(sub.vertex_index) == 2 ** (d + 1) - 1
    assert sub.exact


@pytest.mark.parametrize("d", [1, 2, 3])
def test_subdivision_matches_flag_enumeration(d):
    """顶层单形恰为面旗 {v_π0} ⊂ {v_π0, v_π1} ⊂ … 的重心"""
    s = standard_simplex(d)
    expected = set()
    for perm in itertools.permutations(s.vertices):
        chain = [mean_point(perm[:k]) for k in range(1, d + 2)]
        expected.add(Simplex(tuple(chain)))
    sub = barycentric_subdivision(closed(s))
    assert set(sub.of_dim(d)) == expected


def test_subdivision_is_valid_and_carried():
    K = closed(TRIANGLE)
    carriers = barycentric_subdivision_with_carriers(K)
    sub = SimplicialComplex(carriers.keys())
    assert sub.validate() == []
    for t, carrier in carriers.items():
        assert carrier.contains(t.barycentre())


def test_zero_dimensional_subdivision_is_identity():
    K = SimplicialComplex([Simplex.of((0,)), Simplex.of((1,))])
    assert barycentric_subdivision(K) == K
    assert subdivide(K, 3) == K


def test_repeated_subdivision():
    assert len(subdivide(closed(TRIANGLE), 2).of_dim(2)) == 36


@settings(max_examples=40, deadline=None)
@given(weights=interior_weights(3))
def test_subdivision_preserves_the_polyhedron(weights):
    K = closed(TRIANGLE)
    sub = barycentric_subdivision(K)
    p = TRIANGLE.point_at(weights)
    cell = sub.locate(p)
    assert cell is not None
    assert cell.closure_contains(p)
    outside = (p[0] + 1, p[1])
    assert sub.locate(outside) is None
    assert K.locate(outside) is None


def test_stellar_subdivision_at_the_centroid():
    K = closed(TRIANGLE)
    centre = TRIANGLE.barycentre()
    split = stellar_subdivision(K, TRIANGLE, centre)
    assert split.counts() == {0: 4, 1: 6, 2: 3}
    assert split.validate() == []


def test_stellar_subdivision_of_an_edge():
    K = closed(TRIANGLE)
    edge = Simplex.of((1, 0), (0, 1))
    mid = edge.barycentre()
    split = stellar_subdivision(K, edge, mid)
    assert split.counts() == {0: 4, 1: 5, 2: 2}
    assert edge not in split
    with pytest.raises(DomainError):
        stellar_subdivision(K, edge, (Fraction(0), Fraction(0)))


def test_indexed_complex_round_trip():
    K = closed(TRIANGLE)
    IK = IndexedComplex.from_simplicial(K)
    assert IK.validate() == []
    assert IK.to_simplicial() == K
    mid = IK.point({0: Fraction(1, 2), 1: Fraction(1, 2)})
    assert mid == mean_point([K.vertex_index[0], K.vertex_index[1]])
    assert np.allclose(IK.point({0: 0.25, 2: 0.75}), 0.25 * np.array([0.0, 0.0]) + 0.75 * np.array([1.0, 0.0]))


def test_indexed_complex_without_coordinates():
    IK = IndexedComplex(2, frozenset({(0,), (1,), (0, 1)}))
    assert IK.dim == 1
    assert IK.validate() == []
    with pytest.raises(DomainError):
        IK.point({0: Fraction(1)})
    broken = IndexedComplex(2, frozenset({(0, 1)}))
    assert any("Face closure" in i for i in broken.validate())


def test_to_dict_uses_vertex_indices():
    data = closed(TRIANGLE).to_dict()
    assert data["vertices"] == [["0", "0"], ["0", "1"], ["1", "0"]]
    assert [0, 1, 2] in data["simplices"]
