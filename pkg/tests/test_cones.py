"""锥胞腔、锥复形 K₃ 与锥形延拓 h₃"""
from fractions import Fraction

import numpy as np
import pytest

from src.core.errors import DegenerateConeError, DomainError, IncidenceError
from src.core.simplicial import IndexedComplex, Simplex, SimplicialComplex, as_float, skeleton
from src.generators.gen_cone import ConeCell, build_K3, cone, conical_extension_h3, semilinear_iso_f
from src.generators.gen_full import q_triangulate_complex, simplicial_map

TRIANGLE = Simplex.of((0, 0), (1, 0), (0, 1))


@pytest.fixture
def k1():
    return SimplicialComplex([TRIANGLE], close=True)


@pytest.fixture
def cone_data(k1):
    """骨架作 K₂ (h₂ 为单纯映射) 时的 K₃, f 与 h₂∘f"""
    skel = skeleton(k1, 1)
    K2 = IndexedComplex.from_simplicial(skel)
    h2 = simplicial_map(skel, K2)
    K3 = build_K3(k1, K2, h2)
    f = semilinear_iso_f(K3, K2)
    return K3, f, h2.compose(f)


# ============ 锥胞腔 ============

def test_cone_over_an_edge():
    edge = Simplex.of((0, 0), (1, 0))
    c = cone((0, 1), edge)
    assert c.dim == 2
    assert c.point((Fraction(1), Fraction(0)), Fraction(1, 2)) == (Fraction(1, 2), Fraction(1, 2))
    assert c.contains((Fraction(1, 4), Fraction(1, 4)))
    assert not c.contains((Fraction(1, 2), Fraction(0)))
    assert c.closure_contains((Fraction(1, 2), Fraction(0)))
    assert c.as_simplex() == TRIANGLE
    assert np.allclose(c.chart()([0.5, 0.5]), [0.25, 0.5])


def test_cone_vertex_in_the_span_is_rejected():
    edge = Simplex.of((0, 0), (1, 0))
    with pytest.raises(DegenerateConeError):
        cone((2, 0), edge)
    with pytest.raises(DegenerateConeError):
        ConeCell((Fraction(0), Fraction(1), Fraction(0)), edge)


# ============ K₃ ============

def test_K3_of_a_single_triangle(cone_data):
    K3, _, _ = cone_data
    assert K3.T == 4
    assert K3.alpha == 3
    assert K3.counts() == {"L": 6, "apex": 1, "joined": 6}
    assert K3.validate() == []
    assert K3.apex_of((0, 1, 3)) == 3
    assert K3.apex_of((0, 1)) is None
    assert K3.complex.dim == 2


def test_K3_counts_after_subdivision(k1):
    from src.core.simplicial import barycentric_subdivision

    K1 = barycentric_subdivision(k1)
    skel = skeleton(K1, 1)
    K2 = IndexedComplex.from_simplicial(skel)
    K3 = build_K3(K1, K2, simplicial_map(skel, K2))
    assert K3.T == 13
    assert K3.counts() == {"L": 19, "apex": 6, "joined": 36}
    assert K3.validate() == []


def test_misplaced_skeleton_raises(k1):
    far = skeleton(SimplicialComplex([Simplex.of((5, 0), (6, 0), (5, 1))], close=True), 1)
    K2 = IndexedComplex.from_simplicial(far)
    with pytest.raises(IncidenceError):
        build_K3(k1, K2, simplicial_map(far, K2))


def test_f_is_defined_on_L_only(cone_data):
    K3, f, _ = cone_data
    assert f.forward({0: Fraction(1, 2), 1: Fraction(1, 2)}) == {0: Fraction(1, 2), 1: Fraction(1, 2)}
    with pytest.raises(DomainError):
        f.forward({0: Fraction(1, 2), 3: Fraction(1, 2)})
    assert all(c.bound == pytest.approx(c.sampled) for c in f.lipschitz_certificates.values())


# ============ h₃ ============

def test_apex_goes_to_the_barycentre(cone_data):
    K3, _, h2f = cone_data
    h3 = conical_extension_h3(K3, h2f)
    third = Fraction(1, 3)
    assert h3.forward({3: Fraction(1)}) == (third, third)
    assert h3.inverse((third, third)) == {3: Fraction(1)}


def test_h3_on_a_cone_segment(cone_data):
    K3, _, h2f = cone_data
    h3 = conical_extension_h3(K3, h2f)
    half = Fraction(1, 2)
    p = h3.forward({3: half, 0: half})
    assert p == (Fraction(1, 6), Fraction(1, 6))
    assert h3.inverse(p) == {0: half, 3: half}


def test_h3_on_L_agrees_with_h2(cone_data):
    K3, _, h2f = cone_data
    h3 = conical_extension_h3(K3, h2f)
    w = {0: Fraction(1, 2), 2: Fraction(1, 2)}
    assert h3.forward(w) == h2f.forward(w) == (Fraction(1, 2), Fraction(0))
    assert h3.inverse((Fraction(1, 2), Fraction(0))) == w


def test_h3_round_trip_on_joined_simplices(cone_data):
    K3, _, h2f = cone_data
    h3 = conical_extension_h3(K3, h2f)
    rng = np.random.default_rng(0)
    for s in K3.complex.of_dim(2):
        if K3.apex_of(s) is None:
            continue
        for row in rng.dirichlet(np.ones(3), size=20):
            w = {i: float(v) for i, v in zip(s, row)}
            back = h3.inverse(h3.forward(w))
            for i in set(w) | set(back):
                assert back.get(i, 0.0) == pytest.approx(w.get(i, 0.0), abs=1e-9)


def test_custom_cone_points(cone_data):
    K3, _, h2f = cone_data
    quarter = Fraction(1, 4)
    h3 = conical_extension_h3(K3, h2f, barycentres={3: (quarter, quarter)})
    assert h3.forward({3: Fraction(1)}) == (quarter, quarter)
    with pytest.raises(DegenerateConeError):
        conical_extension_h3(K3, h2f, barycentres={3: (Fraction(1), Fraction(0))})


def test_mixed_apexes_are_rejected(k1):
    from src.core.simplicial import barycentric_subdivision

    K1 = barycentric_subdivision(k1)
    skel = skeleton(K1, 1)
    K2 = IndexedComplex.from_simplicial(skel)
    h2 = simplicial_map(skel, K2)
    K3 = build_K3(K1, K2, h2)
    h3 = conical_extension_h3(K3, h2.compose(semilinear_iso_f(K3, K2)))
    apexes = sorted(K3.apexes)
    with pytest.raises(DomainError):
        h3.forward({apexes[0]: Fraction(1, 2), apexes[1]: Fraction(1, 2)})


def test_certificates(cone_data):
    K3, _, h2f = cone_data
    h3 = conical_extension_h3(K3, h2f, certify=True, samples=8)
    certs = h3.lipschitz_certificates
    assert set(certs) == {".".join(map(str, s)) for s in K3.complex.sorted_simplices() if len(s) > 1}
    for cert in certs.values():
        assert cert.method == "edge-norm"
        assert cert.consistent
    # 边上 h₃ 仿射，采样差商与边范数一致
    assert certs["0.2"].bound == pytest.approx(1 / np.sqrt(2))
    assert certs["0.3"].bound == pytest.approx(1 / 3)
    assert certs["0.3"].sampled == pytest.approx(certs["0.3"].bound)


def test_certificates_after_subdivision(k1):
    from src.core.simplicial import barycentric_subdivision

    K1 = barycentric_subdivision(k1)
    skel = skeleton(K1, 1)
    K2 = IndexedComplex.from_simplicial(skel)
    K3 = build_K3(K1, K2, simplicial_map(skel, K2))
    h3 = conical_extension_h3(K3, simplicial_map(skel, K2).compose(semilinear_iso_f(K3, K2)), certify=True,
                              samples=32, seed=5)
    assert all(c.sampled <= c.bound * (1 + 1e-9) + 1e-12 for c in h3.lipschitz_certificates.values())
    assert max(c.bound for c in h3.lipschitz_certificates.values()) > 0


# ============ 复形的 Q-三角剖分 ============

def test_q_triangulate_complex_of_a_flat_triangle(k1, fast_config):
    result = q_triangulate_complex(k1, as_float, "whitney-b", fast_config)
    assert result.residuals == []
    assert result.cone is not None and result.cone.T == 4
    assert result.complex.validate() == []
    third = Fraction(1, 3)
    assert result.h.forward({3: Fraction(1)}) == (third, third)


def test_q_triangulate_complex_base_case(fast_config):
    K = SimplicialComplex([Simplex.of((0,), (1,))], close=True)
    result = q_triangulate_complex(K, as_float, "whitney-b", fast_config)
    assert result.cone is None
    assert result.complex.of_dim(1) == [(0, 1)]
    assert result.h.forward({0: Fraction(1, 2), 1: Fraction(1, 2)}) == (Fraction(1, 2),)
