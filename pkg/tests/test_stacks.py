"""栈三角剖分: 分离细分、K_p、H 的像定律与 Lipschitz 证书、紧化"""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.core.defnfun import FunctionHandle, StackPresentation
from src.core.errors import DomainError, PreconditionError, RefinementError, StackValidationError
from src.core.regularity import SequenceScheme, adjacent_pairs, weak_bilipschitz_inverse_check
from src.core.simplicial import Simplex, SimplicialComplex, as_float
from src.generators.gen_full import AT_INFINITY, COMPACTIFY_NOTE, triangulate
from src.generators.gen_stack import (
    BAND, GRAPH, build_H, build_polyhedral_complex, collapse_ratio_bound, compactify, decompactify,
    global_lipschitz_bound, image_law_check, lipschitz_bound_H, quasi_convexity_factor, refine_until_separated,
    subdivide_polyhedral, vertex_separation_check,
)
from src.utils.config import CheckerConfig, PipelineConfig, SchemeConfig

from conftest import line, stack2

UNIT = SimplicialComplex([Simplex.of((0,), (1,))], close=True)


@pytest.fixture
def touching():
    """η2 = y0(1 - y0) 在两端与 η1 = 0 相切"""
    return stack2(line(0, 1), "0", "y0*(1 - y0)")


@pytest.fixture
def parabola():
    return stack2(line(0, 1), "0", "y0**2 + 1")


# ============ 分离 ============

def test_separation_fails_on_the_unrefined_edge(touching):
    report = vertex_separation_check(*touching.functions, UNIT, seed=0)
    assert report.failures == [Simplex.of((0,), (1,))]
    assert report.verdicts[Simplex.of((0,))] == ("equal", None)


def test_one_subdivision_separates(touching):
    K = refine_until_separated(touching, UNIT, cap=8, seed=0)
    assert K.counts() == {0: 3, 1: 2}
    report = vertex_separation_check(*touching.functions, K, seed=0)
    assert report.ok
    assert report.verdicts[Simplex.of((0,), (Fraction(1, 2),))] == ("separated", (Fraction(1, 2),))


def test_refinement_cap(touching):
    with pytest.raises(RefinementError) as info:
        refine_until_separated(touching, UNIT, cap=0, seed=0)
    assert info.value.offending == [Simplex.of((0,), (1,))]


def test_polyhedral_complex_needs_separation(touching):
    with pytest.raises(PreconditionError):
        build_polyhedral_complex(touching, UNIT, seed=0)


# ============ K_p 与 H ============

def test_polyhedral_cells_of_the_triangle(triangle):
    P = build_polyhedral_complex(triangle, UNIT, seed=0)
    assert P.counts() == {GRAPH: 5, BAND: 2}
    collapsed = P.graph_cell(Simplex.of((0,)), 1)
    assert collapsed.levels == (1, 2)
    band = P.band_cell(Simplex.of((0,), (1,)), 1)
    assert {c.id for c in P.faces_of(band)} == {"g1:0", "g1:1", "g2:1", "b1:1", "g1:0.1", "g2:0.1"}
    assert set(band.vertices) == {(0, 0), (1, 0), (1, 1)}


def test_polyhedral_subdivision(triangle):
    P = build_polyhedral_complex(triangle, UNIT, seed=0)
    K = SimplicialComplex(subdivide_polyhedral(P))
    assert K.counts() == {0: 7, 1: 12, 2: 6}
    assert K.validate() == []


def test_H_is_the_identity_for_affine_functions(triangle):
    P = build_polyhedral_complex(triangle, UNIT, seed=0)
    H = build_H(P, triangle, certify=False)
    p = (Fraction(1, 2), Fraction(1, 4))
    assert H.forward(p) == p
    assert H.inverse(p) == p
    assert H.image_descriptors["b1:0.1"] == "b1[i0]"
    assert H.image_descriptors["g1:0"] == "g1[p0]"


def test_H_bends_the_graph(parabola):
    P = build_polyhedral_complex(parabola, UNIT, seed=0)
    H = build_H(P, parabola, certify=False)
    half = Fraction(1, 2)
    assert H.forward((half, Fraction(3, 2))) == (half, Fraction(5, 4))
    assert H.forward((half, Fraction(3, 4))) == (half, Fraction(5, 8))
    assert H.inverse((half, Fraction(5, 4))) == (half, Fraction(3, 2))
    with pytest.raises(DomainError):
        H.forward((half, Fraction(3)))


def test_triangle_triangulation(triangle, fast_config):
    tri = triangulate(triangle, ["top", "hyp"], fast_config)
    assert tri.complex.counts() == {0: 7, 1: 12, 2: 6}
    assert tri.complex.validate() == []
    assert set(tri.labels.values()) <= {c.id for c in triangle.cells()}
    assert tri.image_law.ok
    assert tri.verdict == "pass"
    assert sum(tri.memberships["top"].values()) > 0
    # 上边界的单形都在斜边上
    for s, inside in tri.memberships["hyp"].items():
        if inside:
            assert all(v[0] == v[1] for v in s.vertices)


def test_nonlinear_triangulation(parabola, fast_config):
    tri = triangulate(parabola, config=fast_config)
    assert tri.image_law.ok
    assert tri.image_law.max_roundtrip_error < 1e-9
    assert np.allclose(tri.ambient_map((Fraction(1, 2), Fraction(3, 2))), [0.5, 1.25])
    assert all(c.consistent for c in tri.certificates.values())
    assert tri.max_lipschitz() >= 1.0
    s = tri.complex.of_dim(2)[0]
    assert tri.lipschitz_at(s) > 0


def test_disk_triangulation(disk, fast_config):
    tri = triangulate(disk, ["upper"], fast_config)
    counts = tri.complex.counts()
    assert counts == {0: 11, 1: 22, 2: 12}
    assert counts[0] - counts[1] + counts[2] == 1
    assert tri.image_law.ok
    upper = [s for s, inside in tri.memberships["upper"].items() if inside]
    assert upper and all(tri.labels[s] in {"b1[i0]", "b1[i1]", "b1[p1]"} for s in upper)


def test_stack_validation_runs_first(fast_config):
    with pytest.raises(StackValidationError) as info:
        triangulate(stack2(line(0, 1), "1", "y0"), config=fast_config)
    assert not info.value.diagnostics.ok


def test_unbounded_base_is_rejected_above_dimension_one(fast_config):
    S = stack2(StackPresentation(1, intervals=[(0, None)]), "0", "1")
    with pytest.raises(PreconditionError):
        triangulate(S, config=fast_config)


def test_half_line_is_compactified(fast_config):
    S = StackPresentation(1, intervals=[(0, None)], cuts=[1], selected={"far": {"i+inf"}})
    tri = triangulate(S, ["far"], fast_config)
    assert COMPACTIFY_NOTE in tri.notes
    assert tri.labels[Simplex.of((1,))] == AT_INFINITY
    assert tri.ambient_map((Fraction(1, 2),)) == pytest.approx([0.5 / math.sqrt(0.75)])
    with pytest.raises(DomainError):
        tri.ambient_map((Fraction(1),))
    far = [s for s, inside in tri.memberships["far"].items() if inside]
    assert len(far) == 1 and far[0].dim == 1


# ============ 证书与拼接 ============

def test_collapse_ratio_bound():
    assert collapse_ratio_bound([0, 0], 3.0, 1.0) == 0.0
    assert collapse_ratio_bound([0, 2], 1.0, 1.0) == pytest.approx(0.5)
    assert collapse_ratio_bound([1, 2], 1.0, 1.0) == pytest.approx(2.0)


def test_quasi_convexity():
    bent = SimplicialComplex([Simplex.of((0, 0), (1, 0)), Simplex.of((1, 0), (1, 1))], close=True)
    assert quasi_convexity_factor(bent) == pytest.approx(math.sqrt(2))
    tri = SimplicialComplex([Simplex.of((0, 0), (1, 0), (0, 1))], close=True)
    assert quasi_convexity_factor(tri) == pytest.approx(1.0)


def test_global_bound_scales_the_cell_bounds(parabola, fast_config):
    tri = triangulate(parabola, config=fast_config)
    assert global_lipschitz_bound(tri.H, tri.complex) >= tri.H.max_bound()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=-1e3, max_value=1e3, allow_nan=False), min_size=1, max_size=3))
def test_compactify_round_trip(x):
    u = compactify(x)
    assert float(np.linalg.norm(u)) < 1.0
    assert decompactify(u) == pytest.approx(np.array(x), rel=1e-6, abs=1e-9)


def test_decompactify_outside_the_ball():
    with pytest.raises(DomainError):
        decompactify([1.0])
    with pytest.raises(DomainError):
        decompactify([0.8, 0.8])


# ============ 多种底上的 H: 差商界、逆向下极限、往返 ============

def layered_segment():
    """三个函数，η1 与 η2 在两端重合"""
    return stack2(line(0, 1), "0", "y0*(1 - y0)", "1 + y0**2")


def layered_triangle():
    """三角形底上的三个函数；η2 = y1(1 - y0) 在底边与右边上与 η1 重合"""
    base = stack2(line(0, 1), "0", "y0")
    functions = [
        FunctionHandle({"*": "0"}, 2, declared_lipschitz=0.0, name="floor"),
        FunctionHandle({"*": "y1*(1 - y0)"}, 2, declared_lipschitz=1.0, name="tent"),
        FunctionHandle({"*": "1 + y0*y1"}, 2, declared_lipschitz=1.5, name="roof"),
    ]
    return StackPresentation(3, base=base, functions=functions)


STACKS = {
    "parabola": lambda: stack2(line(0, 1), "0", "y0**2 + 1"),
    "touching": lambda: stack2(line(0, 1), "0", "y0*(1 - y0)"),
    "layered-segment": layered_segment,
    "layered-triangle": layered_triangle,
}


@pytest.fixture(scope="module", params=sorted(STACKS))
def triangulated(request):
    config = PipelineConfig(
        certificate_samples=8,
        compatibility_samples=200,
        certificate_scheme=SchemeConfig(directions=2, rates=(1.0,), levels=4, seed=0),
    )
    S = STACKS[request.param]()
    return S, triangulate(S, config=config)


def observed_quotient(P, forward, cell, rng, count):
    """闭胞腔内采样点对上 |H(p) - H(q)| / |p - q| 的最大值"""
    pts, images = [], []
    for p in P.sample_cell(cell, rng, count, closed=True):
        try:
            images.append(as_float(forward(tuple(float(v) for v in p))))
        except DomainError:
            continue
        pts.append(p)
    assert len(pts) >= 2
    pts, images = np.array(pts), np.array(images)
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    diff = np.linalg.norm(images[:, None, :] - images[None, :, :], axis=-1)
    mask = dist > 1e-9
    return float(np.max(diff[mask] / dist[mask])) if np.any(mask) else 0.0


def test_triangulated_stacks_cover_both_bases(triangulated):
    S, tri = triangulated
    counts = tri.complex.counts()
    assert tri.complex.dim == S.dim
    # 每个栈都可缩
    assert sum((-1) ** k * n for k, n in counts.items()) == 1


@pytest.mark.slow
def test_sampled_quotients_stay_below_the_cell_bounds(triangulated):
    S, tri = triangulated
    P, H = tri.polyhedral, tri.H
    rng = np.random.default_rng(7)
    for i, c in enumerate(P.cells):
        if c.dim == 0:
            continue
        cert = lipschitz_bound_H(P, S, c, forward=H.forward, samples=32, seed=i)
        observed = observed_quotient(P, H.forward, c, rng, 48)
        assert observed <= cert.bound * (1 + 1e-9) + 1e-9, c.id
        assert cert.consistent


@pytest.mark.slow
def test_round_trip_and_image_law_on_ten_thousand_points(triangulated):
    S, tri = triangulated
    report = image_law_check(tri.H, S, tri.polyhedral, samples=10_000, seed=3)
    assert report.forward_samples + report.inverse_samples >= 10_000
    assert report.ok, report.violations[:3]
    assert report.max_roundtrip_error <= 1e-9


@pytest.mark.slow
def test_inverse_quotient_stays_positive_on_adjacent_pairs(triangulated):
    _, tri = triangulated
    strat, _ = tri.stratification()
    scheme = SequenceScheme(SchemeConfig(directions=2, rates=(1.0,), levels=4, seed=0))
    checker = CheckerConfig()

    def f(a):
        return tri.ambient_map(tuple(float(v) for v in a))

    pairs = adjacent_pairs(strat)
    assert pairs
    for big, small in pairs:
        report = weak_bilipschitz_inverse_check(f, strat.pair(big, small), scheme, checker)
        assert report.statistic >= 1e-4, (big, small, report.notes)


def test_collapsed_faces_of_the_triangle_stack():
    S = layered_triangle()
    ids = {c.id for c in S.cells()}
    # 底边与右边上 η1 ≡ η2，没有带
    assert "b1[g1[i0]]" not in ids and "b1[b1[p1]]" not in ids
    assert "b1[b1[i0]]" in ids and "b2[g1[i0]]" in ids
    assert S.cell("g1[g1[i0]]").levels == (1, 2)
