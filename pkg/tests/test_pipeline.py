"""Q-三角剖分流水线: 状态图各阶段、子分层、相容性检查与生成器"""
from fractions import Fraction

import numpy as np
import pytest

from src.core.errors import ConditionFailureError, PipelineStageError
from src.core.regularity import FAIL, PASS
from src.core.simplicial import Simplex, SimplicialComplex, as_float
from src.generators.gen_full import (
    SURROGATE_NOTE, FullGenerator, compatibility_check, q_triangulate, substratify_refine,
)
from src.utils.mesh_export import mesh_from_q_triangulation

TRIANGLE = Simplex.of((0, 0), (1, 0), (0, 1))


def fixed_points(*points):
    def sample(rng, count):
        return [tuple(p) for p in points]

    return sample


# ============ 端到端 ============

@pytest.mark.slow
def test_q_triangulation_of_the_triangle(triangle, fast_config):
    stages = []
    q = q_triangulate(triangle, ["top", "hyp"], "whitney-b", fast_config,
                      on_progress=lambda stage, fraction: stages.append(stage))
    assert stages == ["triangulate", "substratify", "skeleton", "cone_complex", "extend", "verify"]
    assert q.cone.counts() == {"L": 19, "apex": 6, "joined": 36}
    assert q.cone.T == 13
    assert q.complex.validate() == []
    assert q.residuals == []
    assert q.compatibility.ok
    assert set(q.compatibility.verdicts) == {"K1", "top", "hyp"}
    assert q.verdict == PASS
    assert set(q.labels.values()) <= {c.id for c in triangle.cells()}
    assert SURROGATE_NOTE in q.notes


@pytest.mark.slow
def test_q_triangulation_points_stay_in_the_stack(triangle, fast_config):
    q = q_triangulate(triangle, [], "whitney-b", fast_config)
    for p in q.vertex_points():
        assert p is not None
        assert triangle.closure_contains("b1[i0]", tuple(Fraction(float(c)) for c in p))
    apex = next(iter(q.cone.apexes))
    centre = q.point({apex: Fraction(1)})
    assert triangle.locate_cell(tuple(float(c) for c in centre)) == "b1[i0]"


@pytest.mark.slow
def test_q_triangulation_of_the_disk(disk, fast_config):
    q = q_triangulate(disk, ["upper"], "whitney-b", fast_config)
    assert q.triangulation.complex.counts() == {0: 11, 1: 22, 2: 12}
    assert q.cone.T == 23
    assert q.complex.validate() == []


@pytest.mark.slow
def test_line_stacks_take_the_base_case(fast_config):
    from conftest import line

    q = q_triangulate(line(0, 1, cuts=["1/2"]), [], "whitney-b", fast_config)
    assert q.cone is None
    assert q.to_dict()["counts"] == {"0": 3, "1": 2}
    assert any(m.startswith("[BaseCase]") for m in q.notes)


@pytest.mark.slow
def test_failing_condition_stops_at_verify(triangle, fast_config, always_fail):
    config = fast_config.model_copy(update={"substratify_cap": 1})
    with pytest.raises(PipelineStageError) as info:
        q_triangulate(triangle, [], always_fail, config)
    assert info.value.stage == "verify"
    assert isinstance(info.value.cause, ConditionFailureError)
    assert info.value.cause.reports
    assert all(r.verdict == FAIL for r in info.value.cause.reports)


@pytest.mark.slow
def test_q_triangulation_mesh(triangle, fast_config):
    q = q_triangulate(triangle, [], "whitney-b", fast_config)
    mesh = mesh_from_q_triangulation(q)
    assert len(mesh.vertices) == 13
    assert len(mesh.of_dim(2)) == 18
    assert len(mesh.of_dim(1)) == 30
    assert q.to_dict()["counts"] == {"0": 13, "1": 30, "2": 18}


# ============ 子分层 ============

def test_substratify_leaves_affine_strata_alone(fast_config):
    K = SimplicialComplex([TRIANGLE], close=True)
    result = substratify_refine(K, as_float, "whitney-b", fast_config)
    assert result.residuals == []
    assert result.splits == []
    assert result.tops == [TRIANGLE]
    assert result.skeleton.counts() == {0: 3, 1: 3}
    assert result.notes == [SURROGATE_NOTE]


def test_substratify_splits_then_gives_up(fast_config, always_fail):
    K = SimplicialComplex([TRIANGLE], close=True)
    config = fast_config.model_copy(update={"substratify_cap": 1})
    result = substratify_refine(K, as_float, always_fail, config)
    assert result.rounds == 1
    assert len(result.splits) == 3
    # 每条边在中点处一分为二
    assert result.skeleton.counts() == {0: 6, 1: 6}
    assert (Fraction(1, 2), Fraction(1, 2)) in result.splits
    assert len(result.residuals) == 24
    assert all(r["witness"] is not None for r in result.residuals)
    assert result.tops == [TRIANGLE]
    assert any("failing pair(s) left" in n for n in result.notes)


def test_substratify_with_no_rounds(fast_config, always_fail):
    K = SimplicialComplex([TRIANGLE], close=True)
    config = fast_config.model_copy(update={"substratify_cap": 0})
    result = substratify_refine(K, as_float, always_fail, config)
    assert result.splits == []
    assert result.skeleton.counts() == {0: 3, 1: 3}
    assert len(result.residuals) == 12


# ============ 相容性 ============

def test_compatibility_detects_a_split_stratum():
    strata = {"s": fixed_points((0.1,), (0.9,)), "t": fixed_points((0.2,))}
    subsets = {"left": lambda p: p[0] < 0.5, "all": lambda p: True}
    report = compatibility_check(strata, subsets, samples=10, seed=0)
    assert report.verdicts == {"left": FAIL, "all": PASS}
    assert report.verdict == FAIL
    assert report.violations == [{
        "subset": "left", "stratum": "s", "points": [[0.1], [0.9]], "values": ["True", "False"],
    }]
    assert report.samples == 3


def test_compatibility_with_partitions():
    strata = {"s": fixed_points((0.1,), (0.2,), (0.3,))}
    report = compatibility_check(strata, {"bucket": lambda p: int(p[0] * 2)}, samples=6, seed=0)
    assert report.ok
    assert report.to_dict()["verdict"] == PASS


def test_compatibility_without_strata():
    report = compatibility_check({}, {"a": lambda p: True})
    assert report.ok and report.samples == 0


# ============ 生成器 ============

def test_generator_logs_and_reports_progress(triangle, fast_config):
    gen = FullGenerator(fast_config)
    progress = []
    gen.on_progress = lambda stage, fraction: progress.append((stage, fraction))
    tri = gen.triangulate(triangle, ["top"])
    assert gen.generation_log[0].startswith("[Request]")
    assert gen.generation_log[-1].startswith("[Triangulate]")
    assert progress == [("triangulate", 0.0), ("triangulate", 1.0)]
    assert gen.last_result is tri


def test_generator_check(triangle, fast_config):
    gen = FullGenerator(fast_config)
    reports = gen.check(triangle, "verdier")
    assert reports and all(r.condition == "verdier" for r in reports)
    assert all(r.verdict == PASS for r in reports)
    assert gen.generation_log == [f"[Check] {len(reports)} report(s), verdict pass"]


@pytest.mark.slow
def test_generator_q_triangulate(triangle, fast_config):
    gen = FullGenerator(fast_config)
    progress = []
    gen.on_progress = lambda stage, fraction: progress.append(stage)
    q = gen.q_triangulate(triangle, ["top"])
    assert progress[-1] == "verify"
    assert gen.generation_log[0] == "[Request] q-triangulate n=2, condition=whitney-b, subsets=['top']"
    assert gen.generation_log[-1].startswith("[Verify]")
    assert np.allclose(q.point({0: Fraction(1)}), q.triangulation.ambient_map(q.h3.forward({0: Fraction(1)})))
