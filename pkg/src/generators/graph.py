"""
Q-三角剖分状态图

triangulate ─┬─ (d ≤ 1) ─ base_case ───────────────────────────────┬─ verify ─ END
             └─ substratify ─ skeleton ─ cone_complex ─ extend ─────┘
"""
import logging
from typing import Callable, Dict

from langgraph.graph import END, StateGraph

from src.core.errors import ConditionFailureError, PipelineStageError
from src.core.regularity import FAIL
from src.core.simplicial import IndexedComplex
from src.generators.gen_cone import build_K3, conical_extension_h3, semilinear_iso_f
from src.generators.gen_full import (
    SURROGATE_NOTE, q_triangulate_complex, simplicial_map, substratify_refine, triangulate, verify_q_triangulation,
)
from src.generators.state import QTriangulationState

logger = logging.getLogger(__name__)

# 各阶段结束时的进度
PROGRESS = {
    "triangulate": 0.3,
    "base_case": 0.5,
    "substratify": 0.45,
    "skeleton": 0.6,
    "cone_complex": 0.7,
    "extend": 0.8,
    "verify": 1.0,
}


def _stage(name: str, step: Callable[[QTriangulationState], Dict]) -> Callable[[QTriangulationState], Dict]:
    """阶段包装: 异常带上阶段标签，结束时报告进度"""

    def node(state: QTriangulationState) -> Dict:
        try:
            update = step(state)
        except PipelineStageError:
            raise
        except Exception as e:
            logger.error("[Pipeline] stage %s failed: %s", name, e)
            raise PipelineStageError(name, e) from e
        callback = state.get("on_progress")
        if callback:
            callback(name, PROGRESS[name])
        return update

    return node


def triangulate_step(state: QTriangulationState) -> Dict:
    tri = triangulate(state["stack"], state.get("subsets", ()), state["config"])
    return {
        "triangulation": tri,
        "dim": tri.dim,
        "notes": list(tri.notes),
        "messages": [f"[Triangulate] K1 {tri.complex.counts()}, verdict {tri.verdict}"],
    }


def route(state: QTriangulationState) -> str:
    return "base_case" if state["dim"] <= 1 else "substratify"


def base_case_step(state: QTriangulationState) -> Dict:
    K1 = state["triangulation"].complex
    IK = IndexedComplex.from_simplicial(K1)
    return {
        "complex": IK,
        "h3": simplicial_map(K1, IK, name="h3"),
        "residuals": [],
        "messages": [f"[BaseCase] d={state['dim']}: K1 is its own Q-triangulation"],
    }


def substratify_step(state: QTriangulationState) -> Dict:
    tri = state["triangulation"]
    sub = substratify_refine(tri.complex, tri.ambient_map, state["condition"], state["config"])
    return {
        "refined_skeleton": sub.skeleton,
        "residuals": sub.residuals,
        "notes": state.get("notes", []) + sub.notes,
        "messages": [f"[Substratify] {len(sub.splits)} split(s) in {sub.rounds + 1} round(s), "
                     f"{len(sub.residuals)} residual(s)"],
    }


def skeleton_step(state: QTriangulationState) -> Dict:
    tri = state["triangulation"]
    inner = q_triangulate_complex(state["refined_skeleton"], tri.ambient_map, state["condition"], state["config"])
    notes = state.get("notes", []) + [n for n in inner.notes if n != SURROGATE_NOTE]
    return {
        "K2": inner.complex,
        "h2": inner.h,
        "residuals": state.get("residuals", []) + inner.residuals,
        "notes": notes,
        "messages": [f"[Skeleton] K2 has {inner.complex.vertex_count} vertices, dim {inner.complex.dim}"],
    }


def cone_complex_step(state: QTriangulationState) -> Dict:
    K3 = build_K3(state["triangulation"].complex, state["K2"], state["h2"])
    f = semilinear_iso_f(K3, state["K2"])
    return {"K3": K3, "f": f, "complex": K3.complex, "messages": [f"[K3] T={K3.T}, {K3.counts()}"]}


def extend_step(state: QTriangulationState) -> Dict:
    config = state["config"]
    h2f = state["h2"].compose(state["f"], name="h2∘f")
    h3 = conical_extension_h3(state["K3"], h2f, certify=config.certify, seed=config.checker.scheme.seed)
    return {"h3": h3, "messages": ["[Extend] conical extension h3 built"]}


def verify_step(state: QTriangulationState) -> Dict:
    reports, compat, labels = verify_q_triangulation(
        state["triangulation"], state["complex"], state["h3"], state["condition"], state["config"],
        state.get("subsets", ()))
    failures = [r for r in reports if r.verdict == FAIL]
    if failures:
        raise ConditionFailureError(
            f"{state['condition']} fails on {len(failures)} output pair(s), e.g. {failures[0].pair_id}", failures)
    return {
        "reports": reports,
        "compatibility": compat,
        "labels": labels,
        "messages": [f"[Verify] {len(reports)} pair(s) checked, compatibility {compat.verdict}"],
    }


def build_graph():
    workflow = StateGraph(QTriangulationState)

    workflow.add_node("triangulate", _stage("triangulate", triangulate_step))
    workflow.add_node("base_case", _stage("base_case", base_case_step))
    workflow.add_node("substratify", _stage("substratify", substratify_step))
    workflow.add_node("skeleton", _stage("skeleton", skeleton_step))
    workflow.add_node("cone_complex", _stage("cone_complex", cone_complex_step))
    workflow.add_node("extend", _stage("extend", extend_step))
    workflow.add_node("verify", _stage("verify", verify_step))

    workflow.set_entry_point("triangulate")
    workflow.add_conditional_edges(
        "triangulate",
        route,
        {
            "base_case": "base_case",
            "substratify": "substratify",
        }
    )
    workflow.add_edge("base_case", "verify")
    workflow.add_edge("substratify", "skeleton")
    workflow.add_edge("skeleton", "cone_complex")
    workflow.add_edge("cone_complex", "extend")
    workflow.add_edge("extend", "verify")
    workflow.add_edge("verify", END)

    return workflow.compile()
