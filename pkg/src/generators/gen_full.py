"""
完整生成器 - 协调栈三角剖分与 Q-三角剖分

工作流程:
1. triangulate: 按环境维数递归
   - n = 1: 区间复形 (无界端先经 ζ 紧化)
   - n ≥ 2: 底空间三角剖分 → 分离细分 → K_p → H → K*_p
2. q_triangulate: 在 (K₁, h₁) 上按维数 d 递归，由 graph.py 的状态图驱动
   子分层 → 骨架的 Q-三角剖分 (K₂, h₂) → 锥复形 K₃ 与 f → 锥形延拓 h₃ → 逐层对验证
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.core.conditions import get_condition, is_triangulable
from src.core.defnfun import PulledBackFunction, StackPresentation, validate_stack
from src.core.errors import DomainError, PreconditionError, StackValidationError
from src.core.regularity import (
    FAIL, INCONCLUSIVE, PASS, RegularityReport, SequenceScheme, Stratification, adjacent_pairs,
    maximal_pair_reduction, simplex_chart, stratum_id, weak_bilipschitz_check, worst_verdict,
)
from src.core.simplicial import (
    BaryPoint, IndexedComplex, Point, Scalar, Simplex, SimplicialComplex, as_float, skeleton, stellar_subdivision,
)
from src.generators.gen_cone import ConeComplexK3, build_K3, conical_extension_h3, semilinear_iso_f
from src.generators.gen_stack import (
    ImageLawReport, LipschitzCertificate, PolyhedralComplex, StratifiedHomeomorphism, build_H,
    build_polyhedral_complex, compactify, decompactify, image_law_check, refine_until_separated,
    subdivide_polyhedral,
)
from src.utils.config import DEFAULTS, PipelineConfig

logger = logging.getLogger(__name__)

AT_INFINITY = "at-infinity"
SURROGATE_NOTE = "substratification is a witness-guided surrogate; top-dimensional strata are never split"
COMPACTIFY_NOTE = "unbounded line: vertices pass through x/sqrt(1+x^2), rounded to doubles"


def _seed(config: PipelineConfig) -> int:
    return config.checker.scheme.seed


# ============ 结果 ============

@dataclass
class Triangulation:
    """
    (K, H): |K| → 栈

    carriers: K 的单形 -> 承载它的 K_p 胞腔编号 (一维时为栈胞腔编号)
    labels: K 的单形 -> H 像所在的栈胞腔编号
    memberships: 子集名 -> {单形: 是否属于子集}
    """
    stack: StackPresentation
    complex: SimplicialComplex
    H: StratifiedHomeomorphism
    carriers: Dict[Simplex, str] = field(default_factory=dict)
    labels: Dict[Simplex, str] = field(default_factory=dict)
    memberships: Dict[str, Dict[Simplex, bool]] = field(default_factory=dict)
    reports: List[RegularityReport] = field(default_factory=list)
    image_law: Optional[ImageLawReport] = None
    polyhedral: Optional[PolyhedralComplex] = None
    notes: List[str] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.complex.dim

    @property
    def ambient_dim(self) -> int:
        return self.stack.dim

    @property
    def certificates(self) -> Dict[str, LipschitzCertificate]:
        return self.H.lipschitz_certificates

    def lipschitz_at(self, s: Simplex) -> float:
        """包含 s 重心的单形的承载胞腔上的 Lipschitz 界；没有证书时按恒等映射记 1"""
        cell = self.complex.locate(s.barycentre())
        if cell is None:
            raise DomainError(f"{s} is not inside |K|")
        cert = self.certificates.get(self.carriers.get(cell, ""))
        return cert.bound if cert is not None else 1.0

    def max_lipschitz(self) -> float:
        return self.H.max_bound() or 1.0

    def ambient_map(self, p: Sequence[Scalar]) -> np.ndarray:
        return as_float(self.H.forward(tuple(p)))

    def stratification(self) -> Tuple[Stratification, Dict[str, Simplex]]:
        """以 K 的坐标为参数空间的单形分层，以及层编号到单形的对照"""
        return complex_stratification(self.complex)

    @property
    def verdict(self) -> str:
        verdicts = [r.verdict for r in self.reports]
        if self.image_law is not None and not self.image_law.ok:
            verdicts.append(FAIL)
        return worst_verdict(verdicts)

    def to_dict(self) -> Dict:
        K = self.complex
        return {
            "ambient_dim": self.ambient_dim,
            "dim": self.dim,
            "counts": {str(k): v for k, v in K.counts().items()},
            "labels": {stratum_id(K.index_key(s)): lab for s, lab in sorted(
                self.labels.items(), key=lambda item: (item[0].dim, K.index_key(item[0])))},
            "subsets": {name: sorted(stratum_id(K.index_key(s)) for s, inside in m.items() if inside)
                        for name, m in sorted(self.memberships.items())},
            "certificates": {cid: c.to_dict() for cid, c in sorted(self.certificates.items())},
            "reports": [r.to_dict() for r in self.reports],
            "image_law": self.image_law.to_dict() if self.image_law else None,
            "verdict": self.verdict,
            "notes": list(self.notes),
        }


@dataclass
class CompatibilityReport:
    """每个层上的样本对每个子集 (或划分) 取值一致"""
    samples: int = 0
    verdicts: Dict[str, str] = field(default_factory=dict)
    violations: List[Dict] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def verdict(self) -> str:
        return PASS if self.ok else FAIL

    def to_dict(self) -> Dict:
        return {
            "samples": self.samples,
            "verdicts": dict(sorted(self.verdicts.items())),
            "violations": self.violations[:20],
            "verdict": self.verdict,
            "notes": self.notes,
        }


@dataclass
class ComplexQTriangulation:
    """|K| 的 Q-三角剖分: h 把组合复形上的重心权重送到 |K| 中的点"""
    complex: IndexedComplex
    h: StratifiedHomeomorphism
    residuals: List[Dict] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    cone: Optional[ConeComplexK3] = None


@dataclass
class QTriangulation:
    triangulation: Triangulation
    complex: IndexedComplex
    h3: StratifiedHomeomorphism
    condition: str
    labels: Dict[Tuple[int, ...], str] = field(default_factory=dict)
    reports: List[RegularityReport] = field(default_factory=list)
    compatibility: Optional[CompatibilityReport] = None
    residuals: List[Dict] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    cone: Optional[ConeComplexK3] = None

    def point(self, w: Mapping[int, Scalar]) -> np.ndarray:
        """h₁∘h₃"""
        return self.triangulation.ambient_map(self.h3.forward(w))

    def vertex_points(self) -> List[Optional[np.ndarray]]:
        out = []
        for i in range(self.complex.vertex_count):
            try:
                out.append(self.point({i: Fraction(1)}))
            except DomainError:
                out.append(None)
        return out

    @property
    def verdict(self) -> str:
        verdicts = [r.verdict for r in self.reports]
        if self.compatibility is not None:
            verdicts.append(self.compatibility.verdict)
        return worst_verdict(verdicts)

    def to_dict(self) -> Dict:
        return {
            "condition": self.condition,
            "vertex_count": self.complex.vertex_count,
            "counts": {str(k): len(self.complex.of_dim(k)) for k in range(self.complex.dim + 1)},
            "labels": {stratum_id(s): lab for s, lab in sorted(self.labels.items(), key=lambda x: (len(x[0]), x[0]))},
            "reports": [r.to_dict() for r in self.reports],
            "compatibility": self.compatibility.to_dict() if self.compatibility else None,
            "residuals": self.residuals,
            "verdict": self.verdict,
            "notes": list(self.notes),
            "base": self.triangulation.to_dict(),
        }


# ============ 分层工具 ============

def complex_stratification(
    K: SimplicialComplex,
    mapping: Optional[Callable[[Sequence[Scalar]], Sequence[float]]] = None,
    ambient_dim: Optional[int] = None,
) -> Tuple[Stratification, Dict[str, Simplex]]:
    """K 的开单形分层；mapping 给出时图册取 mapping 之后的像"""
    IK = IndexedComplex.from_simplicial(K)
    if mapping is None:
        point_of, ambient = IK.point, K.ambient_dim
    else:
        point_of, ambient = (lambda w: mapping(IK.point(w))), (ambient_dim or K.ambient_dim)
    strat = Stratification.from_indexed(IK, point_of, ambient)
    return strat, {stratum_id(K.index_key(s)): s for s in K.simplices}


def simplicial_map(K: SimplicialComplex, IK: Optional[IndexedComplex] = None, name: str = "h") -> StratifiedHomeomorphism:
    """重心权重 ↔ |K| 中的点"""
    IK = IK or IndexedComplex.from_simplicial(K)

    def forward(w: Mapping[int, Scalar]) -> Point:
        return IK.point({i: v for i, v in w.items() if v != 0})

    def inverse(p: Sequence[Scalar]) -> BaryPoint:
        s = K.locate(p)
        if s is None:
            raise DomainError(f"{tuple(float(v) for v in p)} is outside |K|")
        mu = s.barycentric_coordinates(p)
        return {K.vertex_id(v): m for v, m in zip(s.vertices, mu)}

    h = StratifiedHomeomorphism(forward, inverse, name=name)
    for s in IK.sorted_simplices():
        sid = stratum_id(s)
        h.source_cells.append(sid)
        h.image_descriptors[sid] = sid
        h.lipschitz_certificates[sid] = LipschitzCertificate(1.0, 1.0, "exact")
    return h


# ============ 栈三角剖分 ============

def triangulate(
    S: StackPresentation,
    subsets: Sequence[str] = (),
    config: Optional[PipelineConfig] = None,
    validate: bool = True,
) -> Triangulation:
    """
    栈表示的弱双 Lipschitz 三角剖分

    Args:
        subsets: 要求相容的子集名 (S.selected 中的键，"A" 为全体)
        validate: 先运行 validate_stack，不通过时抛 StackValidationError
    """
    config = config or PipelineConfig()
    if validate:
        diag = validate_stack(S, samples=64, seed=_seed(config))
        if not diag.ok:
            raise StackValidationError(diag)
    tri = _triangulate(S, config)
    for name in subsets:
        cells = S.subset_cells(name)
        tri.memberships[name] = {s: tri.labels.get(s) in cells for s in tri.complex.sorted_simplices()}
    if config.certify and S.dim >= 2:
        tri.reports = certify_triangulation(tri, config)
    logger.info("[Triangulate] n=%d: %s, verdict %s", S.dim, tri.complex.counts(), tri.verdict)
    return tri


def _triangulate(S: StackPresentation, config: PipelineConfig) -> Triangulation:
    if S.dim == 1:
        return _triangulate_line(S)
    return _triangulate_stack(S, config)


def _triangulate_line(S: StackPresentation) -> Triangulation:
    """直线上的点与区间直接构成一维复形"""
    notes: List[str] = []
    if S.bounded:
        def squash(x: Fraction) -> Fraction:
            return x
    else:
        notes.append(COMPACTIFY_NOTE)

        def squash(x: Fraction) -> Fraction:
            return Fraction(float(compactify([float(x)])[0]))

    labels: Dict[Simplex, str] = {}
    for c in S.cells():
        if c.kind == "point":
            labels[Simplex(((squash(c.lo),),))] = c.id
    for c in S.cells():
        if c.kind != "interval":
            continue
        lo = (Fraction(-1),) if c.lo is None else (squash(c.lo),)
        hi = (Fraction(1),) if c.hi is None else (squash(c.hi),)
        labels[Simplex((lo, hi))] = c.id
        for end, value in ((lo, c.lo), (hi, c.hi)):
            if value is None:
                labels[Simplex((end,))] = AT_INFINITY
    K = SimplicialComplex(labels)

    if S.bounded:
        H = StratifiedHomeomorphism.identity(name="H1")
        for cid in sorted(set(labels.values())):
            H.lipschitz_certificates[cid] = LipschitzCertificate(1.0, 1.0, "exact")
    else:
        def forward(p: Sequence[Scalar]) -> Point:
            return (float(decompactify([float(p[0])])[0]),)

        def inverse(q: Sequence[Scalar]) -> Point:
            return (float(compactify([float(q[0])])[0]),)

        H = StratifiedHomeomorphism(forward, inverse, name="H1", notes=list(notes))
    H.source_cells = sorted(set(labels.values()))
    H.image_descriptors = {cid: cid for cid in H.source_cells}
    return Triangulation(S, K, H, carriers=dict(labels), labels=dict(labels), notes=notes)


def _triangulate_stack(S: StackPresentation, config: PipelineConfig) -> Triangulation:
    if not S.bounded:
        raise PreconditionError(f"unbounded bases are only supported for one-dimensional stacks "
                                f"(got a {S.dim}-dimensional stack)")
    seed = _seed(config)
    base = _triangulate(S.base, config)
    h = base.H
    L_base = base.max_lipschitz()
    functions = [PulledBackFunction(eta, h.forward, base_lipschitz=L_base, name=eta.name or f"eta{k + 1}")
                 for k, eta in enumerate(S.functions)]
    K = refine_until_separated(S, base.complex, cap=config.refinement_cap, functions=functions, seed=seed)
    P = build_polyhedral_complex(S, K, functions, seed=seed)
    H = build_H(P, S, base_map=h.forward, base_inverse=h.inverse, base_lipschitz=base.lipschitz_at,
                certify=config.certify, samples=config.certificate_samples, seed=seed)
    H.notes.extend(base.notes)
    cells = subdivide_polyhedral(P)
    complex_ = SimplicialComplex(cells)
    carriers = {s: c.id for s, c in cells.items()}
    labels = {s: H.image_descriptors.get(c.id, "?") for s, c in cells.items()}
    tri = Triangulation(S, complex_, H, carriers=carriers, labels=labels, polyhedral=P, notes=list(base.notes))
    if config.certify:
        tri.image_law = image_law_check(H, S, P, samples=4 * config.certificate_samples, seed=seed)
    return tri


def certify_triangulation(tri: Triangulation, config: PipelineConfig) -> List[RegularityReport]:
    """H 在相邻层对上的弱双 Lipschitz 报告；承载胞腔相同的层对只查一次"""
    strat, by_id = tri.stratification()
    scheme = SequenceScheme(config.certificate_scheme)

    def f(a: np.ndarray) -> np.ndarray:
        return tri.ambient_map(tuple(float(v) for v in a))

    seen = set()
    reports = []
    for big, small in maximal_pair_reduction(strat):
        key = (tri.carriers.get(by_id[big]), tri.carriers.get(by_id[small]))
        if key in seen or AT_INFINITY in (tri.labels.get(by_id[big]), tri.labels.get(by_id[small])):
            continue
        seen.add(key)
        report = weak_bilipschitz_check(f, strat.pair(big, small), scheme, config.checker)
        report.notes.append(f"carriers {key[0]} | {key[1]}")
        reports.append(report)
    logger.info("[Certify] %d weak bi-Lipschitz report(s): %s", len(reports),
                worst_verdict(r.verdict for r in reports))
    return reports


def check_stack(
    S: StackPresentation,
    condition: Optional[str] = None,
    config: Optional[PipelineConfig] = None,
) -> Tuple[Triangulation, List[RegularityReport]]:
    """三角剖分后在 {H(△)} 的约化层对上运行正则性检查"""
    config = config or PipelineConfig()
    cond = get_condition(condition or config.checker.condition)
    tri = triangulate(S, config=config.model_copy(update={"certify": False}))
    K = tri.complex
    strat, by_id = complex_stratification(K, tri.ambient_map, tri.ambient_dim)
    scheme = SequenceScheme(config.checker.scheme)
    reports = []
    for big, small in maximal_pair_reduction(strat):
        if AT_INFINITY in (tri.labels.get(by_id[big]), tri.labels.get(by_id[small])):
            continue
        reports.append(cond.check(strat.pair(big, small), scheme, config.checker))
    return tri, reports


# ============ 子分层 (替代实现) ============

@dataclass
class SubstratifyResult:
    """
    K₁ 的顶层单形保持不变；skeleton 是细分后的 (d-1) 维骨架
    residuals: 达到上限或无法再分 (点层) 的失败层对
    """
    tops: List[Simplex]
    skeleton: SimplicialComplex
    residuals: List[Dict] = field(default_factory=list)
    splits: List[Point] = field(default_factory=list)
    rounds: int = 0
    notes: List[str] = field(default_factory=list)


def _mixed_stratification(
    tops: Sequence[Simplex],
    skel: SimplicialComplex,
    h1: Callable[[Sequence[Scalar]], Sequence[float]],
    ambient_dim: int,
) -> Stratification:
    """顶层单形 + 骨架单形；顶层的边界层是落在其闭包中的骨架单形"""
    coords = tuple(skel.vertex_index[i] for i in range(len(skel.vertex_index)))
    IK = IndexedComplex(len(coords), frozenset(), coords)

    def point_of(w):
        return h1(IK.point(w))

    dims, frontier, charts, verts = {}, {}, {}, {}
    for s in skel.sorted_simplices():
        key = skel.index_key(s)
        sid = stratum_id(key)
        dims[sid] = s.dim
        frontier[sid] = {stratum_id(skel.index_key(f)) for f in s.boundary()}
        charts[sid] = simplex_chart(key, point_of, ambient_dim, label=sid)
        verts[sid] = key
    for t in tops:
        key = tuple(sorted(skel.vertex_id(v) for v in t.vertices))
        sid = stratum_id(key)
        dims[sid] = t.dim
        frontier[sid] = {stratum_id(skel.index_key(s)) for s in skel.simplices
                         if all(t.closure_contains(v) for v in s.vertices)}
        charts[sid] = simplex_chart(key, point_of, ambient_dim, label=sid)
        verts[sid] = key
    return Stratification(dims, frontier, charts, verts, coordinates=dict(enumerate(coords)))


def _witness_point(strat: Stratification, small: str, witness: Optional[Dict]) -> Point:
    """失败见证在 Γ 上的点 (有理化)；落不进开单形时退回重心"""
    verts = strat.vertices[small]
    s = Simplex(tuple(strat.coordinates[i] for i in verts), validate=False)
    if witness and witness.get("gamma_param") is not None:
        u = [float(x) for x in witness["gamma_param"]]
        weights = [1.0 - sum(u)] + u
        p = tuple(Fraction(sum(w * float(c[k]) for w, c in zip(weights, s.vertices))).limit_denominator(1 << 20)
                  for k in range(s.ambient_dim))
        if s.contains(p):
            return p
    return s.barycentre()


def substratify_refine(
    K1: SimplicialComplex,
    h1: Callable[[Sequence[Scalar]], Sequence[float]],
    condition: str,
    config: Optional[PipelineConfig] = None,
) -> SubstratifyResult:
    """
    见证引导的子分层:
    对 h₁ 像上检查失败的层对，在较低维层的见证点处做星形细分，顶层单形不动；
    反复直到全部通过或达到 substratify_cap
    """
    config = config or PipelineConfig()
    cond = get_condition(condition)
    d = K1.dim
    tops = K1.of_dim(d)
    notes = [SURROGATE_NOTE]
    if d < 1:
        return SubstratifyResult(tops, K1, notes=notes)
    skel = skeleton(K1, d - 1)
    scheme = SequenceScheme(config.certificate_scheme)
    residuals: Dict[str, Dict] = {}
    splits: List[Point] = []
    rounds = 0
    for rounds in range(config.substratify_cap + 1):
        # 细分后顶点重新编号，只保留本轮的失败
        residuals = {}
        strat = _mixed_stratification(tops, skel, h1, K1.ambient_dim)
        failing: List[Tuple[str, RegularityReport]] = []
        for big, small in adjacent_pairs(strat):
            report = cond.check(strat.pair(big, small), scheme, config.checker)
            if report.verdict == FAIL:
                failing.append((small, report))
        if not failing:
            break
        targets: Dict[str, Point] = {}
        for small, report in failing:
            if strat.dims[small] == 0 or rounds == config.substratify_cap:
                residuals[report.pair_id] = {"pair": report.pair_id, "statistic": report.statistic,
                                             "witness": report.witness}
                continue
            targets.setdefault(small, _witness_point(strat, small, report.witness))
        if not targets:
            break
        for point in targets.values():
            s = skel.locate(point)
            if s is None or s.dim == 0:
                continue
            skel = stellar_subdivision(skel, s, point)
            splits.append(point)
        logger.info("[Substratify] round %d: %d failing pair(s), %d split(s)", rounds, len(failing), len(targets))
    if residuals:
        notes.append(f"{len(residuals)} failing pair(s) left after {rounds} round(s)")
        logger.warning("[Substratify] %d residual failure(s)", len(residuals))
    return SubstratifyResult(tops, skel, sorted(residuals.values(), key=lambda r: r["pair"]), splits, rounds, notes)


# ============ Q-三角剖分 ============

def q_triangulate_complex(
    K: SimplicialComplex,
    h1: Callable[[Sequence[Scalar]], Sequence[float]],
    condition: str,
    config: Optional[PipelineConfig] = None,
) -> ComplexQTriangulation:
    """
    |K| 的 Q-三角剖分 (按 dim K 递归)
    h1 把 |K| 送到环境空间，只用于条件检查
    """
    config = config or PipelineConfig()
    if K.dim <= 1:
        IK = IndexedComplex.from_simplicial(K)
        return ComplexQTriangulation(IK, simplicial_map(K, IK))
    sub = substratify_refine(K, h1, condition, config)
    inner = q_triangulate_complex(sub.skeleton, h1, condition, config)
    K3 = build_K3(K, inner.complex, inner.h)
    f = semilinear_iso_f(K3, inner.complex)
    h3 = conical_extension_h3(K3, inner.h.compose(f, name="h2∘f"), certify=config.certify, seed=_seed(config))
    return ComplexQTriangulation(K3.complex, h3, sub.residuals + inner.residuals, sub.notes + inner.notes, K3)


def compatibility_check(
    strata: Mapping[str, Callable[[np.random.Generator, int], Sequence[Point]]],
    subsets: Mapping[str, Callable[[Point], Hashable]],
    samples: int = 10_000,
    seed: Optional[int] = None,
) -> CompatibilityReport:
    """
    每个层的样本点对每个子集取值一致 (全在内或全在外)

    subsets 的值也可以是划分标签函数，此时要求每个层落在同一块里
    """
    rng = np.random.default_rng(seed if seed is not None else DEFAULTS["seed"])
    report = CompatibilityReport()
    report.verdicts = {name: PASS for name in subsets}
    if not strata:
        return report
    per = max(2, samples // len(strata))
    for sid, sampler in strata.items():
        points = list(sampler(rng, per))
        report.samples += len(points)
        for name, predicate in subsets.items():
            seen: Dict[Hashable, Point] = {}
            for p in points:
                try:
                    value = predicate(p)
                except DomainError as e:
                    report.notes.append(f"{sid}: {e}")
                    continue
                seen.setdefault(value, p)
                if len(seen) > 1:
                    break
            if len(seen) > 1:
                (v1, p1), (v2, p2) = list(seen.items())[:2]
                report.verdicts[name] = FAIL
                report.violations.append({
                    "subset": name, "stratum": sid,
                    "points": [[float(x) for x in p1], [float(x) for x in p2]],
                    "values": [str(v1), str(v2)],
                })
    if report.violations:
        logger.warning("[Compatibility] %d violation(s)", len(report.violations))
    return report


def _simplex_sampler(h: StratifiedHomeomorphism, s: Tuple[int, ...]):
    def sample(rng: np.random.Generator, count: int) -> List[Point]:
        if len(s) == 1:
            return [h.forward({s[0]: 1.0})]
        weights = rng.standard_exponential((count, len(s)))
        weights /= weights.sum(axis=1, keepdims=True)
        return [h.forward({i: float(w) for i, w in zip(s, row)}) for row in weights]

    return sample


def q_labels(tri: Triangulation, complex_: IndexedComplex, h3: StratifiedHomeomorphism) -> Dict[Tuple[int, ...], str]:
    """每个输出单形的重心经 h₃ 落入的 K₁ 单形，再取其栈胞腔标签"""
    labels = {}
    for s in complex_.sorted_simplices():
        p = h3.forward({i: Fraction(1, len(s)) for i in s})
        cell = tri.complex.locate(p)
        labels[s] = tri.labels.get(cell, "?") if cell is not None else "?"
    return labels


def verify_q_triangulation(
    tri: Triangulation,
    complex_: IndexedComplex,
    h3: StratifiedHomeomorphism,
    condition: str,
    config: PipelineConfig,
    subsets: Sequence[str] = (),
) -> Tuple[List[RegularityReport], CompatibilityReport, Dict[Tuple[int, ...], str]]:
    """全部相邻层对的条件检查 + 与 {h₁(△)} 及子集的相容性采样"""
    cond = get_condition(condition)
    labels = q_labels(tri, complex_, h3)
    skip = {stratum_id(s) for s, lab in labels.items() if lab == AT_INFINITY}

    def point_of(w):
        return tri.ambient_map(h3.forward(w))

    strat = Stratification.from_indexed(complex_, point_of, tri.ambient_dim)
    scheme = SequenceScheme(config.certificate_scheme)
    reports = []
    for big, small in adjacent_pairs(strat):
        if big in skip or small in skip:
            continue
        reports.append(cond.check(strat.pair(big, small), scheme, config.checker))

    strata = {stratum_id(s): _simplex_sampler(h3, s) for s in complex_.sorted_simplices()
              if stratum_id(s) not in skip}
    K1 = tri.complex

    def carrier(p):
        return K1.locate(p)

    predicates: Dict[str, Callable[[Point], Hashable]] = {"K1": carrier}
    for name in subsets:
        predicates[name] = (lambda n: lambda p: tri.stack.in_subset(n, tri.H.forward(p)))(name)
    compat = compatibility_check(strata, predicates, samples=config.compatibility_samples, seed=_seed(config))
    logger.info("[Verify] %d pair report(s): %s; compatibility %s", len(reports),
                worst_verdict(r.verdict for r in reports), compat.verdict)
    return reports, compat, labels


def q_triangulate(
    S: StackPresentation,
    subsets: Sequence[str] = (),
    condition: Optional[str] = None,
    config: Optional[PipelineConfig] = None,
    on_progress: Optional[Callable[[str, float], None]] = None,
) -> QTriangulation:
    """
    分层状态图: triangulate → substratify → skeleton → cone_complex → extend → verify
    d ≤ 1 时 triangulate 之后直接进入 base_case。
    任一阶段失败抛 PipelineStageError；条件检查出现 fail 时在 verify 阶段中止。
    """
    from src.generators.graph import build_graph

    config = config or PipelineConfig()
    condition = condition or config.checker.condition
    if not is_triangulable(condition):
        raise PreconditionError(f"condition {condition!r} does not declare every property needed for triangulation")
    app = build_graph()
    state = app.invoke({
        "stack": S,
        "subsets": list(subsets),
        "condition": condition,
        "config": config,
        "on_progress": on_progress,
        "messages": [],
    }, config={"recursion_limit": 100})
    result = QTriangulation(
        triangulation=state["triangulation"],
        complex=state["complex"],
        h3=state["h3"],
        condition=condition,
        labels=state.get("labels", {}),
        reports=state.get("reports", []),
        compatibility=state.get("compatibility"),
        residuals=state.get("residuals", []),
        notes=list(dict.fromkeys(list(state.get("notes", [])) + list(state.get("messages", [])))),
        cone=state.get("K3"),
    )
    inconclusive = sum(r.verdict == INCONCLUSIVE for r in result.reports)
    if inconclusive:
        result.notes.append(f"{inconclusive} pair report(s) inconclusive")
    return result


# ============ 协调器 ============

class FullGenerator:
    """
    三角剖分生成器

    工作流程:
    1. triangulate: 栈表示 -> (K, H)
    2. q_triangulate: (K₁, h₁) -> (K₃, h₁∘h₃)，阶段见 graph.py
    3. 报告与网格导出由调用者处理
    """

    def __init__(self, config: Optional[PipelineConfig] = None):
        self.config = config or PipelineConfig()
        self.generation_log: List[str] = []
        self.last_result: Any = None

        # 回调
        self.on_progress: Optional[Callable[[str, float], None]] = None

    def triangulate(self, S: StackPresentation, subsets: Sequence[str] = ()) -> Triangulation:
        self.generation_log = []
        self._log("Request", f"triangulate n={S.dim}, subsets={list(subsets)}")
        self._report_progress("triangulate", 0.0)
        tri = triangulate(S, subsets, self.config)
        self._log("Triangulate", f"{tri.complex!r}, verdict {tri.verdict}")
        self._report_progress("triangulate", 1.0)
        self.last_result = tri
        return tri

    def q_triangulate(self, S: StackPresentation, subsets: Sequence[str] = (),
                      condition: Optional[str] = None) -> QTriangulation:
        self.generation_log = []
        condition = condition or self.config.checker.condition
        self._log("Request", f"q-triangulate n={S.dim}, condition={condition}, subsets={list(subsets)}")
        result = q_triangulate(S, subsets, condition, self.config, on_progress=self._report_progress)
        for note in result.notes:
            self._log("Pipeline", note)
        self._log("Verify", f"{len(result.reports)} report(s), verdict {result.verdict}")
        self.last_result = result
        return result

    def check(self, S: StackPresentation, condition: Optional[str] = None) -> List[RegularityReport]:
        self.generation_log = []
        _, reports = check_stack(S, condition, self.config)
        self._log("Check", f"{len(reports)} report(s), verdict {worst_verdict(r.verdict for r in reports)}")
        self.last_result = reports
        return reports

    def _report_progress(self, stage: str, fraction: float):
        if self.on_progress:
            self.on_progress(stage, fraction)
        logger.info("[Generator] %s (%.0f%%)", stage, fraction * 100)

    def _log(self, category: str, message: str):
        self.generation_log.append(f"[{category}] {message}")
