"""
栈生成器 - 多面体复形 K_p 与分层同胚 H

流程:
1. semilinear_interpolant: 在底复形顶点上插值 η_k，得到逐单形仿射的 ψ_k
2. refine_until_separated: 反复重心细分，直到每个单形上 ψ_k ≡ ψ_{k+1} 或有分离顶点
3. build_polyhedral_complex: ψ 的图像胞腔与带胞腔
4. build_H: 图像 ↦ η 的图像，带 ↦ η 之间的带 (逐纤维仿射重参数化)
5. subdivide_polyhedral: K_p 的重心细分 K*_p
"""
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from src.core.defnfun import DefinableFunction, StackPresentation
from src.core.errors import DomainError, PreconditionError, RefinementError
from src.core.simplicial import (
    Point, Scalar, Simplex, SimplicialComplex, as_float, barycentric_subdivision, is_exact,
    mean_point, subdivide_cells,
)
from src.utils.config import DEFAULTS, default_seed

logger = logging.getLogger(__name__)

GRAPH = "graph"
BAND = "band"

PointMap = Callable[[Sequence[Scalar]], Point]


def _identity(p: Sequence[Scalar]) -> Point:
    return tuple(p)


# ============ 半线性插值 ============

class SemilinearFunction:
    """逐单形仿射函数: ψ(Σβᵢyᵢ) = Σβᵢ·values[yᵢ]"""

    def __init__(self, K: SimplicialComplex, values: Mapping[Point, Scalar], name: str = ""):
        self.complex = K
        self.values = dict(values)
        self.name = name
        self._maximal = K.maximal()
        boxes = [s.as_array() for s in self._maximal]
        self._lo = np.array([b.min(axis=0) for b in boxes])
        self._hi = np.array([b.max(axis=0) for b in boxes])
        self._grad: Dict[Simplex, np.ndarray] = {}

    def simplex_at(self, y: Sequence[Scalar], tol: float = DEFAULTS["geometric_tol"]) -> Simplex:
        """包含 y 的某个闭极大单形"""
        yf = as_float(y)
        hits = np.all((self._lo - tol <= yf) & (yf <= self._hi + tol), axis=1)
        for i in np.flatnonzero(hits):
            s = self._maximal[i]
            if s.closure_contains(y, tol):
                return s
        raise DomainError(f"{tuple(float(c) for c in y)} lies outside the base complex")

    def on_simplex(self, s: Simplex, y: Sequence[Scalar], tol: float = DEFAULTS["geometric_tol"]) -> Scalar:
        coords = s.barycentric_coordinates(y, tol)
        if coords is None:
            raise DomainError(f"{tuple(y)} is not in the affine hull of {s}")
        vals = [self.values[v] for v in s.vertices]
        if all(isinstance(c, Fraction) for c in coords) and all(isinstance(v, Fraction) for v in vals):
            return sum((c * v for c, v in zip(coords, vals)), Fraction(0))
        return float(sum(float(c) * float(v) for c, v in zip(coords, vals)))

    def __call__(self, y: Sequence[Scalar]) -> Scalar:
        return self.on_simplex(self.simplex_at(y), y)

    def vertex_values(self, s: Simplex) -> List[Scalar]:
        return [self.values[v] for v in s.vertices]

    def gradient(self, s: Simplex) -> np.ndarray:
        """s 仿射包内的梯度 (最小范数解)"""
        if s not in self._grad:
            pts = s.as_array()
            if s.dim == 0:
                self._grad[s] = np.zeros(s.ambient_dim)
            else:
                edge = pts[1:] - pts[0]
                vals = np.array([float(v) for v in self.vertex_values(s)])
                self._grad[s] = np.linalg.pinv(edge) @ (vals[1:] - vals[0])
        return self._grad[s]


def semilinear_interpolant(h: DefinableFunction, K: SimplicialComplex, name: str = "") -> SemilinearFunction:
    """顶点取值的逐单形仿射插值；顶点为有理点时取值精确"""
    values = {v: h.eval(v) for v in K.vertex_index.values()}
    return SemilinearFunction(K, values, name=name or getattr(h, "name", ""))


# ============ 分离条件 ============

@dataclass
class SeparationReport:
    """一对 (η_k, η_{k+1}) 在每个闭单形上的分离结论"""
    level: int
    # 单形 -> ("separated", 分离顶点) / ("equal", None) / ("fail", None)
    verdicts: Dict[Simplex, Tuple[str, Optional[Point]]] = field(default_factory=dict)

    @property
    def failures(self) -> List[Simplex]:
        return sorted((s for s, (v, _) in self.verdicts.items() if v == "fail"), key=lambda s: (s.dim, s.vertices))

    @property
    def ok(self) -> bool:
        return not self.failures


def _exact_closure_samples(s: Simplex, rng: np.random.Generator, count: int) -> List[Point]:
    """闭单形上的有理样本: 各面重心 + 随机有理凸组合"""
    points = [f.barycentre() for f in s.faces()]
    for _ in range(count):
        raw = [int(r) for r in rng.integers(1, 1 << 12, size=s.dim + 1)]
        total = sum(raw)
        points.append(s.point_at([Fraction(r, total) for r in raw]))
    return points


def _equal(a: Scalar, b: Scalar, tol: float) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(float(a) - float(b)) <= tol


def vertex_separation_check(
    eta_k: DefinableFunction,
    eta_k1: DefinableFunction,
    K: SimplicialComplex,
    level: int = 1,
    samples: int = 8,
    seed: Optional[int] = None,
    tol: float = DEFAULTS["geometric_tol"],
) -> SeparationReport:
    """
    每个闭单形上判定:
    1. 有顶点 w 使 η_k(w) < η_{k+1}(w) → separated
    2. 闭包上 η_k ≡ η_{k+1} (有理样本上逐点相等) → equal
    3. 都不是 → fail
    """
    rng = np.random.default_rng(default_seed(seed))
    report = SeparationReport(level=level)
    vertex_gap = {}
    for v in K.vertex_index.values():
        a, b = eta_k.eval(v), eta_k1.eval(v)
        vertex_gap[v] = not _equal(a, b, tol) and a < b
    for s in K.sorted_simplices():
        witness = next((v for v in s.vertices if vertex_gap[v]), None)
        if witness is not None:
            report.verdicts[s] = ("separated", witness)
            continue
        same = all(_equal(eta_k.eval(p), eta_k1.eval(p), tol) for p in _exact_closure_samples(s, rng, samples))
        report.verdicts[s] = ("equal", None) if same else ("fail", None)
    return report


def _separation_failures(functions: Sequence[DefinableFunction], K: SimplicialComplex, seed) -> List[Simplex]:
    bad = set()
    for k in range(len(functions) - 1):
        bad.update(vertex_separation_check(functions[k], functions[k + 1], K, level=k + 1, seed=seed).failures)
    return sorted(bad, key=lambda s: (s.dim, s.vertices))


def refine_until_separated(
    S: StackPresentation,
    K: SimplicialComplex,
    cap: int = 8,
    functions: Optional[Sequence[DefinableFunction]] = None,
    seed: Optional[int] = None,
) -> SimplicialComplex:
    """
    反复重心细分 K 直到所有相邻函数对通过分离检查

    functions: 底复形坐标下的 η (缺省为 S.functions，即底映射为恒等)
    """
    functions = list(functions if functions is not None else S.functions)
    for rounds in range(cap + 1):
        failures = _separation_failures(functions, K, seed)
        if not failures:
            if rounds:
                logger.info("[Refine] separated after %d subdivision(s): %s", rounds, K.counts())
            return K
        logger.info("[Refine] round %d: %d simplices unseparated", rounds, len(failures))
        if rounds == cap:
            break
        K = barycentric_subdivision(K)
    raise RefinementError(
        f"vertex separation still fails after {cap} barycentric subdivisions", offending=failures)


# ============ 多面体复形 ============

@dataclass(frozen=True)
class PolyhedralCell:
    """K_p 的胞腔: ψ_k|△ 的图像，或 ψ_k 与 ψ_{k+1} 之间的开带"""
    kind: str
    base: Simplex
    level: int
    levels: Tuple[int, ...]
    id: str
    vertices: Tuple[Point, ...] = field(compare=False, default=())

    @property
    def dim(self) -> int:
        return self.base.dim + (1 if self.kind == BAND else 0)

    def barycentre(self) -> Point:
        return mean_point(self.vertices)


class PolyhedralComplex:
    """
    K_p = {ψ_k|△} ∪ {(ψ_k, ψ_{k+1})|△ : ψ_k|△ < ψ_{k+1}|△}

    重合的图像只保留一个胞腔 (levels 记录所有下标)。
    """

    def __init__(self, K: SimplicialComplex, psi: Sequence[SemilinearFunction],
                 functions: Sequence[DefinableFunction], tol: float = DEFAULTS["geometric_tol"]):
        self.base_complex = K
        self.psi = list(psi)
        self.functions = list(functions)
        self.tol = tol
        self._over: Dict[Simplex, List[PolyhedralCell]] = {}
        cells: List[PolyhedralCell] = []
        for s in K.sorted_simplices():
            over = self._cells_over(s)
            self._over[s] = over
            cells.extend(over)
        self.cells = cells
        self._by_id = {c.id: c for c in cells}

    @property
    def b(self) -> int:
        return len(self.psi)

    @property
    def dim(self) -> int:
        return max(c.dim for c in self.cells)

    @property
    def ambient_dim(self) -> int:
        return self.base_complex.ambient_dim + 1

    def _tag(self, s: Simplex) -> str:
        return ".".join(str(i) for i in self.base_complex.index_key(s))

    def _lift(self, s: Simplex, k: int) -> Tuple[Point, ...]:
        return tuple(tuple(v) + (self.psi[k - 1].values[v],) for v in s.vertices)

    def _cells_over(self, s: Simplex) -> List[PolyhedralCell]:
        vals = [self.psi[k].vertex_values(s) for k in range(self.b)]
        out: List[PolyhedralCell] = []
        k = 1
        while k <= self.b:
            run = [k]
            while k < self.b and vals[k - 1] == vals[k]:
                k += 1
                run.append(k)
            out.append(PolyhedralCell(GRAPH, s, run[0], tuple(run), f"g{run[0]}:{self._tag(s)}",
                                      self._lift(s, run[0])))
            k += 1
        for k in range(1, self.b):
            lo, hi = vals[k - 1], vals[k]
            if lo != hi:
                verts = tuple(sorted(set(self._lift(s, k)) | set(self._lift(s, k + 1))))
                out.append(PolyhedralCell(BAND, s, k, (k, k + 1), f"b{k}:{self._tag(s)}", verts))
        return out

    def cell(self, cell_id: str) -> PolyhedralCell:
        return self._by_id[cell_id]

    def cells_over(self, s: Simplex) -> List[PolyhedralCell]:
        return list(self._over[s])

    def graph_cell(self, s: Simplex, k: int) -> PolyhedralCell:
        return next(c for c in self._over[s] if c.kind == GRAPH and k in c.levels)

    def band_cell(self, s: Simplex, k: int) -> Optional[PolyhedralCell]:
        return next((c for c in self._over[s] if c.kind == BAND and c.level == k), None)

    def faces_of(self, c: PolyhedralCell) -> List[PolyhedralCell]:
        """闭包中的全部真面"""
        out = []
        for face in c.base.faces():
            if c.kind == GRAPH:
                if face != c.base:
                    out.append(self.graph_cell(face, c.level))
                continue
            lower = self.graph_cell(face, c.level)
            upper = self.graph_cell(face, c.level + 1)
            out.extend([lower, upper] if lower != upper else [lower])
            if face != c.base:
                band = self.band_cell(face, c.level)
                if band is not None:
                    out.append(band)
        return out

    def counts(self) -> Dict[str, int]:
        return {GRAPH: sum(c.kind == GRAPH for c in self.cells), BAND: sum(c.kind == BAND for c in self.cells)}

    def values_at(self, s: Simplex, y: Sequence[Scalar]) -> List[Scalar]:
        return [p.on_simplex(s, y, self.tol) for p in self.psi]

    def locate(self, p: Sequence[Scalar]) -> Optional[PolyhedralCell]:
        """包含 p 的开胞腔"""
        y, z = tuple(p[:-1]), p[-1]
        s = self.base_complex.locate(y, self.tol)
        if s is None:
            return None
        vals = self.values_at(s, y)
        for c in self._over[s]:
            if c.kind == GRAPH and _equal(z, vals[c.level - 1], self.tol):
                return c
        exact = is_exact(p)
        for c in self._over[s]:
            if c.kind != BAND:
                continue
            lo, hi = vals[c.level - 1], vals[c.level]
            if (lo < z < hi) if exact else (lo + self.tol < z < hi - self.tol):
                return c
        return None

    def sample_cell(self, c: PolyhedralCell, rng: np.random.Generator, count: int, closed: bool = False) -> np.ndarray:
        """胞腔内的浮点样本；closed=True 时附上胞腔顶点"""
        ys = c.base.sample(rng, count)
        rows = []
        for y in ys:
            vals = [float(v) for v in self.values_at(c.base, tuple(y))]
            if c.kind == GRAPH:
                z = vals[c.level - 1]
            else:
                u = rng.uniform(0.02, 0.98)
                z = vals[c.level - 1] + u * (vals[c.level] - vals[c.level - 1])
            rows.append(np.append(y, z))
        if closed:
            rows.extend(as_float(v) for v in c.vertices)
        return np.array(rows)

    def __repr__(self) -> str:
        return f"PolyhedralComplex(b={self.b}, cells={self.counts()})"


def build_polyhedral_complex(
    S: StackPresentation,
    K: SimplicialComplex,
    functions: Optional[Sequence[DefinableFunction]] = None,
    seed: Optional[int] = None,
) -> PolyhedralComplex:
    """在已分离的底复形上建立 K_p"""
    functions = list(functions if functions is not None else S.functions)
    failures = _separation_failures(functions, K, seed)
    if failures:
        raise PreconditionError(f"vertex separation has not been established on {len(failures)} simplices, "
                                f"e.g. {failures[0]}; run refine_until_separated first")
    psi = [semilinear_interpolant(h, K, name=f"psi{k + 1}") for k, h in enumerate(functions)]
    P = PolyhedralComplex(K, psi, functions, tol=S.tol)
    logger.info("[Polyhedral] %s over %d base simplices", P.counts(), len(K))
    return P


def subdivide_polyhedral(P: PolyhedralComplex) -> Dict[Simplex, PolyhedralCell]:
    """K*_p: 与单纯复形相同的锥递归；返回 {单形: 承载胞腔}"""
    return subdivide_cells(
        P.cells,
        dim_of=lambda c: c.dim,
        barycentre_of=lambda c: c.barycentre(),
        proper_faces_of=P.faces_of,
    )


# ============ 分层同胚 ============

@dataclass
class LipschitzCertificate:
    bound: float
    sampled: float
    method: str                    # declared | estimated | formula
    ratio: Optional[float] = None  # g/ψ_g 因子的界 (带胞腔)

    @property
    def consistent(self) -> bool:
        return self.sampled <= self.bound * (1 + 1e-9) + DEFAULTS["metric_slack"]

    def to_dict(self) -> Dict:
        return {"bound": self.bound, "sampled": self.sampled, "method": self.method, "ratio": self.ratio}


@dataclass
class StratifiedHomeomorphism:
    """
    分层同胚

    source_cells: 源胞腔编号
    image_descriptors: 源胞腔 -> 像所在的层 (栈胞腔编号等)
    """
    forward: PointMap
    inverse: PointMap
    source_cells: List[str] = field(default_factory=list)
    image_descriptors: Dict[str, str] = field(default_factory=dict)
    lipschitz_certificates: Dict[str, LipschitzCertificate] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    name: str = "H"

    def __call__(self, p: Sequence[Scalar]) -> Point:
        return self.forward(p)

    @classmethod
    def identity(cls, name: str = "id") -> "StratifiedHomeomorphism":
        return cls(_identity, _identity, name=name)

    def max_bound(self) -> float:
        return max((c.bound for c in self.lipschitz_certificates.values()), default=0.0)

    def compose(self, inner: "StratifiedHomeomorphism", name: str = "") -> "StratifiedHomeomorphism":
        """self ∘ inner"""
        outer = self
        return StratifiedHomeomorphism(
            forward=lambda p: outer.forward(inner.forward(p)),
            inverse=lambda q: inner.inverse(outer.inverse(q)),
            source_cells=list(inner.source_cells),
            notes=inner.notes + outer.notes,
            name=name or f"{outer.name}∘{inner.name}",
        )


def build_H(
    P: PolyhedralComplex,
    S: StackPresentation,
    base_map: PointMap = _identity,
    base_inverse: PointMap = _identity,
    base_lipschitz: Callable[[Simplex], float] = lambda s: 1.0,
    certify: bool = True,
    samples: int = 32,
    seed: Optional[int] = None,
) -> StratifiedHomeomorphism:
    """
    H(y, z) = (h(y), η_k(h(y)))                         z = ψ_k(y)
            = (h(y), η_k + (z - ψ_k)/(ψ_{k+1} - ψ_k)·(η_{k+1} - η_k))   ψ_k(y) < z < ψ_{k+1}(y)
    h 为底空间的三角剖分映射 (n = 2 时为恒等)。
    """
    tol = P.tol

    def forward(p: Sequence[Scalar]) -> Point:
        c = P.locate(p)
        if c is None:
            raise DomainError(f"{tuple(float(v) for v in p)} lies outside |K_p|")
        y, z = tuple(p[:-1]), p[-1]
        x = base_map(y)
        eta = S.eta(x)
        if c.kind == GRAPH:
            return tuple(x) + (eta[c.level - 1],)
        vals = P.values_at(c.base, y)
        lo, hi = vals[c.level - 1], vals[c.level]
        if not hi - lo > 0:
            raise PreconditionError(f"band {c.id} has zero height at {y}; separation is broken")
        t = (z - lo) / (hi - lo)
        return tuple(x) + (eta[c.level - 1] + t * (eta[c.level] - eta[c.level - 1]),)

    def inverse(q: Sequence[Scalar]) -> Point:
        x, w = tuple(q[:-1]), q[-1]
        y = base_inverse(x)
        s = P.base_complex.locate(y, tol)
        if s is None:
            raise DomainError(f"{tuple(float(v) for v in q)} lies outside the image of H")
        eta = S.eta(x)
        vals = P.values_at(s, y)
        for k in range(P.b):
            if _equal(w, eta[k], tol):
                # 重合的 η 取最小下标的图像
                return tuple(y) + (vals[k],)
        for k in range(P.b - 1):
            lo, hi = eta[k], eta[k + 1]
            if lo < w < hi:
                t = (w - lo) / (hi - lo)
                return tuple(y) + (vals[k] + t * (vals[k + 1] - vals[k]),)
        raise DomainError(f"{tuple(float(v) for v in q)} lies outside the image of H")

    H = StratifiedHomeomorphism(forward, inverse, source_cells=[c.id for c in P.cells], name=f"H{S.dim}")
    for c in P.cells:
        try:
            H.image_descriptors[c.id] = S.locate_cell(forward(c.barycentre())) or "?"
        except DomainError:
            H.image_descriptors[c.id] = "?"
    if certify:
        for i, c in enumerate(P.cells):
            H.lipschitz_certificates[c.id] = lipschitz_bound_H(
                P, S, c, forward=forward, base_lipschitz=base_lipschitz(c.base),
                samples=samples, seed=default_seed(seed) + i)
    return H


def collapse_ratio_bound(gap_values: Sequence[Scalar], L_g: float, diam: float) -> float:
    """
    g/ψ_g 在单形上的界 (g = η_{k+1} - η_k ≥ 0, 顶点值 gap_values):
    g 在某些顶点为 0 时为 L_g·diam·(非零顶点数)/min{非零顶点值}，否则为 1 + L_g·diam/min{顶点值}
    """
    positive = [float(g) for g in gap_values if g > 0]
    if not positive:
        return 0.0
    if len(positive) < len(gap_values):
        return L_g * diam * len(positive) / min(positive)
    return 1.0 + L_g * diam / min(positive)


def lipschitz_bound_H(
    P: PolyhedralComplex,
    S: StackPresentation,
    cell: PolyhedralCell,
    forward: Optional[PointMap] = None,
    base_lipschitz: float = 1.0,
    samples: int = 32,
    seed: int = 0,
) -> LipschitzCertificate:
    """
    闭胞腔上 H 的 Lipschitz 界 (减去 f = η_k 后按 g = η_{k+1} - η_k 组装)，
    同时给出采样的差商最大值以便交叉检验
    """
    s = cell.base
    f = P.functions[cell.level - 1]
    L_f, how = f.lipschitz_constant(s, samples, seed)
    if cell.kind == GRAPH:
        bound, ratio = base_lipschitz + L_f, None
    else:
        upper = P.functions[cell.level]
        L_up, how_up = upper.lipschitz_constant(s, samples, seed)
        L_g = L_f + L_up
        gaps = [hi - lo for lo, hi in zip(P.psi[cell.level - 1].vertex_values(s), P.psi[cell.level].vertex_values(s))]
        ratio = collapse_ratio_bound(gaps, L_g, s.diameter())
        grad_f = float(np.linalg.norm(P.psi[cell.level - 1].gradient(s)))
        grad_g = float(np.linalg.norm(P.psi[cell.level].gradient(s) - P.psi[cell.level - 1].gradient(s)))
        a = L_f + L_g + ratio * (grad_f + grad_g)
        bound = base_lipschitz + float(np.hypot(a, ratio))
        how = "declared" if how == how_up == "declared" else "estimated"
    sampled = _sampled_quotient(P, S, cell, forward, samples, seed)
    return LipschitzCertificate(bound=float(bound), sampled=sampled, method=f"formula/{how}", ratio=ratio)


def _sampled_quotient(P, S, cell, forward, samples, seed) -> float:
    if cell.dim == 0:
        return 0.0
    if forward is None:
        forward = build_H(P, S, certify=False).forward
    rng = np.random.default_rng(seed)
    pts = P.sample_cell(cell, rng, samples, closed=True)
    images = []
    kept = []
    for p in pts:
        try:
            images.append(as_float(forward(tuple(float(v) for v in p))))
            kept.append(p)
        except DomainError:
            continue
    if len(kept) < 2:
        return 0.0
    pts, images = np.array(kept), np.array(images)
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    diff = np.linalg.norm(images[:, None, :] - images[None, :, :], axis=-1)
    mask = dist > 1e-9
    return float(np.max(diff[mask] / dist[mask])) if np.any(mask) else 0.0


# ============ 紧化 ============

def compactify(p: Sequence[float]) -> np.ndarray:
    """ζ(x) = x / sqrt(1 + |x|²)，像落在开单位球内"""
    x = np.asarray(p, dtype=float)
    return x / np.sqrt(1.0 + float(x @ x))


def decompactify(u: Sequence[float]) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    r2 = float(u @ u)
    if r2 >= 1.0:
        raise DomainError(f"decompactify needs |u| < 1, got {np.sqrt(r2):.6g}")
    return u / np.sqrt(1.0 - r2)


# ============ 拼接与像定律 ============

def quasi_convexity_factor(K: SimplicialComplex, max_sources: int = 400, seed: Optional[int] = None) -> float:
    """
    每个连通分支上 (1-骨架测地距离 / 欧氏距离) 的最大值
    顶点过多时随机选取 max_sources 个起点
    """
    n = len(K.vertex_index)
    if n <= 1:
        return 1.0
    pts = np.array([as_float(K.vertex_index[i]) for i in range(n)])
    rows, cols, weights = [], [], []
    for e in K.of_dim(1):
        i, j = K.index_key(e)
        rows.append(i)
        cols.append(j)
        weights.append(float(np.linalg.norm(pts[i] - pts[j])))
    graph = coo_matrix((weights, (rows, cols)), shape=(n, n)).tocsr()
    _, labels = connected_components(graph, directed=False)
    sources = np.arange(n)
    if n > max_sources:
        sources = np.random.default_rng(default_seed(seed)).choice(n, size=max_sources, replace=False)
    geo = dijkstra(graph, directed=False, indices=sources)
    factor = 1.0
    for row, i in enumerate(sources):
        same = labels == labels[i]
        eu = np.linalg.norm(pts - pts[i], axis=1)
        mask = same & (eu > 1e-12) & np.isfinite(geo[row])
        if np.any(mask):
            factor = max(factor, float(np.max(geo[row][mask] / eu[mask])))
    return factor


def global_lipschitz_bound(H: StratifiedHomeomorphism, K: SimplicialComplex) -> float:
    """拼接: 每个连通分支上全局常数 ≤ 胞腔常数最大值 × 拟凸因子"""
    return H.max_bound() * quasi_convexity_factor(K)


@dataclass
class ImageLawReport:
    forward_samples: int = 0
    inverse_samples: int = 0
    max_roundtrip_error: float = 0.0
    violations: List[Dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> Dict:
        return {
            "forward_samples": self.forward_samples,
            "inverse_samples": self.inverse_samples,
            "max_roundtrip_error": self.max_roundtrip_error,
            "violations": self.violations[:20],
            "ok": self.ok,
        }


def image_law_check(
    H: StratifiedHomeomorphism,
    S: StackPresentation,
    P: PolyhedralComplex,
    samples: int = 1000,
    seed: Optional[int] = None,
    tol: float = 1e-9,
) -> ImageLawReport:
    """
    双向成员采样:
    1. |K_p| 中的点经 H 落在栈中，且 H⁻¹∘H ≈ id
    2. 栈中的点经 H⁻¹ 落在 |K_p| 中，且 H∘H⁻¹ ≈ id
    """
    rng = np.random.default_rng(default_seed(seed))
    report = ImageLawReport()
    per = max(1, samples // max(1, len(P.cells)))
    for c in P.cells:
        for p in P.sample_cell(c, rng, per):
            p = tuple(float(v) for v in p)
            report.forward_samples += 1
            try:
                q = H.forward(p)
                back = H.inverse(q)
            except DomainError as e:
                report.violations.append({"kind": "forward", "cell": c.id, "point": list(p), "error": str(e)})
                continue
            err = float(np.linalg.norm(as_float(back) - as_float(p)))
            report.max_roundtrip_error = max(report.max_roundtrip_error, err)
            if not S.contains_point(q) or err > tol * max(1.0, float(np.linalg.norm(p))):
                report.violations.append({"kind": "forward", "cell": c.id, "point": list(p), "error": err})
    stack_cells = S.cells()
    per = max(1, samples // max(1, len(stack_cells)))
    for sc in stack_cells:
        for q in S.sample_cell(sc.id, rng, per):
            q = tuple(float(v) for v in q)
            report.inverse_samples += 1
            try:
                p = H.inverse(q)
                again = H.forward(p)
            except DomainError as e:
                report.violations.append({"kind": "inverse", "cell": sc.id, "point": list(q), "error": str(e)})
                continue
            err = float(np.linalg.norm(as_float(again) - as_float(q)))
            report.max_roundtrip_error = max(report.max_roundtrip_error, err)
            if P.locate(p) is None or err > tol * max(1.0, float(np.linalg.norm(q))):
                report.violations.append({"kind": "inverse", "cell": sc.id, "point": list(q), "error": err})
    if report.violations:
        logger.warning("[ImageLaw] %d violation(s) out of %d samples", len(report.violations),
                       report.forward_samples + report.inverse_samples)
    return report
