"""
锥生成器 - 锥胞腔、锥复形 K₃、半线性同构 f 与锥形延拓 h₃

K₃ 的顶点是 ℝ^T 中标准单形的顶点 e_0 … e_{T-1}:
    e_0 … e_{α-1}   对应 K₂ 的顶点 (子复形 L ≅ K₂)
    e_α … e_{T-1}   每个 K₁ 的 d 维单形 △_j 一个锥顶
|K₃| 上的点用重心权重 {顶点编号: 权重} 表示；T 不大时同时给出显式坐标。
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import DegenerateConeError, DomainError, IncidenceError
from src.core.grassmann import Chart
from src.core.simplicial import (
    BaryPoint, IndexedComplex, Point, Scalar, Simplex, SimplicialComplex, affine_rank, as_float,
    cone_simplex, is_exact,
)
from src.generators.gen_stack import LipschitzCertificate, StratifiedHomeomorphism
from src.utils.config import DEFAULTS

logger = logging.getLogger(__name__)

# 超过这个顶点数就不展开 ℝ^T 坐标
EXPLICIT_COORDINATE_LIMIT = 50


@dataclass(frozen=True)
class ConeCell:
    """开锥 {(1-t)·c + t·x : x ∈ Γ, t ∈ (0,1)}"""
    vertex: Point
    base: Simplex

    def __post_init__(self):
        if len(self.vertex) != self.base.ambient_dim:
            raise DegenerateConeError(f"cone vertex in R^{len(self.vertex)} over a cell in R^{self.base.ambient_dim}")
        if affine_rank(self.base.vertices + (tuple(self.vertex),)) != self.base.dim + 1:
            raise DegenerateConeError(f"cone vertex {self.vertex} lies in the affine span of {self.base}")

    @property
    def dim(self) -> int:
        return self.base.dim + 1

    def point(self, x: Sequence[Scalar], t: Scalar) -> Point:
        if all(isinstance(v, (int, Fraction)) for v in list(x) + [t]) and is_exact(self.vertex):
            return tuple((1 - t) * c + t * xi for c, xi in zip(self.vertex, x))
        return tuple(float((1 - float(t)) * float(c) + float(t) * float(xi)) for c, xi in zip(self.vertex, x))

    def as_simplex(self) -> Simplex:
        return cone_simplex(self.vertex, self.base, validate=True)

    def contains(self, p: Sequence[Scalar], tol: float = DEFAULTS["geometric_tol"]) -> bool:
        return self.as_simplex().contains(p, tol)

    def closure_contains(self, p: Sequence[Scalar], tol: float = DEFAULTS["geometric_tol"]) -> bool:
        return self.as_simplex().closure_contains(p, tol)

    def chart(self, label: str = "") -> Chart:
        """(u, t) ↦ (1-t)·c + t·x(u)，u 为 Γ 的重心参数"""
        base = Chart.for_simplex(self.base.as_array())
        c = as_float(self.vertex)
        k = self.base.dim

        def fn(w):
            return (1 - w[-1]) * c + w[-1] * base(w[:-1])

        def inside(w):
            return 0 < w[-1] < 1 and base.contains(w[:-1])

        return Chart(fn, k + 1, len(c), domain=inside, label=label or f"cone({self.base})")


def cone(c: Sequence[Scalar], gamma: Simplex) -> ConeCell:
    """c 不在 Γ 的仿射包中"""
    return ConeCell(tuple(c), gamma)


# ============ K₃ ============

@dataclass
class ConeComplexK3:
    """
    锥复形 K₃

    complex: 组合复形 (顶点 0..T-1)
    alpha: L 的顶点数 (= K₂ 的顶点数)
    apexes: 锥顶编号 -> 对应的 d 维单形 △_j
    """
    complex: IndexedComplex
    alpha: int
    apexes: Dict[int, Simplex]
    source: IndexedComplex
    dim: int

    @property
    def T(self) -> int:
        return self.complex.vertex_count

    def is_apex(self, i: int) -> bool:
        return i >= self.alpha

    def apex_of(self, s: Tuple[int, ...]) -> Optional[int]:
        apex = [i for i in s if self.is_apex(i)]
        return apex[0] if apex else None

    def L_simplices(self) -> List[Tuple[int, ...]]:
        return [s for s in self.complex.sorted_simplices() if self.apex_of(s) is None]

    def counts(self) -> Dict[str, int]:
        out = {"L": 0, "apex": 0, "joined": 0}
        for s in self.complex.simplices:
            if self.apex_of(s) is None:
                out["L"] += 1
            elif len(s) == 1:
                out["apex"] += 1
            else:
                out["joined"] += 1
        return out

    def validate(self) -> List[str]:
        issues = self.complex.validate()
        for s in self.complex.simplices:
            if sum(1 for i in s if self.is_apex(i)) > 1:
                issues.append(f"simplex {s} joins more than one apex")
        return issues


def _standard_basis(T: int) -> Tuple[Point, ...]:
    return tuple(tuple(Fraction(1) if j == i else Fraction(0) for j in range(T)) for i in range(T))


def _in_closure(s: Simplex, pts: Sequence[Point]) -> bool:
    return all(s.closure_contains(p) for p in pts)


def build_K3(
    K1: SimplicialComplex,
    K2: IndexedComplex,
    h2: StratifiedHomeomorphism,
) -> ConeComplexK3:
    """
    K₃ 的单形:
    1. K₂ 单形在 L 中的像
    2. [e_j, e_β₁, …, e_βs]: h₂ 把 K₂ 单形 [a_β₁, …, a_βs] 送进 closure(△_j)
    3. 单独的锥顶 [e_j]
    包含关系用顶点与重心的像判定 (h₂ 精确时为精确判定)。
    """
    d = K1.dim
    tops = K1.of_dim(d)
    alpha = K2.vertex_count
    pure = K1.is_pure()
    apexes = {alpha + j: s for j, s in enumerate(tops)}
    simplices = set(K2.simplices)
    for sigma in K2.sorted_simplices():
        images = [h2.forward({i: Fraction(1)}) for i in sigma]
        images.append(h2.forward({i: Fraction(1, len(sigma)) for i in sigma}))
        carriers = [apex for apex, top in apexes.items() if _in_closure(top, images)]
        if not carriers:
            inside = any(_in_closure(m, images) for m in K1.maximal())
            if not inside:
                raise IncidenceError(f"h2 sends simplex {sigma} outside |K1|")
            if pure:
                raise IncidenceError(f"h2 sends simplex {sigma} outside every {d}-simplex of K1")
        for apex in carriers:
            simplices.add(tuple(sigma) + (apex,))
    simplices.update((apex,) for apex in apexes)
    T = alpha + len(apexes)
    coords = _standard_basis(T) if T <= EXPLICIT_COORDINATE_LIMIT else None
    K3 = IndexedComplex(T, frozenset(simplices), coords)
    result = ConeComplexK3(K3, alpha, apexes, K2, d)
    logger.info("[K3] T=%d, %s%s", T, result.counts(), "" if coords else " (implicit coordinates)")
    return result


# ============ f 与 h₃ ============

def _support(w: Mapping[int, Scalar]) -> Dict[int, Scalar]:
    return {i: v for i, v in w.items() if v != 0}


def _edge_norm(src: np.ndarray, dst: np.ndarray) -> float:
    """把 src 顶点送到 dst 顶点的仿射映射的算子范数"""
    if len(src) <= 1:
        return 0.0
    e_src = (src[1:] - src[0]).T
    e_dst = (dst[1:] - dst[0]).T
    return float(np.linalg.norm(e_dst @ np.linalg.pinv(e_src), 2))


def semilinear_iso_f(K3: ConeComplexK3, K2: IndexedComplex) -> StratifiedHomeomorphism:
    """f(Σλⱼ e_βⱼ) = Σλⱼ a_βⱼ: L 与 K₂ 之间按顶点编号的单纯同构"""
    alpha = K3.alpha

    def forward(w: Mapping[int, Scalar]) -> BaryPoint:
        w = _support(w)
        if any(i >= alpha for i in w):
            raise DomainError("f is defined on |L| only")
        return dict(w)

    def inverse(w: Mapping[int, Scalar]) -> BaryPoint:
        return dict(_support(w))

    f = StratifiedHomeomorphism(forward, inverse, name="f")
    for s in K3.L_simplices():
        sid = ".".join(map(str, s))
        f.source_cells.append(sid)
        f.image_descriptors[sid] = sid
        src = np.eye(K3.T)[list(s)]
        if K2.coordinates is not None:
            dst = np.array([as_float(K2.coordinates[i]) for i in s])
        else:
            dst = np.eye(K2.vertex_count)[list(s)]
        norm = _edge_norm(src, dst)
        f.lipschitz_certificates[sid] = LipschitzCertificate(norm, norm, "exact")
    return f


def _mix(a: Sequence[Scalar], b: Sequence[Scalar], t: Scalar) -> Point:
    """(1-t)·a + t·b"""
    if is_exact(a) and is_exact(b) and isinstance(t, (int, Fraction)):
        return tuple((1 - t) * x + t * y for x, y in zip(a, b))
    tf = float(t)
    return tuple((1 - tf) * float(x) + tf * float(y) for x, y in zip(a, b))


def conical_extension_h3(
    K3: ConeComplexK3,
    h2f: StratifiedHomeomorphism,
    barycentres: Optional[Mapping[int, Point]] = None,
    certify: bool = False,
    samples: int = 16,
    seed: int = 0,
) -> StratifiedHomeomorphism:
    """
    h₃(z) = h₂∘f(z)                         z ∈ |L|
          = (1-t)·0_{△_j} + t·h₂∘f(x)       z = (1-t)·e_j + t·x, x ∈ |L|, t ∈ (0,1)
          = 0_{△_j}                          z = e_j
    certify 时每个单形记录顶点像的边范数 (解析界) 与采样差商
    """
    centres: Dict[int, Point] = {}
    for apex, top in K3.apexes.items():
        c = tuple(barycentres[apex]) if barycentres and apex in barycentres else top.barycentre()
        if not top.contains(c):
            raise DegenerateConeError(f"cone point {c} is not interior to {top}")
        centres[apex] = c

    def forward(w: Mapping[int, Scalar]) -> Point:
        w = _support(w)
        apex = [i for i in w if K3.is_apex(i)]
        if not apex:
            return h2f.forward(w)
        if len(apex) > 1:
            raise DomainError(f"point {w} mixes several apexes")
        j = apex[0]
        t = 1 - w[j]
        if t == 0:
            return centres[j]
        x = {i: v / t for i, v in w.items() if i != j}
        return _mix(centres[j], h2f.forward(x), t)

    def inverse(p: Sequence[Scalar]) -> BaryPoint:
        p = tuple(p)
        for apex, top in K3.apexes.items():
            mu = top.barycentric_coordinates(p)
            if mu is None:
                continue
            exact = is_exact(p) and top.exact
            eps = 0 if exact else DEFAULTS["geometric_tol"]
            if any(m < -eps for m in mu):
                continue
            if not all(m > eps for m in mu):
                break
            beta = top.barycentric_coordinates(centres[apex])
            if all(abs(m - b) <= eps for m, b in zip(mu, beta)):
                return {apex: Fraction(1) if exact else 1.0}
            # 从 0_△ 出发经过 p 的射线在 s 处离开 △
            s = min(b / (b - m) for m, b in zip(mu, beta) if m < b)
            t = 1 / s
            exit_point = _mix(centres[apex], p, s)
            x = h2f.inverse(exit_point)
            out = {i: t * v for i, v in x.items()}
            out[apex] = 1 - t
            return out
        return dict(h2f.inverse(p))

    h3 = StratifiedHomeomorphism(forward, inverse, name="h3")
    for s in K3.complex.sorted_simplices():
        sid = ".".join(map(str, s))
        h3.source_cells.append(sid)
        apex = K3.apex_of(s)
        h3.image_descriptors[sid] = "L" if apex is None else f"cone:{apex}"
    if certify:
        rng = np.random.default_rng(seed)
        for s in K3.complex.sorted_simplices():
            if len(s) < 2:
                continue
            sid = ".".join(map(str, s))
            # h₂∘f 逐单形仿射时 h₃ 在 s 上仿射，顶点像的边范数即 Lipschitz 常数
            corners = np.array([as_float(forward({i: Fraction(1)})) for i in s])
            bound = _edge_norm(np.eye(len(s)), corners)
            sampled = _sampled_simplex_quotient(forward, s, rng, samples)
            cert = LipschitzCertificate(bound, sampled, "edge-norm")
            if not cert.consistent:
                logger.warning("[h3] sampled quotient %.6g exceeds the edge norm %.6g on %s; h2∘f is not affine there",
                               sampled, bound, sid)
            h3.lipschitz_certificates[sid] = cert
    return h3


def _sampled_simplex_quotient(fn, s: Tuple[int, ...], rng: np.random.Generator, samples: int) -> float:
    """闭单形上的差商最大值 (重心权重空间中的欧氏距离)"""
    weights = rng.standard_exponential((samples, len(s)))
    weights /= weights.sum(axis=1, keepdims=True)
    weights = np.vstack([np.eye(len(s)), weights])
    images = np.array([as_float(fn({i: float(w) for i, w in zip(s, row)})) for row in weights])
    dist = np.linalg.norm(weights[:, None, :] - weights[None, :, :], axis=-1)
    diff = np.linalg.norm(images[:, None, :] - images[None, :, :], axis=-1)
    mask = dist > 1e-12
    return float(np.max(diff[mask] / dist[mask])) if np.any(mask) else 0.0
