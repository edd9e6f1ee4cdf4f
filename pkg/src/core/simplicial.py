"""
单纯复形 - 开单形、复形、骨架、重心与重心细分

坐标默认存为精确有理数 (Fraction)，组合判定 (仿射无关、包含关系、分离条件)
全部精确；浮点视图只用于数值采样。
"""
import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Callable, Dict, FrozenSet, Hashable, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

import numpy as np
import sympy
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from src.core.errors import DegenerateSimplexError, DomainError
from src.utils.config import DEFAULTS, as_fraction

logger = logging.getLogger(__name__)

Scalar = Union[Fraction, float]
Point = Tuple[Scalar, ...]
BaryPoint = Dict[int, Scalar]


def as_point(coords: Iterable) -> Point:
    """精确点: 每个坐标转为 Fraction (浮点也按二进制精确值转换)"""
    return tuple(as_fraction(c) for c in coords)


def is_exact(p: Sequence) -> bool:
    return all(isinstance(c, (Fraction, int)) for c in p)


def as_float(p: Sequence) -> np.ndarray:
    return np.array([float(c) for c in p], dtype=float)


def _rational(c) -> sympy.Rational:
    c = as_fraction(c)
    return sympy.Rational(c.numerator, c.denominator)


def _to_fraction(r) -> Fraction:
    r = sympy.nsimplify(r) if not isinstance(r, sympy.Rational) else r
    return Fraction(int(r.p), int(r.q))


@lru_cache(maxsize=65536)
def affine_rank(points: Tuple[Point, ...]) -> int:
    """边矩阵的秩；精确点用 sympy，浮点用 numpy"""
    if len(points) <= 1:
        return 0
    base = points[0]
    if all(is_exact(p) for p in points):
        rows = [[_rational(a) - _rational(b) for a, b in zip(p, base)] for p in points[1:]]
        return int(sympy.Matrix(rows).rank())
    edges = np.array([as_float(p) - as_float(base) for p in points[1:]])
    return int(np.linalg.matrix_rank(edges, tol=DEFAULTS["geometric_tol"]))


def mean_point(points: Sequence[Point]) -> Point:
    k = len(points)
    if all(is_exact(p) for p in points):
        return tuple(sum((Fraction(c) for c in coords), Fraction(0)) / k for coords in zip(*points))
    return tuple(float(v) for v in np.mean([as_float(p) for p in points], axis=0))


@dataclass(frozen=True)
class Simplex:
    """开单形: k+1 个仿射无关点，顶点按字典序排列"""
    vertices: Tuple[Point, ...]
    validate: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        verts = tuple(sorted(tuple(v) for v in self.vertices))
        if not verts:
            raise DegenerateSimplexError("a simplex needs at least one vertex")
        if len(set(verts)) != len(verts):
            raise DegenerateSimplexError(f"repeated vertex in {verts}")
        if len({len(v) for v in verts}) != 1:
            raise DegenerateSimplexError("vertices live in different ambient dimensions")
        object.__setattr__(self, "vertices", verts)
        if self.validate and affine_rank(verts) != len(verts) - 1:
            raise DegenerateSimplexError(f"vertices are affinely dependent: {verts}")

    @classmethod
    def of(cls, *points: Iterable) -> "Simplex":
        return cls(tuple(as_point(p) for p in points))

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1

    @property
    def ambient_dim(self) -> int:
        return len(self.vertices[0])

    @property
    def exact(self) -> bool:
        return all(is_exact(v) for v in self.vertices)

    def faces(self) -> FrozenSet["Simplex"]:
        """全部 2^{k+1}-1 个非空顶点子集 (含自身)"""
        out = set()
        for size in range(1, len(self.vertices) + 1):
            for subset in itertools.combinations(self.vertices, size):
                out.add(Simplex(subset, validate=False))
        return frozenset(out)

    def boundary(self) -> FrozenSet["Simplex"]:
        return frozenset(f for f in self.faces() if f != self)

    def is_face_of(self, other: "Simplex") -> bool:
        return set(self.vertices) <= set(other.vertices)

    def barycentre(self) -> Point:
        return mean_point(self.vertices)

    def as_array(self) -> np.ndarray:
        return np.array([as_float(v) for v in self.vertices])

    def diameter(self) -> float:
        pts = self.as_array()
        if len(pts) == 1:
            return 0.0
        return float(max(np.linalg.norm(a - b) for a, b in itertools.combinations(pts, 2)))

    def point_at(self, weights: Sequence[Scalar]) -> Point:
        """由重心坐标得到点"""
        if all(isinstance(w, (Fraction, int)) for w in weights) and self.exact:
            return tuple(sum((Fraction(w) * v[i] for w, v in zip(weights, self.vertices)), Fraction(0))
                         for i in range(self.ambient_dim))
        return tuple(float(x) for x in np.asarray(weights, dtype=float) @ self.as_array())

    @cached_property
    def _exact_frame(self):
        # 边矩阵 E (n×k) 的主元行及其逆，用于精确求解重心坐标
        k = self.dim
        if k == 0:
            return (), None
        base = self.vertices[0]
        cols = [[_rational(a) - _rational(b) for a, b in zip(v, base)] for v in self.vertices[1:]]
        edge = sympy.Matrix(cols).T
        _, pivots = edge.T.rref()
        rows = tuple(pivots)
        block_inv = edge.extract(list(rows), list(range(k))).inv()
        inv = [[_to_fraction(block_inv[i, j]) for j in range(k)] for i in range(k)]
        edges = [[_to_fraction(edge[r, j]) for j in range(k)] for r in range(self.ambient_dim)]
        return rows, (inv, edges)

    @cached_property
    def _float_frame(self):
        pts = self.as_array()
        edge = (pts[1:] - pts[0]).T
        return pts[0], edge, np.linalg.pinv(edge) if self.dim else None

    def barycentric_coordinates(self, p: Sequence, tol: float = DEFAULTS["geometric_tol"]) -> Optional[Tuple[Scalar, ...]]:
        """p 在仿射包中的重心坐标；不在仿射包中返回 None"""
        if len(p) != self.ambient_dim:
            raise DomainError(f"point of dimension {len(p)} against simplex in R^{self.ambient_dim}")
        if is_exact(p) and self.exact:
            d = [Fraction(a) - b for a, b in zip(p, self.vertices[0])]
            if self.dim == 0:
                return (Fraction(1),) if all(x == 0 for x in d) else None
            rows, (inv, edges) = self._exact_frame
            rhs = [d[r] for r in rows]
            beta = [sum((inv[i][j] * rhs[j] for j in range(len(rhs))), Fraction(0)) for i in range(self.dim)]
            for r in range(self.ambient_dim):
                if sum((edges[r][j] * beta[j] for j in range(self.dim)), Fraction(0)) != d[r]:
                    return None
            return (1 - sum(beta, Fraction(0)),) + tuple(beta)
        origin, edge, pinv = self._float_frame
        d = as_float(p) - origin
        if self.dim == 0:
            return (1.0,) if np.linalg.norm(d) <= tol else None
        beta = pinv @ d
        if np.linalg.norm(edge @ beta - d) > tol * max(1.0, np.linalg.norm(d)):
            return None
        return (1.0 - float(beta.sum()),) + tuple(float(b) for b in beta)

    def closure_contains(self, p: Sequence, tol: float = DEFAULTS["geometric_tol"]) -> bool:
        coords = self.barycentric_coordinates(p, tol)
        if coords is None:
            return False
        eps = 0 if is_exact(p) and self.exact else tol
        return all(c >= -eps for c in coords)

    def contains(self, p: Sequence, tol: float = DEFAULTS["geometric_tol"]) -> bool:
        """开单形成员关系 (重心坐标严格为正)"""
        coords = self.barycentric_coordinates(p, tol)
        if coords is None:
            return False
        eps = 0 if is_exact(p) and self.exact else tol
        return all(c > eps for c in coords)

    def support(self, p: Sequence, tol: float = DEFAULTS["geometric_tol"]) -> Optional["Simplex"]:
        """闭单形中包含 p 的那个开面"""
        coords = self.barycentric_coordinates(p, tol)
        if coords is None:
            return None
        eps = 0 if is_exact(p) and self.exact else tol
        if any(c < -eps for c in coords):
            return None
        verts = tuple(v for v, c in zip(self.vertices, coords) if c > eps)
        return Simplex(verts, validate=False) if verts else None

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """闭单形内均匀采样 (Dirichlet(1))；前缀与 count 无关"""
        weights = rng.standard_exponential((count, self.dim + 1))
        weights /= weights.sum(axis=1, keepdims=True)
        return weights @ self.as_array()

    def __str__(self) -> str:
        return "[" + ", ".join("(" + ",".join(str(c) for c in v) + ")" for v in self.vertices) + "]"


# ============ 模块级操作 ============

def faces(s: Simplex) -> FrozenSet[Simplex]:
    return s.faces()


def barycentre(s: Simplex) -> Point:
    return s.barycentre()


def cone_simplex(apex: Point, base: Simplex, validate: bool = False) -> Simplex:
    """单形锥 apex * base"""
    return Simplex(base.vertices + (tuple(apex),), validate=validate)


class SimplicialComplex:
    """
    有限单纯复形

    维护面格:
    1. _facets[s]: s 的余维 1 面
    2. _cofaces[s]: 以 s 为余维 1 面的单形
    """

    def __init__(self, simplices: Iterable[Simplex], close: bool = False):
        items: Set[Simplex] = set(simplices)
        if close:
            for s in list(items):
                items.update(s.faces())
        self.simplices: FrozenSet[Simplex] = frozenset(items)
        self._facets: Dict[Simplex, Set[Simplex]] = defaultdict(set)
        self._cofaces: Dict[Simplex, Set[Simplex]] = defaultdict(set)
        for s in self.simplices:
            if s.dim == 0:
                continue
            for subset in itertools.combinations(s.vertices, s.dim):
                f = Simplex(subset, validate=False)
                if f in self.simplices:
                    self._facets[s].add(f)
                    self._cofaces[f].add(s)
        verts = sorted({v for s in self.simplices for v in s.vertices})
        self.vertex_index: Dict[int, Point] = dict(enumerate(verts))
        self._vertex_id: Dict[Point, int] = {v: i for i, v in self.vertex_index.items()}

    # ---- 基本属性 ----
    def __len__(self) -> int:
        return len(self.simplices)

    def __iter__(self):
        return iter(self.sorted_simplices())

    def __contains__(self, s: Simplex) -> bool:
        return s in self.simplices

    def __eq__(self, other) -> bool:
        return isinstance(other, SimplicialComplex) and self.simplices == other.simplices

    def __hash__(self) -> int:
        return hash(self.simplices)

    @property
    def dim(self) -> int:
        return max((s.dim for s in self.simplices), default=-1)

    @property
    def ambient_dim(self) -> int:
        return next(iter(self.simplices)).ambient_dim if self.simplices else 0

    @property
    def exact(self) -> bool:
        return all(is_exact(v) for v in self.vertex_index.values())

    def vertex_id(self, p: Point) -> int:
        return self._vertex_id[tuple(p)]

    def sorted_simplices(self) -> List[Simplex]:
        return sorted(self.simplices, key=lambda s: (s.dim, s.vertices))

    def of_dim(self, k: int) -> List[Simplex]:
        return [s for s in self.sorted_simplices() if s.dim == k]

    def counts(self) -> Dict[int, int]:
        out: Dict[int, int] = defaultdict(int)
        for s in self.simplices:
            out[s.dim] += 1
        return dict(sorted(out.items()))

    def index_key(self, s: Simplex) -> Tuple[int, ...]:
        return tuple(self._vertex_id[v] for v in s.vertices)

    # ---- 面格查询 ----
    def facets_of(self, s: Simplex) -> Set[Simplex]:
        return set(self._facets.get(s, ()))

    def cofaces(self, s: Simplex) -> Set[Simplex]:
        """全部以 s 为真面的单形 (BFS)"""
        result: Set[Simplex] = set()
        queue = list(self._cofaces.get(s, ()))
        while queue:
            t = queue.pop()
            if t in result:
                continue
            result.add(t)
            queue.extend(self._cofaces.get(t, ()))
        return result

    def star(self, s: Simplex) -> Set[Simplex]:
        return {s} | self.cofaces(s)

    def maximal(self) -> List[Simplex]:
        return [s for s in self.sorted_simplices() if not self._cofaces.get(s)]

    def is_pure(self) -> bool:
        return all(s.dim == self.dim for s in self.maximal())

    def skeleton(self, l: int) -> "SimplicialComplex":
        return skeleton(self, l)

    def components(self) -> List[List[Point]]:
        """按 1-骨架划分连通分支 (scipy csgraph)"""
        n = len(self.vertex_index)
        if n == 0:
            return []
        rows, cols = [], []
        for e in self.of_dim(1):
            i, j = self.index_key(e)
            rows.append(i)
            cols.append(j)
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        count, labels = connected_components(adj, directed=False)
        groups: List[List[Point]] = [[] for _ in range(count)]
        for i, label in enumerate(labels):
            groups[label].append(self.vertex_index[i])
        return groups

    # ---- 有效性 ----
    def validate(self) -> List[str]:
        """
        验证复形

        Returns:
            list_of_issues (为空表示有效)
        """
        issues = []
        issues.extend(self._check_face_closure())
        issues.extend(self._check_disjointness())
        return issues

    def is_valid(self) -> bool:
        return not self.validate()

    def _check_face_closure(self) -> List[str]:
        issues = []
        for s in self.sorted_simplices():
            missing = [f for f in s.boundary() if f not in self.simplices]
            if missing:
                issues.append(f"Face closure: {s} misses {len(missing)} face(s), e.g. {missing[0]}")
        return issues

    def _check_disjointness(self) -> List[str]:
        issues = []
        items = self.sorted_simplices()
        boxes = [(s.as_array().min(axis=0), s.as_array().max(axis=0)) for s in items]
        tol = DEFAULTS["geometric_tol"]
        for i, j in itertools.combinations(range(len(items)), 2):
            s, t = items[i], items[j]
            if s.is_face_of(t) or t.is_face_of(s):
                continue
            (lo1, hi1), (lo2, hi2) = boxes[i], boxes[j]
            if np.any(hi1 < lo2 - tol) or np.any(hi2 < lo1 - tol):
                continue
            if _open_simplices_meet(s, t):
                issues.append(f"Disjointness: {s} and {t} intersect")
        return issues

    def locate(self, p: Sequence, tol: float = DEFAULTS["geometric_tol"]) -> Optional[Simplex]:
        return locate(self, p, tol)

    def to_dict(self) -> Dict:
        return {
            "vertices": [[str(c) for c in self.vertex_index[i]] for i in range(len(self.vertex_index))],
            "simplices": [list(self.index_key(s)) for s in self.sorted_simplices()],
        }

    def __repr__(self) -> str:
        return f"SimplicialComplex(dim={self.dim}, counts={self.counts()})"


def _open_simplices_meet(s: Simplex, t: Simplex) -> bool:
    """两个开单形是否相交: 最大化公共点重心坐标的最小值 t*，t* > 0 即相交"""
    a, b = s.as_array(), t.as_array()
    na, nb = len(a), len(b)
    n_var = na + nb + 1
    c = np.zeros(n_var)
    c[-1] = -1.0
    a_ub = np.zeros((na + nb, n_var))
    for i in range(na + nb):
        a_ub[i, i] = -1.0
        a_ub[i, -1] = 1.0
    b_ub = np.zeros(na + nb)
    dim = a.shape[1]
    a_eq = np.zeros((dim + 2, n_var))
    a_eq[:dim, :na] = a.T
    a_eq[:dim, na:na + nb] = -b.T
    a_eq[dim, :na] = 1.0
    a_eq[dim + 1, na:na + nb] = 1.0
    b_eq = np.zeros(dim + 2)
    b_eq[dim] = b_eq[dim + 1] = 1.0
    bounds = [(0, None)] * (na + nb) + [(0, 1)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    return bool(res.status == 0 and -res.fun > 1e-9)


def skeleton(K: SimplicialComplex, l: int) -> SimplicialComplex:
    """l 维骨架 {S ∈ K : dim S ≤ l}"""
    if l < 0:
        raise ValueError("skeleton dimension must be non-negative")
    return SimplicialComplex(s for s in K.simplices if s.dim <= l)


Cell = Hashable


def subdivide_cells(
    cells: Iterable[Cell],
    dim_of: Callable[[Cell], int],
    barycentre_of: Callable[[Cell], Point],
    proper_faces_of: Callable[[Cell], Iterable[Cell]],
) -> Dict[Simplex, Cell]:
    """
    胞腔复形的重心细分 (逐维递归):
    K* = (K^{(d-1)})* ∪ {0_c * τ : τ ⊂ ∂c} ∪ {0_c}

    Returns:
        {细分出的单形: 承载它的原胞腔}
    """
    by_dim: Dict[int, List[Cell]] = defaultdict(list)
    for cell in cells:
        by_dim[dim_of(cell)].append(cell)
    carrier: Dict[Simplex, Cell] = {}
    pieces: Dict[Cell, List[Simplex]] = defaultdict(list)
    for d in sorted(by_dim):
        for cell in by_dim[d]:
            apex = barycentre_of(cell)
            made = [Simplex((tuple(apex),), validate=False)]
            if d > 0:
                for face in proper_faces_of(cell):
                    made.extend(cone_simplex(apex, tau) for tau in pieces.get(face, ()))
            for s in made:
                carrier[s] = cell
            pieces[cell] = made
    return carrier


def barycentric_subdivision_with_carriers(K: SimplicialComplex) -> Dict[Simplex, Simplex]:
    return subdivide_cells(
        K.simplices,
        dim_of=lambda s: s.dim,
        barycentre_of=lambda s: s.barycentre(),
        proper_faces_of=lambda s: s.boundary(),
    )


def barycentric_subdivision(K: SimplicialComplex) -> SimplicialComplex:
    """重心细分 K*；0 维复形保持不变"""
    if K.dim <= 0:
        return K
    return SimplicialComplex(barycentric_subdivision_with_carriers(K).keys())


def subdivide(K: SimplicialComplex, times: int) -> SimplicialComplex:
    for _ in range(times):
        K = barycentric_subdivision(K)
    return K


def locate(K: SimplicialComplex, p: Sequence, tol: float = DEFAULTS["geometric_tol"]) -> Optional[Simplex]:
    """包含 p 的唯一开单形；p ∉ |K| 时返回 None"""
    for s in K.maximal():
        face = s.support(p, tol)
        if face is not None and face in K.simplices:
            return face
    return None


def stellar_subdivision(K: SimplicialComplex, s: Simplex, w: Sequence) -> SimplicialComplex:
    """在开单形 s 内的点 w 处做星形细分: 每个 s * ρ 换成 w * τ * ρ (τ 取 s 的真面或空)"""
    if s not in K:
        raise DomainError(f"{s} is not a simplex of the complex")
    w = tuple(w)
    if not s.contains(w):
        raise DomainError(f"split point {w} is not in the open simplex {s}")
    star = K.star(s)
    proper = [()] + [f.vertices for f in s.boundary()]
    fresh: Set[Simplex] = set()
    for sigma in star:
        rho = tuple(v for v in sigma.vertices if v not in s.vertices)
        for tau in proper:
            fresh.add(Simplex((w,) + tau + rho, validate=False))
    logger.debug("[Stellar] split %s at %s: -%d +%d simplices", s, w, len(star), len(fresh))
    return SimplicialComplex((K.simplices - star) | fresh)


@dataclass(frozen=True)
class IndexedComplex:
    """
    组合复形: 顶点为整数编号，单形为有序编号元组；坐标可选

    |K| 上的点用重心权重 {顶点编号: 权重} 表示，坐标需要时再展开。
    """
    vertex_count: int
    simplices: FrozenSet[Tuple[int, ...]]
    coordinates: Optional[Tuple[Point, ...]] = None

    @classmethod
    def from_simplicial(cls, K: SimplicialComplex) -> "IndexedComplex":
        coords = tuple(K.vertex_index[i] for i in range(len(K.vertex_index)))
        return cls(len(coords), frozenset(K.index_key(s) for s in K.simplices), coords)

    @property
    def dim(self) -> int:
        return max((len(s) - 1 for s in self.simplices), default=-1)

    def sorted_simplices(self) -> List[Tuple[int, ...]]:
        return sorted(self.simplices, key=lambda s: (len(s), s))

    def of_dim(self, k: int) -> List[Tuple[int, ...]]:
        return [s for s in self.sorted_simplices() if len(s) == k + 1]

    def proper_faces(self, s: Tuple[int, ...]) -> List[Tuple[int, ...]]:
        return [f for size in range(1, len(s)) for f in itertools.combinations(s, size)]

    def validate(self) -> List[str]:
        issues = []
        for s in self.sorted_simplices():
            if list(s) != sorted(set(s)) or not all(0 <= i < self.vertex_count for i in s):
                issues.append(f"Malformed simplex {s}")
                continue
            missing = [f for f in self.proper_faces(s) if f not in self.simplices]
            if missing:
                issues.append(f"Face closure: {s} misses {missing[0]}")
        return issues

    def point(self, bary: Mapping[int, Scalar]) -> Point:
        if self.coordinates is None:
            raise DomainError("complex carries no coordinates")
        items = sorted(bary.items())
        if all(isinstance(w, (Fraction, int)) for _, w in items) and all(is_exact(self.coordinates[i]) for i, _ in items):
            dim = len(self.coordinates[0])
            return tuple(sum((Fraction(w) * self.coordinates[i][k] for i, w in items), Fraction(0)) for k in range(dim))
        return tuple(float(x) for x in sum(float(w) * as_float(self.coordinates[i]) for i, w in items))

    def to_simplicial(self) -> SimplicialComplex:
        if self.coordinates is None:
            raise DomainError("complex carries no coordinates")
        return SimplicialComplex(
            Simplex(tuple(self.coordinates[i] for i in s), validate=False) for s in self.simplices
        )
