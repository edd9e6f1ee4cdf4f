"""
可定义函数与柱形栈表示

FunctionHandle: 按底胞腔分片的有理系数多项式，可求值、求梯度、估计 Lipschitz 常数。
StackPresentation: 递归的柱形描述: 底 (一维时为区间列表) + 有序函数栈 η₁ ≤ … ≤ η_b
+ 选中的胞腔 (图像 g<k>[Γ] 与带 b<k>[Γ])。

胞腔编号:
    一维: p<i> 为第 i 个断点, i<i> 为断点 i 与 i+1 之间的开区间,
          i-inf / i+inf 为无界端
    高维: g<k>[<底胞腔>] 为 η_k 在底胞腔上的图像 (重合的图像取最小下标),
          b<k>[<底胞腔>] 为 η_k 与 η_{k+1} 之间的开带
"""
import itertools
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

from src.core.errors import DomainError, LipschitzEstimationError, SchemaError
from src.core.simplicial import Point, Scalar, Simplex, as_float, is_exact
from src.utils.config import DEFAULTS, as_fraction
from src.utils.poly_utils import parse_polynomial, poly_from_coefficients, variables

logger = logging.getLogger(__name__)

GLOBAL_PIECE = "*"
PieceKey = Union[str, Simplex]

# 精确采样时随机数量化到 2^-20
_GRID = 1 << 20


def _rand_fraction(rng: np.random.Generator) -> Fraction:
    """(0,1) 内的随机二进有理数"""
    return Fraction(int(rng.integers(1, _GRID)), _GRID)


class _Piece:
    """单片多项式: 精确求值走系数表，浮点求值走 lambdify"""

    def __init__(self, poly: sympy.Poly):
        self.poly = poly
        self.gens = poly.gens
        self.terms = [(monom, Fraction(int(c.p), int(c.q))) for monom, c in poly.terms()]
        expr = poly.as_expr()
        self._value = sympy.lambdify(self.gens, expr, "math")
        self._grad = [sympy.lambdify(self.gens, poly.diff(g).as_expr(), "math") for g in self.gens]

    def value(self, y: Sequence[Scalar]) -> Scalar:
        if is_exact(y):
            total = Fraction(0)
            for monom, c in self.terms:
                term = c
                for yi, e in zip(y, monom):
                    if e:
                        term *= Fraction(yi) ** e
                total += term
            return total
        return float(self._value(*[float(v) for v in y]))

    def gradient(self, y: Sequence[Scalar]) -> np.ndarray:
        args = [float(v) for v in y]
        return np.array([float(g(*args)) for g in self._grad])


@dataclass
class LipschitzEstimate:
    """采样得到的 Lipschitz 下界"""
    quotient: float
    gradient: float
    samples: int

    @property
    def value(self) -> float:
        return max(self.quotient, self.gradient)


class DefinableFunction(ABC):
    """可求值的可定义函数"""
    nvars: int
    declared_lipschitz: Optional[float] = None
    name: str = ""

    @abstractmethod
    def eval(self, y: Sequence[Scalar]) -> Scalar:
        ...

    def gradient(self, y: Sequence[Scalar]) -> Optional[np.ndarray]:
        return None

    def __call__(self, y: Sequence[Scalar]) -> Scalar:
        return self.eval(y)

    def lipschitz_constant(self, cell: Optional[Simplex] = None, samples: int = 64, seed: int = 0) -> Tuple[float, str]:
        """声明值优先；否则在 cell 上采样估计 (下界)"""
        if self.declared_lipschitz is not None:
            return float(self.declared_lipschitz), "declared"
        if cell is None or cell.dim == 0:
            return 0.0, "estimated"
        return lipschitz_estimate(self, cell, samples, seed=seed).value, "estimated"


class FunctionHandle(DefinableFunction):
    """
    分片多项式

    pieces 的键:
    1. "*": 全空间
    2. 底胞腔编号 (需要 domain 即底栈表示来判定闭包成员关系)
    3. Simplex: 闭单形
    """

    def __init__(
        self,
        pieces: Mapping[PieceKey, Union[sympy.Poly, str, int, Fraction, Mapping[str, object]]],
        nvars: int,
        declared_lipschitz: Optional[float] = None,
        domain: Optional["StackPresentation"] = None,
        name: str = "",
    ):
        if nvars < 1:
            raise SchemaError("function handles need at least one variable")
        if not pieces:
            raise SchemaError(f"function {name!r} has no pieces")
        self.nvars = nvars
        self.gens = variables(nvars)
        self.declared_lipschitz = declared_lipschitz
        self.domain = domain
        self.name = name
        self._pieces: Dict[PieceKey, _Piece] = {}
        for key, value in pieces.items():
            self._pieces[key] = _Piece(self._as_poly(value))
        # 固定顺序: 全局片最后，其余按键排序
        self._order = sorted(self._pieces, key=lambda k: (k == GLOBAL_PIECE, str(k)))

    def _as_poly(self, spec) -> sympy.Poly:
        if isinstance(spec, sympy.Poly):
            return sympy.Poly(spec.as_expr(), *self.gens, domain="QQ")
        if isinstance(spec, Mapping):
            return poly_from_coefficients(spec, self.gens)
        return parse_polynomial(spec, self.gens)

    @classmethod
    def constant(cls, value, nvars: int, **kwargs) -> "FunctionHandle":
        return cls({GLOBAL_PIECE: str(as_fraction(value))}, nvars, **kwargs)

    def with_domain(self, domain: "StackPresentation") -> "FunctionHandle":
        clone = FunctionHandle.__new__(FunctionHandle)
        clone.__dict__.update(self.__dict__)
        clone.domain = domain
        return clone

    @property
    def piece_keys(self) -> List[PieceKey]:
        return list(self._order)

    def piece(self, key: PieceKey) -> sympy.Poly:
        return self._pieces[key].poly

    def _piece_contains(self, key: PieceKey, y: Sequence[Scalar], tol: float) -> bool:
        if key == GLOBAL_PIECE:
            return True
        if isinstance(key, Simplex):
            return key.closure_contains(y, tol)
        if self.domain is None:
            raise DomainError(f"piece keyed by cell {key!r} needs a base presentation")
        return self.domain.closure_contains(key, y, tol)

    def pieces_at(self, y: Sequence[Scalar], tol: float = DEFAULTS["geometric_tol"]) -> List[PieceKey]:
        return [k for k in self._order if self._piece_contains(k, y, tol)]

    def eval(self, y: Sequence[Scalar], tol: float = DEFAULTS["geometric_tol"]) -> Scalar:
        if len(y) != self.nvars:
            raise DomainError(f"{self.name or 'function'} takes {self.nvars} variables, got {len(y)}")
        for key in self._order:
            if self._piece_contains(key, y, tol):
                return self._pieces[key].value(y)
        raise DomainError(f"{tuple(y)} lies outside every piece of {self.name or 'function'}")

    def eval_piece(self, key: PieceKey, y: Sequence[Scalar]) -> Scalar:
        return self._pieces[key].value(y)

    def gradient(self, y: Sequence[Scalar], tol: float = DEFAULTS["geometric_tol"]) -> np.ndarray:
        for key in self._order:
            if self._piece_contains(key, y, tol):
                return self._pieces[key].gradient(y)
        raise DomainError(f"{tuple(y)} lies outside every piece of {self.name or 'function'}")

    def is_affine(self) -> bool:
        return all(p.poly.total_degree() <= 1 for p in self._pieces.values())

    def to_dict(self) -> Dict:
        from src.utils.poly_utils import poly_to_coefficients
        out: Dict[str, object] = {
            "pieces": {str(k): poly_to_coefficients(p.poly) for k, p in self._pieces.items()},
        }
        if self.name:
            out["name"] = self.name
        if self.declared_lipschitz is not None:
            out["lipschitz"] = self.declared_lipschitz
        return out

    def __repr__(self) -> str:
        return f"FunctionHandle({self.name or '?'}, pieces={len(self._pieces)})"


class PulledBackFunction(DefinableFunction):
    """η ∘ h: 把 η 拉回到底空间三角剖分 |K'| 上"""

    def __init__(self, inner: DefinableFunction, base_map, base_lipschitz: float = 1.0, name: str = ""):
        self.inner = inner
        self.base_map = base_map
        self.base_lipschitz = base_lipschitz
        self.nvars = inner.nvars
        self.name = name or inner.name
        inner_l = inner.declared_lipschitz
        self.declared_lipschitz = None if inner_l is None else float(inner_l) * base_lipschitz

    def eval(self, y: Sequence[Scalar]) -> Scalar:
        return self.inner.eval(self.base_map(y))

    def gradient(self, y: Sequence[Scalar]) -> Optional[np.ndarray]:
        return None


def eval(h: DefinableFunction, y: Sequence[Scalar]) -> Scalar:  # noqa: A001
    """分片多项式求值"""
    return h.eval(y)


def lipschitz_estimate(h: DefinableFunction, cell: Simplex, samples: int, seed: int = 0) -> LipschitzEstimate:
    """
    在闭单形 cell 上估计 Lipschitz 常数 (下界)
    顶点总在样本中；随机样本前缀与 samples 无关，因此估计随 samples 单调不减
    """
    if samples < 2:
        raise LipschitzEstimationError("at least two samples are needed")
    if cell.dim == 0:
        raise LipschitzEstimationError(f"cannot estimate a Lipschitz constant on the point cell {cell}")
    rng = np.random.default_rng(seed)
    pts = np.vstack([cell.as_array(), cell.sample(rng, samples)])
    values = np.array([float(h.eval(tuple(float(c) for c in p))) for p in pts])
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    diff = np.abs(values[:, None] - values[None, :])
    mask = dist > 1e-12
    quotient = float(np.max(diff[mask] / dist[mask])) if np.any(mask) else 0.0
    grad = 0.0
    for p in pts:
        g = h.gradient(tuple(float(c) for c in p))
        if g is not None:
            grad = max(grad, float(np.linalg.norm(g)))
    return LipschitzEstimate(quotient=quotient, gradient=grad, samples=samples)


# ============ 栈表示 ============

@dataclass(frozen=True)
class StackCell:
    """𝒞 中的一个胞腔"""
    id: str
    kind: str                       # point | interval | graph | band
    dim: int
    level: int = 0                  # η 的下标 (1 起)
    levels: Tuple[int, ...] = ()    # 重合图像的全部下标
    base_id: Optional[str] = None
    lo: Optional[Fraction] = None   # 一维胞腔端点 (None 表示无界)
    hi: Optional[Fraction] = None


@dataclass
class StackPresentation:
    """
    柱形栈表示

    dim == 1: intervals 为闭区间列表 (端点可为 None 表示无界), cuts 为额外断点
    dim >= 2: base 为 dim-1 维栈表示, functions 为 η₁ ≤ … ≤ η_b
    selected: {"A": 胞腔编号集合, 子集名: 胞腔编号集合}
    """
    dim: int
    base: Optional["StackPresentation"] = None
    functions: List[FunctionHandle] = field(default_factory=list)
    intervals: List[Tuple[Optional[Fraction], Optional[Fraction]]] = field(default_factory=list)
    cuts: List[Fraction] = field(default_factory=list)
    selected: Dict[str, FrozenSet[str]] = field(default_factory=dict)
    tol: float = DEFAULTS["geometric_tol"]

    def __post_init__(self):
        if self.dim < 1:
            raise SchemaError("stack dimension must be at least 1")
        if self.dim == 1:
            if self.base is not None or self.functions:
                raise SchemaError("a one-dimensional stack is given by intervals only")
            if not self.intervals:
                raise SchemaError("a one-dimensional stack needs at least one interval")
            norm = []
            for lo, hi in self.intervals:
                lo = None if lo is None else as_fraction(lo)
                hi = None if hi is None else as_fraction(hi)
                if lo is not None and hi is not None and lo > hi:
                    raise SchemaError(f"interval [{lo}, {hi}] is reversed")
                norm.append((lo, hi))
            self.intervals = norm
            self.cuts = sorted({as_fraction(c) for c in self.cuts})
        else:
            if self.base is None or self.base.dim != self.dim - 1:
                raise SchemaError(f"a {self.dim}-dimensional stack needs a {self.dim - 1}-dimensional base")
            if not self.functions:
                raise SchemaError("a stack needs at least one function")
            for i, h in enumerate(self.functions):
                if h.nvars != self.dim - 1:
                    raise SchemaError(f"function {i + 1} takes {h.nvars} variables, expected {self.dim - 1}",
                                      [f"functions.{i}"])
            self.functions = [h.with_domain(self.base) for h in self.functions]
            self._check_piece_keys()
        self.selected = {name: frozenset(ids) for name, ids in self.selected.items()}
        known = {c.id for c in self.cells()}
        for name, ids in self.selected.items():
            dangling = sorted(set(ids) - known)
            if dangling:
                raise SchemaError(f"subset {name!r} references unknown cell id {dangling[0]!r}",
                                  [f"selected.{name}"])

    def _check_piece_keys(self):
        known = {c.id for c in self.base.cells()}
        for i, h in enumerate(self.functions):
            for key in h.piece_keys:
                if isinstance(key, str) and key != GLOBAL_PIECE and key not in known:
                    raise SchemaError(f"function {h.name or i + 1} has a piece on unknown base cell {key!r}",
                                      [f"functions.{i}.pieces"])

    # ---- 基本属性 ----
    @property
    def b(self) -> int:
        return len(self.functions)

    @property
    def bounded(self) -> bool:
        if self.dim == 1:
            return all(lo is not None and hi is not None for lo, hi in self.intervals)
        return self.base.bounded

    def eta(self, y: Sequence[Scalar]) -> List[Scalar]:
        return [h.eval(y, self.tol) for h in self.functions]

    # ---- 胞腔族 ----
    @cached_property
    def _line(self) -> List[StackCell]:
        pts = set(self.cuts)
        for lo, hi in self.intervals:
            pts.update(v for v in (lo, hi) if v is not None)
        pts = sorted(p for p in pts if self._on_line(p))
        cells = [StackCell(f"p{i}", "point", 0, lo=p, hi=p) for i, p in enumerate(pts)]
        for i in range(len(pts) - 1):
            if self._on_line((pts[i] + pts[i + 1]) / 2):
                cells.append(StackCell(f"i{i}", "interval", 1, lo=pts[i], hi=pts[i + 1]))
        if not pts:
            # 只剩整条直线
            return [StackCell("i0", "interval", 1)]
        if any(lo is None for lo, _ in self.intervals):
            cells.append(StackCell("i-inf", "interval", 1, lo=None, hi=pts[0]))
        if any(hi is None for _, hi in self.intervals):
            cells.append(StackCell("i+inf", "interval", 1, lo=pts[-1], hi=None))
        return cells

    def _on_line(self, x: Fraction) -> bool:
        return any((lo is None or lo <= x) and (hi is None or x <= hi) for lo, hi in self.intervals)

    def cells(self) -> List[StackCell]:
        """胞腔族 𝒞: 底胞腔上的图像与带 (按编号稳定排序)"""
        return list(self._cells)

    @cached_property
    def _cells(self) -> List[StackCell]:
        if self.dim == 1:
            return self._line
        out: List[StackCell] = []
        for gamma in self.base.cells():
            rep = self.base.representative(gamma.id)
            try:
                values = self.eta(rep)
            except DomainError:
                # 未覆盖的底胞腔留给 validate_stack 报告
                logger.warning("[Stack] base cell %s is not covered by every function", gamma.id)
                continue
            k = 0
            while k < self.b:
                run = [k + 1]
                while k + 1 < self.b and values[k] == values[k + 1]:
                    k += 1
                    run.append(k + 1)
                out.append(StackCell(f"g{run[0]}[{gamma.id}]", "graph", gamma.dim,
                                     level=run[0], levels=tuple(run), base_id=gamma.id))
                k += 1
            for k in range(self.b - 1):
                if values[k] < values[k + 1]:
                    out.append(StackCell(f"b{k + 1}[{gamma.id}]", "band", gamma.dim + 1,
                                         level=k + 1, levels=(k + 1, k + 2), base_id=gamma.id))
        return out

    @cached_property
    def _cell_map(self) -> Dict[str, StackCell]:
        return {c.id: c for c in self._cells}

    def cell(self, cell_id: str) -> StackCell:
        try:
            return self._cell_map[cell_id]
        except KeyError:
            raise SchemaError(f"unknown cell id {cell_id!r}")

    def cells_over(self, base_id: str) -> List[StackCell]:
        return [c for c in self._cells if c.base_id == base_id]

    def representative(self, cell_id: str) -> Point:
        """开胞腔中一个精确有理点"""
        c = self.cell(cell_id)
        if self.dim == 1:
            if c.kind == "point":
                return (c.lo,)
            if c.lo is None and c.hi is None:
                return (Fraction(0),)
            if c.lo is None:
                return (c.hi - 1,)
            if c.hi is None:
                return (c.lo + 1,)
            return ((c.lo + c.hi) / 2,)
        y = self.base.representative(c.base_id)
        values = self.eta(y)
        if c.kind == "graph":
            return tuple(y) + (Fraction(values[c.level - 1]),)
        return tuple(y) + ((Fraction(values[c.level - 1]) + Fraction(values[c.level])) / 2,)

    # ---- 成员关系 ----
    def _cmp(self, exact: bool):
        tol = 0 if exact else self.tol

        def le(a, b):
            return a <= b + tol

        def lt(a, b):
            return a < b - tol

        def eq(a, b):
            return abs(a - b) <= tol

        return le, lt, eq

    def closure_contains(self, cell_id: str, p: Sequence[Scalar], tol: Optional[float] = None) -> bool:
        c = self.cell(cell_id)
        le, _, eq = self._cmp(is_exact(p))
        if self.dim == 1:
            x = p[0]
            return (c.lo is None or le(c.lo, x)) and (c.hi is None or le(x, c.hi))
        y, z = tuple(p[:-1]), p[-1]
        if not self.base.closure_contains(c.base_id, y):
            return False
        try:
            values = self.eta(y)
        except DomainError:
            return False
        if c.kind == "graph":
            return eq(z, values[c.level - 1])
        return le(values[c.level - 1], z) and le(z, values[c.level])

    def contains(self, cell_id: str, p: Sequence[Scalar]) -> bool:
        """开胞腔成员关系"""
        return self.locate_cell(p) == cell_id

    def locate_cell(self, p: Sequence[Scalar]) -> Optional[str]:
        """包含 p 的开胞腔编号；p 不在栈中返回 None"""
        le, lt, eq = self._cmp(is_exact(p))
        if self.dim == 1:
            x = p[0]
            for c in self._line:
                if c.kind == "point" and eq(x, c.lo):
                    return c.id
            for c in self._line:
                if c.kind == "interval" and (c.lo is None or lt(c.lo, x)) and (c.hi is None or lt(x, c.hi)):
                    return c.id
            return None
        y, z = tuple(p[:-1]), p[-1]
        base_id = self.base.locate_cell(y)
        if base_id is None:
            return None
        try:
            values = self.eta(y)
        except DomainError:
            return None
        over = self.cells_over(base_id)
        for c in over:
            if c.kind == "graph" and eq(z, values[c.level - 1]):
                return c.id
        for c in over:
            if c.kind == "band" and lt(values[c.level - 1], z) and lt(z, values[c.level]):
                return c.id
        return None

    def contains_point(self, p: Sequence[Scalar]) -> bool:
        return self.locate_cell(p) is not None

    def subset_cells(self, name: str) -> FrozenSet[str]:
        if name == "A" and "A" not in self.selected:
            return frozenset(c.id for c in self._cells)
        try:
            return self.selected[name]
        except KeyError:
            raise SchemaError(f"unknown subset {name!r}")

    def in_subset(self, name: str, p: Sequence[Scalar]) -> bool:
        return self.locate_cell(p) in self.subset_cells(name)

    # ---- 采样 ----
    def sample_cell(self, cell_id: str, rng: np.random.Generator, count: int, exact: bool = False) -> List[Point]:
        """开胞腔内的样本点；exact=True 时为有理点"""
        c = self.cell(cell_id)
        out: List[Point] = []
        for _ in range(count):
            out.append(self._sample_one(c, rng, exact))
        return out

    def _sample_one(self, c: StackCell, rng: np.random.Generator, exact: bool) -> Point:
        u = _rand_fraction(rng)
        if self.dim == 1:
            if c.kind == "point":
                x = c.lo
            elif c.lo is None and c.hi is None:
                x = Fraction(2) * u - 1
            elif c.lo is None:
                x = c.hi - (1 / u - 1)
            elif c.hi is None:
                x = c.lo + (1 / u - 1)
            else:
                x = c.lo + u * (c.hi - c.lo)
            return (x,) if exact else (float(x),)
        y = self.base._sample_one(self.base.cell(c.base_id), rng, exact)
        values = self.eta(y)
        lo = values[c.level - 1]
        if c.kind == "graph":
            return tuple(y) + (lo,)
        hi = values[c.level]
        if exact:
            return tuple(y) + (lo + u * (hi - lo),)
        return tuple(y) + (float(lo) + float(u) * (float(hi) - float(lo)),)

    def to_dict(self) -> Dict:
        if self.dim == 1:
            out: Dict[str, object] = {
                "dim": 1,
                "intervals": [[None if lo is None else str(lo), None if hi is None else str(hi)]
                              for lo, hi in self.intervals],
            }
            if self.cuts:
                out["cuts"] = [str(c) for c in self.cuts]
        else:
            out = {
                "dim": self.dim,
                "base": self.base.to_dict(),
                "functions": [h.to_dict() for h in self.functions],
            }
        if self.selected:
            out["selected"] = {k: sorted(v) for k, v in sorted(self.selected.items())}
        return out


# ============ 正则方向 ============

@dataclass
class RegularDirectionReport:
    verdict: str
    alpha: float
    witness: Optional[Dict] = None
    note: str = "sampling estimate, not a proof"

    def to_dict(self) -> Dict:
        return {"verdict": self.verdict, "alpha": self.alpha, "witness": self.witness, "note": self.note}


def regular_direction_check(
    S: StackPresentation,
    lam: Sequence[float],
    samples: int = 200,
    alpha0: float = 1e-2,
    seed: int = 0,
) -> RegularDirectionReport:
    """
    估计 inf |v - λ| (a 取图像上的正则点, v 取单位切向量)

    对切空间 T: inf_{v ∈ T, |v|=1} |v - λ| = sqrt(2 - 2|P_T λ|)
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (S.dim,) or abs(np.linalg.norm(lam) - 1) > 1e-9:
        raise DomainError("regular direction must be a unit vector of the ambient space")
    if S.dim == 1:
        return RegularDirectionReport("pass", float("inf"), note="one-dimensional stack has no graphs")
    rng = np.random.default_rng(seed)
    top = [c for c in S.base.cells() if c.dim == S.dim - 1]
    graphs = [(g, c) for c in top for g in S.cells_over(c.id) if g.kind == "graph"]
    if not graphs:
        return RegularDirectionReport("inconclusive", float("nan"), note="no regular graph points to sample")
    per = max(1, samples // len(graphs))
    best, witness = float("inf"), None
    n = S.dim
    for g, base_cell in graphs:
        h = S.functions[g.level - 1]
        for y in S.base.sample_cell(base_cell.id, rng, per):
            grad = h.gradient(y)
            frame = np.zeros((n, n - 1))
            frame[: n - 1, :] = np.eye(n - 1)
            frame[n - 1, :] = grad
            q, _ = np.linalg.qr(frame)
            proj = float(np.linalg.norm(q.T @ lam))
            alpha = float(np.sqrt(max(0.0, 2.0 - 2.0 * min(1.0, proj))))
            if alpha < best:
                best = alpha
                witness = {"cell": g.id, "point": [float(v) for v in y] + [float(h.eval(y))]}
    verdict = "pass" if best >= alpha0 else "fail"
    logger.info("[RegularDirection] alpha estimate %.3g over %d graph cells", best, len(graphs))
    return RegularDirectionReport(verdict, best, witness)


from src.core.stack_validator import StackDiagnostics, suggest_fixes, validate_stack  # noqa: E402

__all__ = [
    "DefinableFunction", "FunctionHandle", "PulledBackFunction", "LipschitzEstimate",
    "StackCell", "StackPresentation", "RegularDirectionReport",
    "eval", "lipschitz_estimate", "regular_direction_check",
    "validate_stack", "suggest_fixes", "StackDiagnostics",
]
