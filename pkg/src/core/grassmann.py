"""
Grassmann 度量 - 直线/子空间距离、线性映射的图像、切空间

d(v, W)  = v 在 W 正交补上的分量长度 (W = {0} 时为 1)
d(P, Q)  = (I - Q Qᵀ) P 的最大奇异值 (dim P = 0 时为 0)
注意 d 对不同维数不对称，这里不做对称化。
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import scipy.linalg
import sympy

from src.core.errors import DegenerateChartError, DomainError, GrassmannInputError

logger = logging.getLogger(__name__)

UNIT_TOL = 1e-9
FRAME_TOL = 1e-10
RANK_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class Subspace:
    """𝔾_{k,n} 的元素，frame 为 n×k 正交标架"""
    frame: np.ndarray

    def __post_init__(self):
        frame = np.asarray(self.frame, dtype=float)
        if frame.ndim != 2:
            raise GrassmannInputError(f"frame must be an n×k matrix, got shape {frame.shape}")
        if frame.shape[1] > frame.shape[0]:
            raise GrassmannInputError(f"frame has more columns than rows: {frame.shape}")
        gram = frame.T @ frame
        if frame.shape[1] and np.max(np.abs(gram - np.eye(frame.shape[1]))) > FRAME_TOL:
            raise GrassmannInputError("frame is not orthonormal")
        object.__setattr__(self, "frame", frame)

    @classmethod
    def span(cls, vectors: Union[np.ndarray, Sequence[Sequence[float]]], n: Optional[int] = None) -> "Subspace":
        """列向量张成的子空间 (scipy.linalg.orth 正交化)"""
        mat = np.asarray(vectors, dtype=float)
        if mat.size == 0:
            if n is None:
                raise GrassmannInputError("ambient dimension needed for an empty span")
            return cls.zero(n)
        if mat.ndim == 1:
            mat = mat[:, np.newaxis]
        return cls(scipy.linalg.orth(mat))

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(np.zeros((n, 0)))

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return self.frame.shape[0]

    @property
    def k(self) -> int:
        return self.frame.shape[1]

    def projector(self) -> np.ndarray:
        return self.frame @ self.frame.T

    def orthogonal_part(self, v: np.ndarray) -> np.ndarray:
        return v - self.frame @ (self.frame.T @ v)

    def __repr__(self) -> str:
        return f"Subspace(n={self.n}, k={self.k})"


def dist_vec_subspace(v: Sequence[float], W: Subspace) -> float:
    """单位向量到子空间的距离 (夹角正弦的下确界)"""
    v = np.asarray(v, dtype=float)
    if v.shape != (W.n,):
        raise GrassmannInputError(f"vector of shape {v.shape} against subspace of R^{W.n}")
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise GrassmannInputError(f"expected a unit vector, got norm {np.linalg.norm(v)}")
    if W.k == 0:
        return 1.0
    return float(min(1.0, np.linalg.norm(W.orthogonal_part(v))))


def dist_subspace(P: Subspace, Q: Subspace) -> float:
    """d(P, Q) = sup_{λ ∈ P, |λ|=1} d(λ, Q)"""
    if P.n != Q.n:
        raise GrassmannInputError(f"ambient mismatch: R^{P.n} vs R^{Q.n}")
    if P.k == 0:
        return 0.0
    if Q.k == 0:
        return 1.0
    residual = P.frame - Q.frame @ (Q.frame.T @ P.frame)
    return float(min(1.0, scipy.linalg.svdvals(residual)[0]))


def dtilde(L1: Subspace, L2: Subspace) -> float:
    """射影空间上的弦距离 min{|u-w|, |u+w|}"""
    if L1.k != 1 or L2.k != 1:
        raise GrassmannInputError(f"dtilde needs two lines, got dimensions {L1.k} and {L2.k}")
    if L1.n != L2.n:
        raise GrassmannInputError(f"ambient mismatch: R^{L1.n} vs R^{L2.n}")
    u, w = L1.frame[:, 0], L2.frame[:, 0]
    return float(min(np.linalg.norm(u - w), np.linalg.norm(u + w)))


def product_with_line(V: Subspace) -> Subspace:
    """V × ℝ ⊂ ℝ^{n+1}"""
    frame = np.zeros((V.n + 1, V.k + 1))
    frame[:V.n, :V.k] = V.frame
    frame[V.n, V.k] = 1.0
    return Subspace(frame)


@dataclass(frozen=True, eq=False)
class LinearMap:
    """
    线性映射 l: E → E^⊥

    images 的第 i 列是 l(E.frame[:, i])。
    """
    domain: Subspace
    images: np.ndarray

    def __post_init__(self):
        images = np.asarray(self.images, dtype=float).reshape(self.domain.n, self.domain.k)
        if self.domain.k and np.max(np.abs(self.domain.frame.T @ images)) > UNIT_TOL * max(1.0, np.abs(images).max()):
            raise GrassmannInputError("linear map does not take values in the orthogonal complement of its domain")
        object.__setattr__(self, "images", images)

    @classmethod
    def from_matrix(cls, domain: Subspace, matrix: np.ndarray, project: bool = True) -> "LinearMap":
        """由 n×n 矩阵限制到 E；project=True 时再投影到 E^⊥"""
        images = np.asarray(matrix, dtype=float) @ domain.frame
        if project:
            images = images - domain.frame @ (domain.frame.T @ images)
        return cls(domain, images)

    @property
    def operator_norm(self) -> float:
        if self.domain.k == 0:
            return 0.0
        return float(scipy.linalg.svdvals(self.images)[0])

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self.images @ (self.domain.frame.T @ np.asarray(v, dtype=float))

    def __sub__(self, other: "LinearMap") -> "LinearMap":
        if dist_subspace(self.domain, other.domain) > UNIT_TOL or self.domain.k != other.domain.k:
            raise GrassmannInputError("maps are defined on different subspaces")
        # 把 other 换到 self 的标架下
        change = other.domain.frame.T @ self.domain.frame
        return LinearMap(self.domain, self.images - other.images @ change)


def graph_of_linear_map(l: LinearMap) -> Subspace:
    """{v + l(v) : v ∈ E}"""
    if l.domain.k == 0:
        return Subspace.zero(l.domain.n)
    return Subspace.span(l.domain.frame + l.images)


class Chart:
    """
    参数化层 φ: U ⊂ ℝ^k → ℝ^n

    domain 判断参数是否在 (开) 定义域中；jacobian 缺省时用中心差分，
    步长缩到定义域内部。
    """

    def __init__(
        self,
        fn: Callable[[np.ndarray], np.ndarray],
        dim: int,
        ambient_dim: int,
        domain: Optional[Callable[[np.ndarray], bool]] = None,
        jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        label: str = "",
        step: float = 1e-6,
    ):
        self._fn = fn
        self.dim = dim
        self.ambient_dim = ambient_dim
        self._domain = domain
        self._jacobian = jacobian
        self.label = label
        self.step = step

    def __call__(self, u: Sequence[float]) -> np.ndarray:
        return np.asarray(self._fn(np.asarray(u, dtype=float)), dtype=float).reshape(self.ambient_dim)

    def contains(self, u: Sequence[float]) -> bool:
        if self._domain is None:
            return True
        return bool(self._domain(np.asarray(u, dtype=float)))

    def jacobian_at(self, u: Sequence[float]) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.dim == 0:
            return np.zeros((self.ambient_dim, 0))
        if self._jacobian is not None:
            return np.asarray(self._jacobian(u), dtype=float).reshape(self.ambient_dim, self.dim)
        cols = []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            cols.append(self._partial(u, e))
        return np.column_stack(cols)

    def _partial(self, u: np.ndarray, e: np.ndarray) -> np.ndarray:
        h = self.step * max(1.0, float(np.linalg.norm(u)))
        for _ in range(40):
            fwd, bwd = self.contains(u + h * e), self.contains(u - h * e)
            if fwd and bwd:
                return (self(u + h * e) - self(u - h * e)) / (2 * h)
            if fwd and self.contains(u + 2 * h * e):
                return (-3 * self(u) + 4 * self(u + h * e) - self(u + 2 * h * e)) / (2 * h)
            if bwd and self.contains(u - 2 * h * e):
                return (3 * self(u) - 4 * self(u - h * e) + self(u - 2 * h * e)) / (2 * h)
            h *= 0.5
        raise DegenerateChartError(f"no room for a difference quotient at {u} in chart {self.label!r}")

    # ---- 构造 ----
    @classmethod
    def from_expressions(
        cls,
        exprs: Sequence[Union[str, sympy.Expr]],
        params: Sequence[str],
        domain: Sequence[Union[str, sympy.Basic]] = (),
        label: str = "",
    ) -> "Chart":
        """由 sympy 表达式构造；Jacobian 符号求导"""
        symbols = sympy.symbols(list(params)) if params else []
        symbols = list(symbols) if isinstance(symbols, (list, tuple)) else [symbols]
        local = {str(s): s for s in symbols}
        components = [sympy.sympify(e, locals=local) for e in exprs]
        constraints = [sympy.sympify(c, locals=local) for c in domain]
        value = sympy.lambdify(symbols, components, "numpy")
        jac = sympy.Matrix(components).jacobian(symbols) if symbols else None
        jac_fn = sympy.lambdify(symbols, jac, "numpy") if symbols else None
        checks = [sympy.lambdify(symbols, c, "numpy") for c in constraints]

        def fn(u):
            return np.array(value(*u), dtype=float)

        def inside(u):
            return all(bool(c(*u)) for c in checks)

        def jacobian(u):
            return np.array(jac_fn(*u), dtype=float)

        return cls(fn, len(symbols), len(components), domain=inside if checks else None,
                   jacobian=jacobian if symbols else None, label=label)

    @classmethod
    def for_simplex(cls, vertices: np.ndarray, mapping: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                    ambient_dim: Optional[int] = None, label: str = "") -> "Chart":
        """
        单形参数化 u ↦ v0 + Σ u_i (v_i - v0)，定义域为开单形 (u_i > 0, Σu_i < 1)；
        mapping 给出时再复合上去。
        """
        verts = np.asarray(vertices, dtype=float)
        origin, edge = verts[0], (verts[1:] - verts[0]).T
        k = len(verts) - 1

        def affine(u):
            return origin + edge @ u if k else origin.copy()

        def inside(u):
            return bool(np.all(u > 0) and np.sum(u) < 1) if k else True

        if mapping is None:
            return cls(affine, k, verts.shape[1], domain=inside, jacobian=lambda u: edge, label=label)
        n = ambient_dim if ambient_dim is not None else len(np.asarray(mapping(affine(np.full(k, 1.0 / (k + 1))))))
        return cls(lambda u: mapping(affine(u)), k, n, domain=inside, label=label)

    def product_interval(self) -> "Chart":
        """M × (0,1): (u, s) ↦ (φ(u), s)"""
        base = self

        def fn(w):
            return np.append(base(w[:-1]), w[-1])

        def inside(w):
            return 0 < w[-1] < 1 and base.contains(w[:-1])

        def jacobian(w):
            jac = np.zeros((base.ambient_dim + 1, base.dim + 1))
            jac[:base.ambient_dim, :base.dim] = base.jacobian_at(w[:-1])
            jac[base.ambient_dim, base.dim] = 1.0
            return jac

        return Chart(fn, self.dim + 1, self.ambient_dim + 1, domain=inside, jacobian=jacobian,
                     label=f"{self.label}×(0,1)")

    def product_point(self, value: float = 1.0) -> "Chart":
        """M × {value}"""
        base = self

        def jacobian(u):
            return np.vstack([base.jacobian_at(u), np.zeros((1, base.dim))])

        return Chart(lambda u: np.append(base(u), value), self.dim, self.ambient_dim + 1,
                     domain=self._domain, jacobian=jacobian, label=f"{self.label}×{{{value}}}")


def tangent_space(chart: Chart, x: Sequence[float]) -> Subspace:
    """图册 Jacobian 列空间 (正交化)；秩不足报错"""
    if not chart.contains(x):
        raise DomainError(f"parameter {list(x)} is outside chart {chart.label!r}")
    if chart.dim == 0:
        return Subspace.zero(chart.ambient_dim)
    jac = chart.jacobian_at(x)
    sv = scipy.linalg.svdvals(jac)
    if sv[0] == 0 or sv[-1] < RANK_RTOL * sv[0] or len(sv) < chart.dim:
        raise DegenerateChartError(f"Jacobian of chart {chart.label!r} is rank-deficient at {list(x)}")
    return Subspace.span(jac)


def random_subspace(n: int, k: int, rng: np.random.Generator) -> Subspace:
    if k == 0:
        return Subspace.zero(n)
    return Subspace.span(rng.standard_normal((n, k)))


def random_linear_map(domain: Subspace, rng: np.random.Generator, scale: float = 1.0) -> LinearMap:
    return LinearMap.from_matrix(domain, scale * rng.standard_normal((domain.n, domain.n)))


# ============ 批量版本 ============
# 标架栈形如 (m, n, k)，第 i 层是一个 n×k 正交标架；同一栈内 k 相同。

def _frame_stack(frames: np.ndarray) -> np.ndarray:
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 3 or frames.shape[2] > frames.shape[1]:
        raise GrassmannInputError(f"expected an (m, n, k) frame stack with k <= n, got shape {frames.shape}")
    return frames


def random_frames(n: int, k: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """count 个随机 k 维子空间的正交标架 (批量 QR)"""
    if k == 0:
        return np.zeros((count, n, 0))
    q, _ = np.linalg.qr(rng.standard_normal((count, n, k)))
    return q


def dist_subspace_batch(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """逐层 d(P_i, Q_i)"""
    P, Q = _frame_stack(P), _frame_stack(Q)
    if P.shape[:2] != Q.shape[:2]:
        raise GrassmannInputError(f"stack mismatch: {P.shape} vs {Q.shape}")
    m = P.shape[0]
    if P.shape[2] == 0:
        return np.zeros(m)
    if Q.shape[2] == 0:
        return np.ones(m)
    residual = P - Q @ (np.swapaxes(Q, 1, 2) @ P)
    return np.minimum(1.0, np.linalg.svd(residual, compute_uv=False)[:, 0])


def dtilde_batch(U: np.ndarray, W: np.ndarray) -> np.ndarray:
    """逐层直线弦距离；U、W 为 (m, n) 单位向量"""
    U, W = np.asarray(U, dtype=float), np.asarray(W, dtype=float)
    if U.shape != W.shape or U.ndim != 2:
        raise GrassmannInputError(f"expected two (m, n) stacks of unit vectors, got {U.shape} and {W.shape}")
    return np.minimum(np.linalg.norm(U - W, axis=1), np.linalg.norm(U + W, axis=1))


def product_with_line_batch(V: np.ndarray) -> np.ndarray:
    V = _frame_stack(V)
    m, n, k = V.shape
    out = np.zeros((m, n + 1, k + 1))
    out[:, :n, :k] = V
    out[:, n, k] = 1.0
    return out


def graph_frames(E: np.ndarray, images: np.ndarray) -> np.ndarray:
    """逐层 {v + l(v)} 的正交标架；images 的列须落在 E^⊥ 中"""
    E = _frame_stack(E)
    if E.shape[2] == 0:
        return E.copy()
    q, _ = np.linalg.qr(E + np.asarray(images, dtype=float))
    return q


def operator_norm_batch(images: np.ndarray) -> np.ndarray:
    images = np.asarray(images, dtype=float)
    if images.shape[2] == 0:
        return np.zeros(images.shape[0])
    return np.linalg.svd(images, compute_uv=False)[:, 0]


def random_map_images(E: np.ndarray, rng: np.random.Generator, scales: Union[float, np.ndarray] = 1.0) -> np.ndarray:
    """逐层随机线性映射 E_i → E_i^⊥ 在标架上的像"""
    E = _frame_stack(E)
    m, n, _ = E.shape
    raw = rng.standard_normal((m, n, n)) @ E
    raw = raw - E @ (np.swapaxes(E, 1, 2) @ raw)
    return np.asarray(scales, dtype=float).reshape(-1, 1, 1) * raw


__all__: List[str] = [
    "Subspace", "LinearMap", "Chart",
    "dist_vec_subspace", "dist_subspace", "dtilde", "graph_of_linear_map",
    "product_with_line", "tangent_space", "random_subspace", "random_linear_map",
    "random_frames", "dist_subspace_batch", "dtilde_batch", "product_with_line_batch",
    "graph_frames", "operator_norm_batch", "random_map_images",
]
