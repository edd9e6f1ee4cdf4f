"""
网格导出 - 三角剖分像 {H(△)} 的 JSON / OFF 表示

JSON:
{"format": "stratified-mesh", "version": 1, "ambient_dim": n,
 "vertices": [[x, y, ...], ...],
 "simplices": [{"id", "vertices", "dim", "stratum", "source"}, ...]}
stratum 与报告中的层对编号一致；source 为栈胞腔编号。
"""
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from trimesh import Trimesh
from trimesh.exchange.off import export_off
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.core.errors import DomainError, InputError, SchemaError, UnsupportedFormatError
from src.core.regularity import stratum_id
from src.core.simplicial import Simplex, SimplicialComplex, subdivide

logger = logging.getLogger(__name__)

MESH_FORMAT = "stratified-mesh"
MESH_VERSION = 1
FORMATS = ("json", "off")


class _SimplexRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    vertices: List[int]
    dim: int = Field(ge=0)
    stratum: Optional[str] = None
    source: Optional[str] = None


class _MeshFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: str = MESH_FORMAT
    version: int = MESH_VERSION
    ambient_dim: int = Field(ge=0)
    vertices: List[List[float]]
    simplices: List[_SimplexRecord]
    notes: List[str] = Field(default_factory=list)


@dataclass
class StratifiedMesh:
    ambient_dim: int
    vertices: List[Tuple[float, ...]] = field(default_factory=list)
    simplices: List[Dict] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return max((s["dim"] for s in self.simplices), default=-1)

    def of_dim(self, k: int) -> List[Dict]:
        return [s for s in self.simplices if s["dim"] == k]

    def to_dict(self) -> Dict:
        out = {
            "format": MESH_FORMAT,
            "version": MESH_VERSION,
            "ambient_dim": self.ambient_dim,
            "vertices": [list(v) for v in self.vertices],
            "simplices": [dict(s) for s in self.simplices],
        }
        if self.notes:
            out["notes"] = list(self.notes)
        return out

    def to_complex(self) -> SimplicialComplex:
        """浮点坐标按二进精确值转成有理点"""
        pts = [tuple(Fraction(c) for c in v) for v in self.vertices]
        return SimplicialComplex(
            (Simplex(tuple(pts[i] for i in s["vertices"]), validate=False) for s in self.simplices), close=True)


def _assemble(
    ambient_dim: int,
    keys: Sequence[Tuple[int, ...]],
    point_of: Dict[int, Optional[np.ndarray]],
    stratum_of,
    source_of,
) -> StratifiedMesh:
    """按 (维数, 顶点编号) 排序；有顶点没有坐标的单形 (无穷远) 跳过"""
    mesh = StratifiedMesh(ambient_dim)
    keys = sorted(keys, key=lambda s: (len(s), s))
    kept = [s for s in keys if all(point_of.get(i) is not None for i in s)]
    dropped = len(keys) - len(kept)
    used = sorted({i for s in kept for i in s})
    renumber = {old: new for new, old in enumerate(used)}
    mesh.vertices = [tuple(float(c) for c in point_of[i]) for i in used]
    for s in kept:
        mesh.simplices.append({
            "id": f"s{len(mesh.simplices)}",
            "vertices": [renumber[i] for i in s],
            "dim": len(s) - 1,
            "stratum": stratum_of(s),
            "source": source_of(s),
        })
    if dropped:
        mesh.notes.append(f"{dropped} simplex(es) touching points at infinity omitted")
    return mesh


def _safe_points(indices: Iterable[int], fn) -> Dict[int, Optional[np.ndarray]]:
    out = {}
    for i in indices:
        try:
            out[i] = np.asarray(fn(i), dtype=float)
        except DomainError:
            out[i] = None
    return out


def mesh_from_triangulation(tri, cells: Optional[Iterable[str]] = None) -> StratifiedMesh:
    """
    (K, H) 的像网格

    cells: 只保留 H 像落在这些栈胞腔中的单形；None 表示全部
    """
    K = tri.complex
    keep = None if cells is None else set(cells)
    by_key = {K.index_key(s): s for s in K.simplices}
    keys = [k for k, s in by_key.items() if keep is None or tri.labels.get(s) in keep]
    points = _safe_points(sorted({i for k in keys for i in k}),
                          lambda i: tri.ambient_map(K.vertex_index[i]))
    return _assemble(tri.ambient_dim, keys, points, stratum_id, lambda k: tri.labels.get(by_key[k]))


def mesh_from_q_triangulation(q, cells: Optional[Iterable[str]] = None) -> StratifiedMesh:
    """Q-三角剖分 (K, h₁∘h₃) 的像网格"""
    keep = None if cells is None else set(cells)
    keys = [s for s in q.complex.simplices if keep is None or q.labels.get(s) in keep]
    points = _safe_points(sorted({i for k in keys for i in k}), lambda i: q.point({i: Fraction(1)}))
    return _assemble(q.triangulation.ambient_dim, keys, points, stratum_id, q.labels.get)


def subdivide_mesh(mesh: StratifiedMesh, times: int) -> StratifiedMesh:
    """k 次重心细分；新单形继承承载它的原单形的层与源编号"""
    if times < 0:
        raise InputError("subdivision count must be non-negative")
    K = mesh.to_complex()
    tags = {}
    for s in mesh.simplices:
        key = Simplex(tuple(tuple(Fraction(c) for c in mesh.vertices[i]) for i in s["vertices"]), validate=False)
        tags[key] = (s["stratum"], s["source"])
    fine = subdivide(K, times)
    carriers = {t: K.locate(t.barycentre()) for t in fine.simplices}
    out = StratifiedMesh(mesh.ambient_dim, notes=list(mesh.notes))
    out.vertices = [tuple(float(c) for c in fine.vertex_index[i]) for i in range(len(fine.vertex_index))]
    for t in fine.sorted_simplices():
        stratum, source = tags.get(carriers[t], (None, None))
        out.simplices.append({
            "id": f"s{len(out.simplices)}",
            "vertices": list(fine.index_key(t)),
            "dim": t.dim,
            "stratum": stratum,
            "source": source,
        })
    logger.info("[Mesh] %d-fold subdivision: %d -> %d simplices", times, len(mesh.simplices), len(out.simplices))
    return out


# ============ 写出与读回 ============

def _off_text(mesh: StratifiedMesh) -> str:
    if not mesh.simplices:
        return "OFF\n0 0 0\n"
    if mesh.ambient_dim > 3:
        raise UnsupportedFormatError(f"OFF holds at most three coordinates, mesh lives in R^{mesh.ambient_dim}")
    if mesh.dim != 2:
        raise UnsupportedFormatError(f"OFF holds triangles, mesh has dimension {mesh.dim}")
    verts = np.zeros((len(mesh.vertices), 3))
    verts[:, :mesh.ambient_dim] = np.asarray(mesh.vertices, dtype=float)
    faces = np.asarray([s["vertices"] for s in mesh.of_dim(2)], dtype=np.int64)
    tm = Trimesh(vertices=verts, faces=faces, process=False)
    return export_off(tm)


def export_mesh(mesh: StratifiedMesh, path: Union[str, Path], format: Optional[str] = None) -> Path:  # noqa: A002
    """
    写出网格

    Args:
        format: "json" 或 "off"；None 时按扩展名判断
    Raises:
        UnsupportedFormatError: 未知格式，或 OFF 不能表示该网格
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".") or "json").lower()
    if fmt not in FORMATS:
        raise UnsupportedFormatError(f"unsupported mesh format {fmt!r}; use one of {', '.join(FORMATS)}")
    text = _off_text(mesh) if fmt == "off" else json.dumps(mesh.to_dict(), sort_keys=True, indent=2) + "\n"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("[Mesh] %s: %d vertices, %d simplices -> %s", fmt, len(mesh.vertices), len(mesh.simplices), path)
    return path


def load_mesh(path: Union[str, Path]) -> StratifiedMesh:
    """读回 JSON 网格"""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise InputError(f"cannot read mesh {path}: {e}")
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg}", [f"line {e.lineno}"])
    try:
        parsed = _MeshFile.model_validate(data)
    except ValidationError as e:
        raise SchemaError("mesh does not match the schema",
                          [".".join(str(p) for p in err["loc"]) for err in e.errors()])
    if parsed.format != MESH_FORMAT or parsed.version != MESH_VERSION:
        raise UnsupportedFormatError(f"expected {MESH_FORMAT} v{MESH_VERSION}, got {parsed.format} v{parsed.version}")
    n = len(parsed.vertices)
    for rec in parsed.simplices:
        if len(rec.vertices) != rec.dim + 1 or not all(0 <= i < n for i in rec.vertices):
            raise SchemaError(f"simplex {rec.id} has malformed vertex indices", [f"simplices.{rec.id}"])
    return StratifiedMesh(
        parsed.ambient_dim,
        [tuple(v) for v in parsed.vertices],
        [rec.model_dump() for rec in parsed.simplices],
        list(parsed.notes),
    )
