"""
场景文件与报告读写

场景文件 (JSON):
{
  "version": 1,
  "dim": 2,
  "stack": {"dim": 2, "base": {"dim": 1, "intervals": [["0", "1"]]},
            "functions": [{"name": "eta1", "pieces": {"*": "0"}}, ...]},
  "subsets": {"top": ["b1[i0]"]},
  "checker": {...},      # CheckerConfig
  "pipeline": {...}      # PipelineConfig (checker 字段以顶层 checker 为准)
}
"stack" 可换成 "pair": 两个 sympy 表达式图册加基点，供 check 直接检查。
"""
import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple, Union

import numpy as np
import sympy
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.core.defnfun import FunctionHandle, StackDiagnostics, StackPresentation, validate_stack
from src.core.errors import InputError, SchemaError, StackValidationError
from src.core.grassmann import Chart
from src.core.regularity import StratumPair
from src.utils.config import CheckerConfig, PipelineConfig

logger = logging.getLogger(__name__)

SCENE_VERSION = 1

Number = Union[int, str, float]
PieceValue = Union[str, int, Dict[str, Union[str, int]]]


# ============ schema ============

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FunctionSpec(_Strict):
    """分片多项式: 片键为 "*"、底胞腔编号；值为表达式或 {指数键: 系数}"""
    name: str = ""
    pieces: Dict[str, PieceValue]
    lipschitz: Optional[float] = Field(None, ge=0)


class StackSpec(_Strict):
    dim: int = Field(ge=1)
    intervals: List[Tuple[Optional[Number], Optional[Number]]] = Field(default_factory=list)
    cuts: List[Number] = Field(default_factory=list)
    base: Optional["StackSpec"] = None
    functions: List[FunctionSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def _shape(self):
        if self.dim == 1:
            if self.base is not None or self.functions:
                raise ValueError("a one-dimensional stack takes intervals only")
            if not self.intervals:
                raise ValueError("a one-dimensional stack needs at least one interval")
        else:
            if self.base is None:
                raise ValueError(f"a {self.dim}-dimensional stack needs a base")
            if self.base.dim != self.dim - 1:
                raise ValueError(f"base has dim {self.base.dim}, expected {self.dim - 1}")
            if not self.functions:
                raise ValueError("a stack needs at least one function")
            if self.intervals or self.cuts:
                raise ValueError("intervals and cuts belong to the one-dimensional base")
        return self


class ChartSpec(_Strict):
    exprs: List[str] = Field(min_length=1)
    params: List[str] = Field(default_factory=list)
    domain: List[str] = Field(default_factory=list)
    label: str = ""


class PairSpec(_Strict):
    """(Λ, Γ): Γ 落在 Λ 的边界上，基点满足 φΛ(lam_base) = φΓ(gam_base)"""
    lam: ChartSpec
    gam: ChartSpec
    lam_base: List[float]
    gam_base: List[float] = Field(default_factory=list)
    id: str = ""


class SceneFile(_Strict):
    version: Literal[1] = SCENE_VERSION
    dim: int = Field(ge=1)
    stack: Optional[StackSpec] = None
    pair: Optional[PairSpec] = None
    subsets: Dict[str, List[str]] = Field(default_factory=dict)
    checker: CheckerConfig = Field(default_factory=CheckerConfig)
    pipeline: PipelineConfig = Field(default_factory=PipelineConfig)

    @model_validator(mode="after")
    def _one_body(self):
        if (self.stack is None) == (self.pair is None):
            raise ValueError("a scene holds exactly one of 'stack' or 'pair'")
        if self.stack is not None and self.stack.dim != self.dim:
            raise ValueError(f"stack has dim {self.stack.dim} but the scene declares dim {self.dim}")
        if self.pair is not None and self.subsets:
            raise ValueError("subsets refer to stack cells; a pair scene has none")
        return self


StackSpec.model_rebuild()


# ============ 解析 ============

@dataclass
class Scene:
    """解析并验证后的场景"""
    source: SceneFile
    stack: Optional[StackPresentation] = None
    pair: Optional[StratumPair] = None
    diagnostics: Optional[StackDiagnostics] = None
    path: Optional[str] = None

    @property
    def dim(self) -> int:
        return self.source.dim

    @property
    def subsets(self) -> List[str]:
        return sorted(self.source.subsets)

    @property
    def checker(self) -> CheckerConfig:
        return self.source.checker

    @property
    def pipeline(self) -> PipelineConfig:
        """场景的流水线配置，checker 取顶层设置"""
        return self.source.pipeline.model_copy(update={"checker": self.source.checker})


def _pointer(loc: Tuple) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def _schema_error(e: ValidationError) -> SchemaError:
    errors = e.errors()
    pointers = [_pointer(err["loc"]) for err in errors]
    details = "; ".join(f"{_pointer(err['loc'])}: {err['msg']}" for err in errors[:5])
    return SchemaError(f"scene does not match the schema: {details}", pointers)


def _rebase(e: SchemaError, prefix: str) -> SchemaError:
    pointers = []
    for p in e.pointers:
        pointers.append("subsets." + p[len("selected."):] if p.startswith("selected.") else prefix + p)
    return SchemaError(e.detail, pointers or [prefix.rstrip(".")])


def _build_stack(spec: StackSpec, selected: Mapping[str, List[str]], where: str) -> StackPresentation:
    try:
        if spec.dim == 1:
            return StackPresentation(
                1,
                intervals=[(lo, hi) for lo, hi in spec.intervals],
                cuts=list(spec.cuts),
                selected={k: frozenset(v) for k, v in selected.items()},
            )
        base = _build_stack(spec.base, {}, f"{where}base.")
        functions = []
        for i, fn in enumerate(spec.functions):
            try:
                functions.append(FunctionHandle(fn.pieces, spec.dim - 1, declared_lipschitz=fn.lipschitz,
                                                name=fn.name or f"eta{i + 1}"))
            except SchemaError as e:
                raise SchemaError(e.detail, [f"functions.{i}.pieces"])
        return StackPresentation(spec.dim, base=base, functions=functions,
                                 selected={k: frozenset(v) for k, v in selected.items()})
    except SchemaError as e:
        if any(p.startswith("stack.") or p.startswith("subsets.") for p in e.pointers):
            raise
        raise _rebase(e, where)


def _build_chart(spec: ChartSpec, where: str) -> Chart:
    try:
        return Chart.from_expressions(spec.exprs, spec.params, spec.domain, label=spec.label)
    except (sympy.SympifyError, SyntaxError, TypeError, ValueError) as e:
        raise SchemaError(f"cannot build chart: {e}", [f"{where}.exprs"])


def _build_pair(spec: PairSpec, dim: int) -> StratumPair:
    lam = _build_chart(spec.lam, "pair.lam")
    gam = _build_chart(spec.gam, "pair.gam")
    for name, chart, base in (("lam", lam, spec.lam_base), ("gam", gam, spec.gam_base)):
        if chart.ambient_dim != dim:
            raise SchemaError(f"chart {name} lives in R^{chart.ambient_dim}, the scene in R^{dim}",
                              [f"pair.{name}.exprs"])
        if len(base) != chart.dim:
            raise SchemaError(f"{name}_base has {len(base)} entries, chart {name} has {chart.dim} parameters",
                              [f"pair.{name}_base"])
    c_lam, c_gam = lam(np.asarray(spec.lam_base, dtype=float)), gam(np.asarray(spec.gam_base, dtype=float))
    if not np.allclose(c_lam, c_gam, atol=1e-9):
        raise SchemaError(f"base points disagree: {c_lam.tolist()} vs {c_gam.tolist()}", ["pair.lam_base"])
    return StratumPair(lam, gam, spec.lam_base, spec.gam_base, spec.id or f"{lam.label or 'lam'}|{gam.label or 'gam'}")


def parse_scene_data(data: Any, validate: bool = True, samples: int = 256, path: Optional[str] = None) -> Scene:
    """
    字典形式的场景 -> Scene

    Raises:
        SchemaError: schema 不符、胞腔编号悬空、n ≥ 2 时底空间无界
        StackValidationError: 栈的顺序 / 二分性 / 连续性不成立
    """
    try:
        source = SceneFile.model_validate(data)
    except ValidationError as e:
        raise _schema_error(e)
    scene = Scene(source, path=path)
    if source.pair is not None:
        scene.pair = _build_pair(source.pair, source.dim)
        logger.info("[Scene] pair %s in R^%d", scene.pair.pair_id, source.dim)
        return scene
    S = _build_stack(source.stack, source.subsets, "stack.")
    if S.dim >= 2 and not S.bounded:
        raise SchemaError("unbounded bases are only supported for one-dimensional stacks",
                          ["stack.base.intervals"])
    scene.stack = S
    if validate:
        diag = validate_stack(S, samples=samples, seed=source.checker.scheme.seed)
        scene.diagnostics = diag
        if not diag.ok:
            logger.warning("[Scene] stack validation failed with %d violation(s)", len(diag.violations))
            raise StackValidationError(diag)
    logger.info("[Scene] %d-dimensional stack, b=%d, %d cell(s)", S.dim, S.b, len(S.cells()))
    return scene


def parse_scene(path: Union[str, Path], validate: bool = True, samples: int = 256) -> Scene:
    """读取场景文件；JSON 语法错误带行号"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read scene {path}: {e}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg}", [f"line {e.lineno}"])
    return parse_scene_data(data, validate=validate, samples=samples, path=str(path))


# ============ 报告 ============

def to_jsonable(value: Any) -> Any:
    """报告里的 numpy / Fraction / 非有限浮点统一成 JSON 值"""
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value


def dump_report(report: Mapping[str, Any]) -> str:
    """相同输入与种子得到逐字节相同的文本 (不写时间戳)"""
    return json.dumps(to_jsonable(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_report(report: Mapping[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_report(report), encoding="utf-8")
    logger.info("[Report] written to %s", path)
    return path
