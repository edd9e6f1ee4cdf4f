"""
栈验证器 - 在三角剖分前验证栈表示的合理性
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.utils.config import DEFAULTS, default_seed

logger = logging.getLogger(__name__)


@dataclass
class Violation:
    kind: str            # ordering | dichotomy | continuity | coverage
    cell: str            # 底胞腔编号
    message: str
    witness: Optional[Tuple[float, ...]] = None
    level: Optional[int] = None

    def __str__(self) -> str:
        at = f" at {self.witness}" if self.witness is not None else ""
        return f"{self.kind}: {self.message}{at}"

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "cell": self.cell,
            "level": self.level,
            "message": self.message,
            "witness": None if self.witness is None else [float(c) for c in self.witness],
        }


@dataclass
class StackDiagnostics:
    dim: int
    violations: List[Violation] = field(default_factory=list)
    # (底胞腔, k) -> "≡" 或 "<"
    dichotomy: Dict[Tuple[str, int], str] = field(default_factory=dict)
    samples: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> Dict:
        return {
            "dim": self.dim,
            "ok": self.ok,
            "samples": self.samples,
            "violations": [v.to_dict() for v in self.violations],
            "dichotomy": {f"{cell}/{k}": rel for (cell, k), rel in sorted(self.dichotomy.items())},
        }


class StackValidator:
    """
    验证栈表示

    检查项:
    1. 顺序: η_k ≤ η_{k+1}
    2. 二分性: 每个底胞腔上 η_k ≡ η_{k+1} 或 η_k < η_{k+1}
    3. 连续性: 相邻分片在公共闭包上取值一致
    4. 覆盖: 底上每一点至少落在一个分片里
    """

    def __init__(self, samples: int = 256, seed: Optional[int] = None, tol: float = DEFAULTS["geometric_tol"]):
        self.samples = samples
        self.seed = default_seed(seed)
        self.tol = tol

    def validate(self, S) -> StackDiagnostics:
        diag = StackDiagnostics(dim=S.dim)
        if S.dim == 1:
            return diag
        base_diag = self.validate(S.base)
        diag.violations.extend(base_diag.violations)
        diag.samples += base_diag.samples

        rng = np.random.default_rng(self.seed)
        base_cells = S.base.cells()
        per_cell = max(2, self.samples // max(1, len(base_cells)))
        for gamma in base_cells:
            points = [S.base.representative(gamma.id)]
            if gamma.dim > 0:
                points.extend(S.base.sample_cell(gamma.id, rng, per_cell, exact=True))
            diag.samples += len(points)
            values = self._check_coverage(S, gamma.id, points, diag)
            if values is None:
                continue
            self._check_ordering(S, gamma.id, points, values, diag)
            self._check_dichotomy(S, gamma.id, points, values, diag)
            self._check_continuity(S, gamma.id, points, diag)
        if diag.violations:
            logger.info("[StackValidator] %d violation(s) in %d-dimensional stack", len(diag.violations), S.dim)
        return diag

    def _check_coverage(self, S, cell_id: str, points: Sequence, diag: StackDiagnostics) -> Optional[List[List]]:
        rows = []
        for y in points:
            row = []
            for k, h in enumerate(S.functions):
                if not h.pieces_at(y, self.tol):
                    diag.violations.append(Violation(
                        "coverage", cell_id, f"η{k + 1} has no piece here", _floats(y), k + 1))
                    return None
                row.append(h.eval(y, self.tol))
            rows.append(row)
        return rows

    def _check_ordering(self, S, cell_id: str, points: Sequence, values, diag: StackDiagnostics) -> None:
        for k in range(S.b - 1):
            for y, row in zip(points, values):
                if _gt(row[k], row[k + 1], self.tol):
                    diag.violations.append(Violation(
                        "ordering", cell_id,
                        f"η{k + 1} = {float(row[k]):.6g} exceeds η{k + 2} = {float(row[k + 1]):.6g}",
                        _floats(y), k + 1))
                    break

    def _check_dichotomy(self, S, cell_id: str, points: Sequence, values, diag: StackDiagnostics) -> None:
        for k in range(S.b - 1):
            equal = [_eq(row[k], row[k + 1], self.tol) for row in values]
            if all(equal):
                diag.dichotomy[(cell_id, k + 1)] = "≡"
            elif not any(equal):
                diag.dichotomy[(cell_id, k + 1)] = "<"
            else:
                where = points[equal.index(True)]
                diag.violations.append(Violation(
                    "dichotomy", cell_id,
                    f"η{k + 1} and η{k + 2} touch on part of the cell only", _floats(where), k + 1))

    def _check_continuity(self, S, cell_id: str, points: Sequence, diag: StackDiagnostics) -> None:
        for k, h in enumerate(S.functions):
            for y in points:
                keys = h.pieces_at(y, self.tol)
                if len(keys) < 2:
                    continue
                vals = [float(h.eval_piece(key, y)) for key in keys]
                if max(vals) - min(vals) > self.tol:
                    diag.violations.append(Violation(
                        "continuity", cell_id,
                        f"pieces of η{k + 1} disagree by {max(vals) - min(vals):.3g}", _floats(y), k + 1))
                    break

    def suggest_fixes(self, diag: StackDiagnostics) -> List[str]:
        """根据问题提供修复建议"""
        suggestions = []
        kinds = {v.kind for v in diag.violations}
        if "ordering" in kinds:
            suggestions.append("Reorder the functions or split the base so that each η_k stays below η_{k+1}")
        if "dichotomy" in kinds:
            suggestions.append("Add a cut where consecutive functions start to coincide")
        if "continuity" in kinds:
            suggestions.append("Make the pieces agree on the faces they share")
        if "coverage" in kinds:
            suggestions.append("Add a piece (or a global '*' piece) covering the uncovered base cell")
        return suggestions


def _floats(y: Sequence) -> Tuple[float, ...]:
    return tuple(float(c) for c in y)


def _gt(a, b, tol: float) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        return a > b + tol
    return a > b


def _eq(a, b, tol: float) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        return abs(a - b) <= tol
    return a == b


def validate_stack(S, samples: int = 256, seed: Optional[int] = None) -> StackDiagnostics:
    """验证顺序、二分性、连续性；违规带见证点"""
    return StackValidator(samples=samples, seed=seed).validate(S)


def suggest_fixes(diag: StackDiagnostics) -> List[str]:
    return StackValidator().suggest_fixes(diag)
