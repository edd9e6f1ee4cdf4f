"""
异常层次 - 所有模块共用

InputError 一族对应 CLI 退出码 3；数值检查失败不抛异常，而是写进报告。
"""
from typing import Any, List, Optional


class StratriError(Exception):
    """根异常"""


class InputError(StratriError):
    """输入数据有问题 (CLI 退出码 3)"""


class SchemaError(InputError):
    """场景文件不符合 schema

    pointers: 出错位置列表，形如 "stack.functions.0.pieces" 或 "line 12"
    """

    def __init__(self, message: str, pointers: Optional[List[str]] = None):
        self.detail = message
        self.pointers = list(pointers or [])
        if self.pointers:
            message = f"{message} (at {', '.join(self.pointers)})"
        super().__init__(message)


class DomainError(InputError):
    """点不在函数或映射的定义域内"""


class DegenerateSimplexError(InputError):
    """顶点仿射相关"""


class DegenerateChartError(InputError):
    """图册的 Jacobian 秩不足"""


class DegenerateConeError(InputError):
    """锥顶落在底的仿射包里"""


class IncidenceError(InputError):
    """K2 的单形没有被任何 K1 单形的闭包承载"""


class GrassmannInputError(InputError):
    """非单位向量、维数不匹配或非直线"""


class UnsupportedFormatError(InputError):
    """网格格式不支持当前数据"""


class PreconditionError(InputError):
    """调用前提不满足"""


class LipschitzEstimationError(InputError):
    """无法在退化胞腔上估计 Lipschitz 常数"""


class StackValidationError(InputError):
    """栈表示未通过验证，diagnostics 带见证点"""

    def __init__(self, diagnostics: Any):
        self.diagnostics = diagnostics
        lines = [str(v) for v in getattr(diagnostics, "violations", [])]
        super().__init__("stack validation failed: " + "; ".join(lines[:5]))


class RefinementError(StratriError):
    """重心细分次数超过上限仍未分离"""

    def __init__(self, message: str, offending: Optional[List[Any]] = None):
        self.offending = list(offending or [])
        super().__init__(message)


class PipelineStageError(StratriError):
    """流水线某一阶段失败，带阶段标签"""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


class ConditionFailureError(StratriError):
    """正则性条件在输出三角剖分上失败，reports 带见证"""

    def __init__(self, message: str, reports: Optional[List[Any]] = None):
        self.reports = list(reports or [])
        super().__init__(message)
