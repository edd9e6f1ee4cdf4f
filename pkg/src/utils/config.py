"""
配置 - 采样方案、检查器容差、流水线参数

优先级: 传入参数 > 场景文件 > 环境变量 > 默认值
"""
import logging
import os
from fractions import Fraction
from typing import Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator

load_dotenv()

# ============ 全局默认值 ============
DEFAULTS = {
    "seed": 0,
    "geometric_tol": 1e-9,     # 几何等式的绝对容差
    "metric_slack": 1e-9,      # 度量不等式的松弛量
    "log_level": "WARNING",
}

SEED_ENV = "STRATRI_SEED"
LOG_LEVEL_ENV = "STRATRI_LOG_LEVEL"


def default_seed(seed: Optional[int] = None) -> int:
    """种子: 传入参数 > 环境变量 > 默认值"""
    if seed is not None:
        return int(seed)
    raw = os.getenv(SEED_ENV)
    if raw:
        try:
            return int(raw)
        except ValueError:
            logging.getLogger(__name__).warning("[Config] ignoring non-integer %s=%r", SEED_ENV, raw)
    return DEFAULTS["seed"]


def default_log_level(level: Optional[str] = None) -> str:
    return (level or os.getenv(LOG_LEVEL_ENV) or DEFAULTS["log_level"]).upper()


class SchemeConfig(BaseModel):
    """逼近序列方案: 方向 × 速率 × 收缩层级"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    directions: int = Field(12, ge=1)
    # b(t) 以 t 逼近，a(t) 以 t^rate 逼近
    rates: Tuple[float, ...] = (1.0, 2.0, 3.0, 1.5, 4.0 / 3.0)
    levels: int = Field(8, ge=3)
    initial_scale: float = Field(0.1, gt=0)
    shrink: float = Field(0.5, gt=0, lt=1)
    seed: int = Field(default_factory=default_seed)

    @field_validator("rates")
    @classmethod
    def _positive_rates(cls, rates):
        if not rates or any(r <= 0 for r in rates):
            raise ValueError("rates must be a non-empty tuple of positive exponents")
        return tuple(float(r) for r in rates)

    def scales(self):
        return [self.initial_scale * self.shrink ** level for level in range(self.levels)]


# 流水线内部证书用的轻量方案
LIGHT_SCHEME = dict(directions=4, rates=(1.0, 2.0), levels=5)


class CheckerConfig(BaseModel):
    """正则性检查器配置"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    condition: str = "whitney-b"
    tol: float = Field(1e-6, gt=0)
    epsilon: float = Field(1e-4, gt=0)         # liminf 正性阈值
    alpha0: float = Field(1e-2, gt=0)          # 正则方向阈值
    growth_factor: float = Field(4.0, gt=1)    # 商的增长上限
    inconclusive_band: float = Field(10.0, gt=1)
    decay_exponent: float = Field(0.25, gt=0)  # 统计量 ~ r^p, p 超过它即视为趋于 0
    samples: int = Field(1000, ge=2)
    scheme: SchemeConfig = Field(default_factory=SchemeConfig)


class PipelineConfig(BaseModel):
    """三角剖分流水线配置"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    refinement_cap: int = Field(8, ge=0)
    substratify_cap: int = Field(4, ge=0)
    geometric_tol: float = Field(DEFAULTS["geometric_tol"], gt=0)
    compatibility_samples: int = Field(10_000, ge=1)
    certificate_samples: int = Field(64, ge=2)
    certify: bool = True
    checker: CheckerConfig = Field(default_factory=CheckerConfig)
    certificate_scheme: SchemeConfig = Field(default_factory=lambda: SchemeConfig(**LIGHT_SCHEME))


def as_fraction(value) -> Fraction:
    """把 int / str / Fraction / float 统一为精确有理数"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(value)
