"""
正则性条件注册表

每个条件声明自己具备的性质 (局部、可定义、一般、C^q 不变、投影、提升、锥)；
同时具备全部七项的条件才可用于 Q-三角剖分。性质只是声明，不做验证。
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, FrozenSet, List, Optional

from src.core.errors import PreconditionError
from src.core.regularity import RegularityReport, SequenceScheme, StratumPair, verdier_check, whitney_b_check
from src.utils.config import CheckerConfig

logger = logging.getLogger(__name__)


class Capability(str, Enum):
    LOCAL = "local"
    DEFINABLE = "definable"
    GENERIC = "generic"
    CQ_INVARIANT = "cq-invariant"
    PROJECTION = "projection"
    LIFTING = "lifting"
    CONICAL = "conical"


ALL_CAPABILITIES: FrozenSet[Capability] = frozenset(Capability)

CheckFn = Callable[[StratumPair, Optional[SequenceScheme], Optional[CheckerConfig]], RegularityReport]


@dataclass(frozen=True)
class RegularityCondition:
    name: str
    check: CheckFn
    capabilities: FrozenSet[Capability] = ALL_CAPABILITIES
    min_q: int = 1
    description: str = ""

    def triangulable(self, q: int = 1) -> bool:
        return self.capabilities >= ALL_CAPABILITIES and q >= self.min_q

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "capabilities": sorted(c.value for c in self.capabilities),
            "min_q": self.min_q,
            "description": self.description,
        }


_REGISTRY: Dict[str, RegularityCondition] = {}


def register_condition(condition: RegularityCondition, replace: bool = False) -> RegularityCondition:
    if condition.name in _REGISTRY and not replace:
        raise ValueError(f"condition {condition.name!r} is already registered")
    _REGISTRY[condition.name] = condition
    logger.debug("[Conditions] registered %s with %d capabilities", condition.name, len(condition.capabilities))
    return condition


def unregister_condition(name: str) -> None:
    _REGISTRY.pop(name, None)


def get_condition(name: str) -> RegularityCondition:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise PreconditionError(f"unknown condition {name!r}; available: {', '.join(available_conditions())}")


def available_conditions() -> List[str]:
    return sorted(_REGISTRY)


def is_triangulable(name: str, q: int = 2) -> bool:
    """带锥性质的 𝒲ℒ 条件"""
    return get_condition(name).triangulable(q)


register_condition(RegularityCondition(
    "whitney-b", whitney_b_check, ALL_CAPABILITIES, min_q=1,
    description="secant limits lie in tangent limits",
))
register_condition(RegularityCondition(
    "verdier", verdier_check, ALL_CAPABILITIES, min_q=2,
    description="d(T_xΓ, T_yΛ) ≤ C|x - y| near Γ",
))
