import operator
from typing import Any, Callable, Dict, List, Optional, Tuple, TypedDict

from typing_extensions import Annotated


class QTriangulationState(TypedDict, total=False):
    stack: Any                       # StackPresentation
    subsets: List[str]
    condition: str
    config: Any                      # PipelineConfig
    on_progress: Optional[Callable[[str, float], None]]
    triangulation: Any               # Triangulation (K₁, h₁)
    dim: int
    refined_skeleton: Any            # 细分后的 (d-1) 维骨架
    residuals: List[Dict[str, Any]]
    K2: Any
    h2: Any
    K3: Any                          # ConeComplexK3
    f: Any
    complex: Any                     # 最终的 IndexedComplex
    h3: Any
    reports: List[Any]
    compatibility: Any
    labels: Dict[Tuple[int, ...], str]
    notes: List[str]
    messages: Annotated[List[str], operator.add]
