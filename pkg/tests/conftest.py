"""共享夹具: 方形、三角形、菱形 (圆盘) 栈，尖点层对，快速配置"""
import os
import sys
from pathlib import Path

import pytest

# 确保项目根目录在 Python 路径中
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from src.core.defnfun import FunctionHandle, StackPresentation  # noqa: E402
from src.core.grassmann import Chart  # noqa: E402
from src.core.conditions import RegularityCondition, register_condition, unregister_condition  # noqa: E402
from src.core.regularity import FAIL, RegularityReport, StratumPair  # noqa: E402
from src.utils.config import CheckerConfig, PipelineConfig, SchemeConfig  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


def line(lo, hi, cuts=()):
    return StackPresentation(1, intervals=[(lo, hi)], cuts=list(cuts))


def stack2(base, *pieces, selected=None):
    """每个参数是一个 η: 表达式字符串 (全局片) 或 {片键: 表达式}"""
    functions = [
        FunctionHandle(p if isinstance(p, dict) else {"*": p}, 1, name=f"eta{i + 1}")
        for i, p in enumerate(pieces)
    ]
    return StackPresentation(2, base=base, functions=functions, selected=selected or {})


@pytest.fixture
def square():
    return stack2(line(0, 1), "0", "1")


@pytest.fixture
def triangle():
    return stack2(line(0, 1), "0", "y0", selected={"top": {"b1[i0]"}, "hyp": {"g2[i0]"}})


@pytest.fixture
def disk():
    return stack2(
        line(-1, 1, cuts=[0]),
        {"i0": "-1 - y0", "i1": "-1 + y0"},
        {"i0": "1 + y0", "i1": "1 - y0"},
        selected={"upper": {"b1[i0]", "b1[i1]", "b1[p1]"}},
    )


@pytest.fixture
def cusp_pair():
    lam = Chart.from_expressions(["t**2 - w**2", "(t**2 - w**2)*w", "t"], ["t", "w"],
                                 ["t > 0", "t**2 - w**2 > 0"], label="cusp")
    gam = Chart.from_expressions(["0", "0", "s"], ["s"], label="axis")
    return StratumPair(lam, gam, [0.0, 0.0], [0.0], "cusp|axis")


@pytest.fixture
def small_scheme():
    return SchemeConfig(directions=3, rates=(1.0, 2.0), levels=4, seed=0)


@pytest.fixture
def fast_config(small_scheme):
    return PipelineConfig(
        certificate_samples=8,
        compatibility_samples=200,
        checker=CheckerConfig(scheme=small_scheme),
        certificate_scheme=SchemeConfig(directions=2, rates=(1.0,), levels=4, seed=0),
    )


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def always_fail():
    """每个层对都失败的条件 (声明全部性质)"""

    def check(pair, scheme=None, config=None):
        return RegularityReport("always-fail", pair.pair_id, FAIL, 1.0, witness={"pair": pair.pair_id})

    register_condition(RegularityCondition("always-fail", check), replace=True)
    yield "always-fail"
    unregister_condition("always-fail")
