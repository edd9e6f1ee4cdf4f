"""
正则性检查器 - 弱 Lipschitz、弱双 Lipschitz、Whitney (B)、Verdier

所有检查器都是采样证伪器: 沿逼近曲线族 a(t) ∈ Γ, b(t) ∈ Λ (t = t0·shrink^ℓ)
计算统计量序列，再按下面的规则外推极限:
1. 趋于 0 型 (Whitney): 末值 ≤ tol，或 log-log 斜率 ≥ decay_exponent → pass
2. 有界型 (弱 Lipschitz、Verdier 常数): 增长比 ≤ growth_factor → pass；
   增长且斜率 ≤ -decay_exponent → fail
3. 下极限正型 (逆映射): 衰减或末值 < ε → fail
落在阈值 10 倍带内的结论记为 inconclusive。
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from src.core.errors import DegenerateChartError, DomainError, GrassmannInputError, PreconditionError
from src.core.grassmann import Chart, Subspace, dist_subspace, dist_vec_subspace, tangent_space
from src.core.simplicial import IndexedComplex, Point, Scalar, Simplex, SimplicialComplex, as_float, mean_point
from src.utils.config import CheckerConfig, SchemeConfig

logger = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"
_RANK = {PASS: 0, INCONCLUSIVE: 1, FAIL: 2}

FALSIFIER_NOTE = "sampling-based falsifier: pass means no violation found at this scheme and tolerance"


def worst_verdict(verdicts: Iterable[str]) -> str:
    return max(verdicts, key=_RANK.__getitem__, default=PASS)


# ============ 层对与逼近方案 ============

@dataclass
class StratumPair:
    """
    (Λ, Γ)，Γ ⊂ closure(Λ)∖Λ

    lam_base 在 Λ 参数域的边界上，φΛ(lam_base) = φΓ(gam_base) = c。
    """
    lam: Chart
    gam: Chart
    lam_base: np.ndarray
    gam_base: np.ndarray
    pair_id: str = ""

    def __post_init__(self):
        self.lam_base = np.asarray(self.lam_base, dtype=float).reshape(self.lam.dim)
        self.gam_base = np.asarray(self.gam_base, dtype=float).reshape(self.gam.dim)
        if self.lam.ambient_dim != self.gam.ambient_dim:
            raise PreconditionError(
                f"strata live in R^{self.lam.ambient_dim} and R^{self.gam.ambient_dim}")
        if not self.pair_id:
            self.pair_id = f"{self.lam.label or 'lam'}|{self.gam.label or 'gam'}"

    @property
    def ambient_dim(self) -> int:
        return self.lam.ambient_dim

    @property
    def base_point(self) -> np.ndarray:
        return self.gam(self.gam_base)

    def validate(self, tol: float = 1e-6) -> List[str]:
        """Γ 的基点在 Γ 中，且是 Λ 的边界点"""
        issues = []
        if not self.gam.contains(self.gam_base):
            issues.append(f"base parameter {self.gam_base.tolist()} is outside {self.gam.label!r}")
        if self.lam.contains(self.lam_base):
            issues.append(f"base parameter {self.lam_base.tolist()} is inside {self.lam.label!r}, not on its frontier")
        gap = float(np.linalg.norm(self.lam(self.lam_base) - self.gam(self.gam_base)))
        if gap > tol:
            issues.append(f"base points differ by {gap:.3g}")
        return issues


@dataclass
class CurveFamily:
    """一族逼近曲线: t ↦ (Γ 参数, Λ 参数)"""
    gamma_path: Callable[[float], np.ndarray]
    lambda_path: Callable[[float], np.ndarray]
    label: str = ""


class SequenceScheme:
    """
    逼近序列方案

    缺省曲线族: directions 个方向 × rates 个速率
        a(t) = φΓ(u_c + t^p·e),  b(t) = φΛ(v_c + t·d)
    d 为指向 Λ 参数域内部的单位向量 (拒绝采样)。
    """

    def __init__(self, config: Optional[SchemeConfig] = None, families: Optional[Sequence[CurveFamily]] = None,
                 **overrides):
        self.config = config if config is not None else SchemeConfig(**overrides)
        self.families = list(families) if families else None

    def scales(self) -> List[float]:
        return self.config.scales()

    def families_for(self, pair: StratumPair) -> List[CurveFamily]:
        if self.families is not None:
            return list(self.families)
        rng = np.random.default_rng(self.config.seed)
        scales = self.scales()
        rates = self.config.rates if pair.gam.dim > 0 else self.config.rates[:1]
        out = []
        for i in range(self.config.directions):
            d = inward_direction(pair.lam, pair.lam_base, scales, rng)
            if d is None:
                continue
            e = _tangent_direction(pair.gam, pair.gam_base, scales, rng)
            for p in rates:
                out.append(_linear_family(pair, d, e, p, f"dir{i}/rate{p:g}"))
        return out


def _linear_family(pair: StratumPair, d: np.ndarray, e: np.ndarray, rate: float, label: str) -> CurveFamily:
    u0, v0 = pair.gam_base.copy(), pair.lam_base.copy()
    return CurveFamily(lambda t: u0 + (t ** rate) * e, lambda t: v0 + t * d, label)


def inward_direction(chart: Chart, base: np.ndarray, scales: Sequence[float], rng: np.random.Generator,
                     tries: int = 500) -> Optional[np.ndarray]:
    """单位向量 d 使 base + t·d 对所有 t ∈ scales 都在参数域内"""
    k = chart.dim
    if k == 0:
        return None
    for _ in range(tries):
        d = rng.standard_normal(k)
        d /= np.linalg.norm(d)
        if all(chart.contains(base + t * d) for t in scales):
            return d
    return None


def _tangent_direction(chart: Chart, base: np.ndarray, scales: Sequence[float], rng: np.random.Generator) -> np.ndarray:
    if chart.dim == 0:
        return np.zeros(0)
    for _ in range(100):
        e = rng.standard_normal(chart.dim)
        e /= np.linalg.norm(e)
        if all(chart.contains(base + t * e) for t in scales):
            return e
        if all(chart.contains(base - t * e) for t in scales):
            return -e
    return np.zeros(chart.dim)


@dataclass
class _Sample:
    t: float
    value: float
    gamma_param: np.ndarray
    lambda_param: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def witness(self, label: str) -> Dict:
        return {
            "family": label,
            "t": self.t,
            "value": self.value,
            "gamma_param": self.gamma_param.tolist(),
            "lambda_param": self.lambda_param.tolist(),
            "a": self.a.tolist(),
            "b": self.b.tolist(),
        }


@dataclass
class _FamilyRun:
    label: str
    samples: List[_Sample] = field(default_factory=list)

    @property
    def scales(self) -> List[float]:
        return [s.t for s in self.samples]

    @property
    def values(self) -> List[float]:
        return [s.value for s in self.samples]


def _run_families(
    pair: StratumPair,
    scheme: SequenceScheme,
    value_fn: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], Optional[float]],
    notes: List[str],
) -> List[_FamilyRun]:
    runs = []
    skipped = 0
    for fam in scheme.families_for(pair):
        run = _FamilyRun(fam.label)
        for t in scheme.scales():
            u, v = np.asarray(fam.gamma_path(t), dtype=float), np.asarray(fam.lambda_path(t), dtype=float)
            try:
                a, b = pair.gam(u), pair.lam(v)
                value = value_fn(u, v, a, b)
            except (DegenerateChartError, DomainError, GrassmannInputError) as e:
                notes.append(f"{fam.label} at t={t:.3g}: {e}")
                continue
            if value is None or not np.isfinite(value):
                skipped += 1
                continue
            run.samples.append(_Sample(t, float(value), u, v, a, b))
        if run.samples:
            runs.append(run)
    if skipped:
        notes.append(f"{skipped} coincident or degenerate sample(s) skipped")
    return runs


# ============ 极限外推 ============

def fit_slope(scales: Sequence[float], values: Sequence[float]) -> Optional[float]:
    """log(value) 对 log(t) 的最小二乘斜率；正值点不足 3 个时返回 None"""
    pts = [(np.log(t), np.log(v)) for t, v in zip(scales, values) if v > 0 and t > 0]
    if len(pts) < 3:
        return None
    x, y = np.array(pts).T
    if np.ptp(x) == 0:
        return None
    return float(np.polyfit(x, y, 1)[0])


def limit_zero_verdict(scales: Sequence[float], values: Sequence[float], config: CheckerConfig) -> Tuple[str, str]:
    last = values[-1]
    # 单个末项为 0 不算收敛，至少末两层都在容差内
    if len(values) >= 2 and max(values[-2:]) <= config.tol:
        return PASS, "limit below tolerance"
    slope = fit_slope(scales, values)
    if slope is not None and slope >= config.decay_exponent:
        return PASS, f"statistic decays like t^{slope:.2f}"
    if last > config.tol * config.inconclusive_band:
        return FAIL, "statistic does not tend to zero"
    return INCONCLUSIVE, "statistic within the tolerance band"


def bounded_verdict(scales: Sequence[float], values: Sequence[float], config: CheckerConfig) -> Tuple[str, str]:
    positive = [v for v in values if v > config.tol]
    if not positive:
        return PASS, "statistic vanishes"
    first = max(values[0], config.tol)
    growth = values[-1] / first
    if growth <= config.growth_factor:
        return PASS, f"growth {growth:.3g} across shrink levels"
    slope = fit_slope(scales, values)
    if slope is not None and slope <= -config.decay_exponent:
        return FAIL, f"statistic grows like t^{slope:.2f}"
    return INCONCLUSIVE, f"growth {growth:.3g} without a clear power law"


def liminf_positive_verdict(scales: Sequence[float], values: Sequence[float], config: CheckerConfig) -> Tuple[str, str]:
    last = values[-1]
    slope = fit_slope(scales, values)
    decaying = slope is not None and slope >= config.decay_exponent and last < values[0]
    if decaying:
        return FAIL, f"quotient decays like t^{slope:.2f}"
    if last < config.epsilon / config.inconclusive_band:
        return FAIL, "quotient below the positivity threshold"
    if last < config.epsilon:
        return INCONCLUSIVE, "quotient within the positivity band"
    return PASS, "quotient stays positive"


# ============ 报告 ============

@dataclass
class RegularityReport:
    condition: str
    pair_id: str
    verdict: str
    statistic: float
    witness: Optional[Dict] = None
    series: Dict[str, List[float]] = field(default_factory=dict)
    stats: Dict[str, float] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.verdict not in _RANK:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == FAIL and self.witness is None:
            raise ValueError("a failing report needs a witness")
        if FALSIFIER_NOTE not in self.notes:
            self.notes.insert(0, FALSIFIER_NOTE)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> Dict:
        return {
            "condition": self.condition,
            "pair": self.pair_id,
            "verdict": self.verdict,
            "statistic": self.statistic,
            "witness": self.witness,
            "series": self.series,
            "stats": self.stats,
            "notes": self.notes,
        }


def _empty(condition: str, pair: StratumPair, notes: List[str]) -> RegularityReport:
    notes.append("no usable samples")
    return RegularityReport(condition, pair.pair_id, INCONCLUSIVE, float("nan"), notes=notes)


def _per_family_report(
    condition: str,
    pair: StratumPair,
    runs: List[_FamilyRun],
    rule: Callable[[Sequence[float], Sequence[float], CheckerConfig], Tuple[str, str]],
    config: CheckerConfig,
    notes: List[str],
    worst_is_max: bool,
) -> RegularityReport:
    if not runs:
        return _empty(condition, pair, notes)
    verdicts = []
    for run in runs:
        verdict, why = rule(run.scales, run.values, config)
        verdicts.append((verdict, why, run))
    overall = worst_verdict(v for v, _, _ in verdicts)
    pick = max if worst_is_max else min
    finals = [run.values[-1] for _, _, run in verdicts]
    statistic = pick(finals)
    offenders = [(v, why, run) for v, why, run in verdicts if v == overall]
    verdict, why, run = pick(offenders, key=lambda item: item[2].values[-1])
    witness = run.samples[-1].witness(run.label) if overall != PASS else None
    notes.append(why)
    return RegularityReport(
        condition, pair.pair_id, overall, float(statistic), witness,
        series={r.label: r.values for _, _, r in verdicts},
        stats={"families": float(len(runs))}, notes=notes,
    )


def _per_level_report(
    condition: str,
    pair: StratumPair,
    runs: List[_FamilyRun],
    config: CheckerConfig,
    scales: Sequence[float],
    notes: List[str],
    stat_name: str,
) -> RegularityReport:
    """每个收缩层级取所有曲线族的上确界，再判定序列是否有界"""
    if not runs:
        return _empty(condition, pair, notes)
    level_max: List[float] = []
    level_arg: List[Tuple[_Sample, str]] = []
    used_scales = []
    for t in scales:
        best = None
        for run in runs:
            for s in run.samples:
                if s.t == t and (best is None or s.value > best[0].value):
                    best = (s, run.label)
        if best is not None:
            used_scales.append(t)
            level_max.append(best[0].value)
            level_arg.append(best)
    verdict, why = bounded_verdict(used_scales, level_max, config)
    notes.append(why)
    sample, label = level_arg[-1]
    witness = sample.witness(label) if verdict != PASS else None
    return RegularityReport(
        condition, pair.pair_id, verdict, float(level_max[-1]), witness,
        series={"sup": level_max}, stats={stat_name: float(level_max[-1]), "peak": float(max(level_max))},
        notes=notes,
    )


def _config(config: Optional[CheckerConfig]) -> CheckerConfig:
    return config if config is not None else CheckerConfig()


def _scheme(scheme: Optional[SequenceScheme], config: CheckerConfig) -> SequenceScheme:
    return scheme if scheme is not None else SequenceScheme(config.scheme)


# ============ 检查器 ============

def weakly_lipschitz_check(
    f: Callable[[np.ndarray], Sequence[float]],
    pair: StratumPair,
    scheme: Optional[SequenceScheme] = None,
    config: Optional[CheckerConfig] = None,
) -> RegularityReport:
    """sup |f(x) - f(y)| / |x - y|，x ∈ Γ, y ∈ Λ，在收缩邻域上保持有界"""
    config = _config(config)
    scheme = _scheme(scheme, config)
    notes: List[str] = []

    def quotient(u, v, a, b):
        gap = float(np.linalg.norm(a - b))
        if gap < 1e-15:
            return None
        return float(np.linalg.norm(np.atleast_1d(f(a)) - np.atleast_1d(f(b)))) / gap

    runs = _run_families(pair, scheme, quotient, notes)
    return _per_level_report("weakly-lipschitz", pair, runs, config, scheme.scales(), notes, "sup_quotient")


def weak_bilipschitz_inverse_check(
    f: Callable[[np.ndarray], Sequence[float]],
    pair: StratumPair,
    scheme: Optional[SequenceScheme] = None,
    config: Optional[CheckerConfig] = None,
) -> RegularityReport:
    """liminf |f(a) - f(b)| / |a - b| > 0 (逆映射弱 Lipschitz 的判据)"""
    config = _config(config)
    scheme = _scheme(scheme, config)
    notes: List[str] = []

    def quotient(u, v, a, b):
        gap = float(np.linalg.norm(a - b))
        if gap < 1e-15:
            return None
        return float(np.linalg.norm(np.atleast_1d(f(a)) - np.atleast_1d(f(b)))) / gap

    runs = _run_families(pair, scheme, quotient, notes)
    return _per_family_report("weak-bilipschitz-inverse", pair, runs, liminf_positive_verdict, config, notes,
                              worst_is_max=False)


def weak_bilipschitz_check(
    f: Callable[[np.ndarray], Sequence[float]],
    pair: StratumPair,
    scheme: Optional[SequenceScheme] = None,
    config: Optional[CheckerConfig] = None,
    image_pair: Optional[StratumPair] = None,
    f_inverse: Optional[Callable[[np.ndarray], Sequence[float]]] = None,
) -> RegularityReport:
    """
    f 在源层对上弱 Lipschitz，且 f⁻¹ 在像层对上弱 Lipschitz；
    没有给出像层对时用下极限判据代替后一半
    """
    config = _config(config)
    forward = weakly_lipschitz_check(f, pair, scheme, config)
    if image_pair is not None and f_inverse is not None:
        backward = weakly_lipschitz_check(f_inverse, image_pair, scheme, config)
    else:
        backward = weak_bilipschitz_inverse_check(f, pair, scheme, config)
    verdict = worst_verdict([forward.verdict, backward.verdict])
    culprit = backward if _RANK[backward.verdict] >= _RANK[forward.verdict] else forward
    return RegularityReport(
        "weak-bilipschitz", pair.pair_id, verdict, culprit.statistic,
        culprit.witness if verdict != PASS else None,
        series={f"forward/{k}": v for k, v in forward.series.items()} | {f"inverse/{k}": v for k, v in backward.series.items()},
        stats={"forward": forward.statistic, "inverse": backward.statistic},
        notes=[f"forward: {forward.verdict}", f"inverse: {backward.verdict}"],
    )


def whitney_b_check(
    pair: StratumPair,
    scheme: Optional[SequenceScheme] = None,
    config: Optional[CheckerConfig] = None,
) -> RegularityReport:
    """割线 ℝ(a - b) 到 T_bΛ 的距离沿每族曲线趋于 0"""
    config = _config(config)
    scheme = _scheme(scheme, config)
    notes: List[str] = []

    def secant_gap(u, v, a, b):
        gap = a - b
        norm = float(np.linalg.norm(gap))
        if norm < 1e-15:
            return None
        return dist_vec_subspace(gap / norm, tangent_space(pair.lam, v))

    runs = _run_families(pair, scheme, secant_gap, notes)
    return _per_family_report("whitney-b", pair, runs, limit_zero_verdict, config, notes, worst_is_max=True)


def verdier_check(
    pair: StratumPair,
    scheme: Optional[SequenceScheme] = None,
    config: Optional[CheckerConfig] = None,
) -> RegularityReport:
    """C = sup d(T_xΓ, T_yΛ) / |x - y| 在收缩层级上保持有界"""
    config = _config(config)
    scheme = _scheme(scheme, config)
    notes: List[str] = []

    def ratio(u, v, a, b):
        gap = float(np.linalg.norm(a - b))
        if gap < 1e-15:
            return None
        tg = tangent_space(pair.gam, u) if pair.gam.dim else Subspace.zero(pair.ambient_dim)
        return dist_subspace(tg, tangent_space(pair.lam, v)) / gap

    runs = _run_families(pair, scheme, ratio, notes)
    return _per_level_report("verdier", pair, runs, config, scheme.scales(), notes, "C")


def verdier_self_test(
    chart: Chart,
    x0: Sequence[float],
    scheme: Optional[SequenceScheme] = None,
    config: Optional[CheckerConfig] = None,
) -> RegularityReport:
    """单个光滑层: x, y → x0 时 d(T_xΛ, T_yΛ) ≤ C|x - y|，C 有限且稳定"""
    config = _config(config)
    scheme = _scheme(scheme, config)
    x0 = np.asarray(x0, dtype=float)
    if not chart.contains(x0):
        raise DomainError(f"{x0.tolist()} is outside chart {chart.label!r}")
    rng = np.random.default_rng(scheme.config.seed)
    scales = scheme.scales()
    tangent0 = tangent_space(chart, x0)
    pair = StratumPair(chart, _point_chart(chart(x0), chart.label), x0, np.zeros(0), f"{chart.label}|self")
    notes: List[str] = []
    runs = []
    for i in range(scheme.config.directions):
        d1 = _tangent_direction(chart, x0, scales, rng)
        d2 = _tangent_direction(chart, x0, scales, rng)
        run = _FamilyRun(f"dir{i}")
        for t in scales:
            u, v = x0 + t * d1, x0 + 0.5 * t * d2
            try:
                a, b = chart(u), chart(v)
                gap = float(np.linalg.norm(a - b))
                if gap < 1e-15:
                    continue
                value = dist_subspace(tangent_space(chart, u), tangent_space(chart, v)) / gap
            except (DegenerateChartError, DomainError) as e:
                notes.append(str(e))
                continue
            run.samples.append(_Sample(t, value, u, v, a, b))
        if run.samples:
            runs.append(run)
    report = _per_level_report("verdier-self", pair, runs, config, scales, notes, "C")
    report.stats["tangent_dim"] = float(tangent0.k)
    return report


def _point_chart(point: np.ndarray, label: str = "") -> Chart:
    p = np.asarray(point, dtype=float)
    return Chart(lambda u: p.copy(), 0, len(p), label=f"{label}@pt")


# ============ 乘积层对与图像层对 ============

def product_pairs(pair: StratumPair, seed: int = 0) -> List[StratumPair]:
    """
    锥性质的四个乘积层对 (M = Λ, N = Γ):
    (M×(0,1), M×{1}), (M×(0,1), N×(0,1)), (M×(0,1), N×{1}), (N×(0,1), N×{1})
    """
    M, N = pair.lam, pair.gam
    rng = np.random.default_rng(seed)
    scales = SchemeConfig().scales()
    d = inward_direction(M, pair.lam_base, scales, rng)
    if d is None:
        raise PreconditionError(f"no interior point of {M.label!r} near the base point")
    m = pair.lam_base + scales[0] * d
    Mi, Mp = M.product_interval(), M.product_point(1.0)
    Ni, Np = N.product_interval(), N.product_point(1.0)
    return [
        StratumPair(Mi, Mp, np.append(m, 1.0), m, f"{pair.pair_id}:M×I|M×1"),
        StratumPair(Mi, Ni, np.append(pair.lam_base, 0.5), np.append(pair.gam_base, 0.5), f"{pair.pair_id}:M×I|N×I"),
        StratumPair(Mi, Np, np.append(pair.lam_base, 1.0), pair.gam_base, f"{pair.pair_id}:M×I|N×1"),
        StratumPair(Ni, Np, np.append(pair.gam_base, 1.0), pair.gam_base, f"{pair.pair_id}:N×I|N×1"),
    ]


def graph_pair(pair: StratumPair, g: Callable[[np.ndarray], Sequence[float]], r: int) -> StratumPair:
    """g: ℝⁿ → ℝ^r 在 Λ、Γ 上的图像组成的层对"""

    def lift(chart: Chart) -> Chart:
        return Chart(lambda u: np.append(chart(u), np.atleast_1d(g(chart(u)))), chart.dim, chart.ambient_dim + r,
                     domain=chart.contains if chart.dim else None, label=f"graph({chart.label})")

    return StratumPair(lift(pair.lam), lift(pair.gam), pair.lam_base, pair.gam_base, f"graph:{pair.pair_id}")


def lifted_schemes(products: Sequence[StratumPair], scheme: Optional[SequenceScheme]) -> List[Optional[SequenceScheme]]:
    """
    把基本层对的显式曲线族抬到 product_pairs 的四个层对上:
    M×I|N×I 在 s = 1/2 处平移，M×I|N×{1} 让 s 以速度 t 趋于 1，
    只含单个光滑层的两个层对沿 I 方向竖直逼近。
    没有显式曲线族时原样沿用 scheme。
    """
    if scheme is None or scheme.families is None:
        return [scheme] * len(products)
    m = np.asarray(products[0].gam_base, dtype=float)
    cfg = scheme.config

    def up(path, s):
        return lambda t: np.append(np.asarray(path(t), dtype=float), s(t))

    def half(t):
        return 0.5

    def to_lid(t):
        return 1.0 - t

    at_half, toward_lid, along_n = [], [], []
    for fam in scheme.families:
        at_half.append(CurveFamily(up(fam.gamma_path, half), up(fam.lambda_path, half), f"{fam.label}@1/2"))
        toward_lid.append(CurveFamily(fam.gamma_path, up(fam.lambda_path, to_lid), f"{fam.label}->1"))
        along_n.append(CurveFamily(fam.gamma_path, up(fam.gamma_path, to_lid), f"{fam.label}->1"))
    vertical = [CurveFamily(lambda t: m.copy(), up(lambda t: m, to_lid), "vertical")]
    return [SequenceScheme(cfg, vertical), SequenceScheme(cfg, at_half),
            SequenceScheme(cfg, toward_lid), SequenceScheme(cfg, along_n)]


def conical_transfer_test(
    condition: str,
    pair: StratumPair,
    scheme: Optional[SequenceScheme] = None,
    config: Optional[CheckerConfig] = None,
) -> List[RegularityReport]:
    """基本层对通过时，对四个乘积层对运行同一检查器"""
    from src.core.conditions import get_condition

    config = _config(config)
    cond = get_condition(condition)
    base = cond.check(pair, scheme, config)
    if base.verdict != PASS:
        raise PreconditionError(f"{condition} does not pass on {pair.pair_id} ({base.verdict}); "
                                f"conical transfer is not applicable")
    products = product_pairs(pair, seed=config.scheme.seed)
    reports = [cond.check(product, lifted, config)
               for product, lifted in zip(products, lifted_schemes(products, scheme))]
    logger.info("[Conical] %s on %s: %s", condition, pair.pair_id, [r.verdict for r in reports])
    return reports


# ============ 分层与极大层对约化 ============

def simplex_chart(
    indices: Sequence[int],
    point_of: Callable[[Dict[int, Scalar]], Sequence[float]],
    ambient_dim: int,
    label: str = "",
) -> Chart:
    """以重心坐标为参数的单形图册: u ↦ point_of({i0: 1-Σu, i1: u1, ...})"""
    indices = list(indices)
    k = len(indices) - 1

    def fn(u):
        weights = {indices[0]: 1.0 - float(np.sum(u))}
        weights.update({i: float(w) for i, w in zip(indices[1:], u)})
        return as_float(point_of(weights))

    def inside(u):
        return bool(np.all(u > 0) and np.sum(u) < 1) if k else True

    return Chart(fn, k, ambient_dim, domain=inside if k else None, label=label)


@dataclass
class Stratification:
    """
    有限分层

    dims: 层 -> 维数
    frontier: 层 -> closure(层)∖层 中的层
    """
    dims: Dict[str, int]
    frontier: Dict[str, Set[str]]
    charts: Dict[str, Chart] = field(default_factory=dict)
    vertices: Dict[str, Tuple[int, ...]] = field(default_factory=dict)
    # 顶点编号 -> 参数空间坐标 (Γ 的顶点不全是 Λ 的顶点时用于定位基点)
    coordinates: Dict[int, Point] = field(default_factory=dict)

    @classmethod
    def from_indexed(
        cls,
        K: IndexedComplex,
        point_of: Callable[[Dict[int, Scalar]], Sequence[float]],
        ambient_dim: int,
    ) -> "Stratification":
        dims, frontier, charts, verts = {}, {}, {}, {}
        for s in K.sorted_simplices():
            sid = stratum_id(s)
            dims[sid] = len(s) - 1
            frontier[sid] = {stratum_id(f) for f in K.proper_faces(s)}
            charts[sid] = simplex_chart(s, point_of, ambient_dim, label=sid)
            verts[sid] = tuple(s)
        return cls(dims, frontier, charts, verts)

    @classmethod
    def from_complex(
        cls,
        K: SimplicialComplex,
        mapping: Optional[Callable[[Sequence[Scalar]], Sequence[float]]] = None,
    ) -> "Stratification":
        indexed = IndexedComplex.from_simplicial(K)
        mapping = mapping or (lambda p: p)
        ambient = len(as_float(mapping(indexed.coordinates[0]))) if indexed.coordinates else K.ambient_dim
        return cls.from_indexed(indexed, lambda w: mapping(indexed.point(w)), ambient)

    @property
    def top_dim(self) -> int:
        return max(self.dims.values(), default=-1)

    def pair(self, big: str, small: str) -> StratumPair:
        """Γ 的重心作为基点"""
        if small not in self.frontier.get(big, ()):
            raise PreconditionError(f"{small} is not in the frontier of {big}")
        L, G = self.vertices[big], self.vertices[small]
        share = 1.0 / len(G)
        gam_base = np.full(len(G) - 1, share)
        if set(G) <= set(L):
            lam_base = np.array([share if i in G else 0.0 for i in L[1:]])
        else:
            if not all(i in self.coordinates for i in L + G):
                raise PreconditionError(f"{small} is not spanned by vertices of {big}; coordinates are needed")
            centre = mean_point([self.coordinates[i] for i in G])
            mu = Simplex(tuple(self.coordinates[i] for i in L), validate=False).barycentric_coordinates(centre)
            if mu is None:
                raise PreconditionError(f"{small} does not lie in the affine span of {big}")
            lam_base = np.array([float(m) for m in mu[1:]])
        return StratumPair(self.charts[big], self.charts[small], lam_base, gam_base, f"{big}|{small}")


def stratum_id(s: Sequence[int]) -> str:
    return ".".join(str(i) for i in s)


def maximal_pair_reduction(strat: Stratification) -> List[Tuple[str, str]]:
    """
    唯一的顶层 Λ 且 dim(closure∖Λ) < dim Λ 时只需 {Λ, Γ_i}；
    否则退回到全部相邻层对
    """
    if len(strat.dims) <= 1:
        return []
    top = [s for s, d in strat.dims.items() if d == strat.top_dim]
    if len(top) == 1:
        lam = top[0]
        if all(strat.dims[g] < strat.dims[lam] for g in strat.frontier.get(lam, ())):
            others = set(strat.dims) - {lam}
            if others <= strat.frontier.get(lam, set()):
                return [(lam, g) for g in sorted(others)]
    logger.debug("[Pairs] no unique top stratum; using all adjacent pairs")
    return adjacent_pairs(strat)


def adjacent_pairs(strat: Stratification) -> List[Tuple[str, str]]:
    return [(big, small) for big in sorted(strat.dims) for small in sorted(strat.frontier.get(big, ()))]


def weakly_lipschitz_on(
    strat: Stratification,
    f: Callable[[np.ndarray], Sequence[float]],
    scheme: Optional[SequenceScheme] = None,
    config: Optional[CheckerConfig] = None,
) -> List[RegularityReport]:
    """在约化后的层对上运行弱 Lipschitz 检查"""
    return [weakly_lipschitz_check(f, strat.pair(big, small), scheme, config)
            for big, small in maximal_pair_reduction(strat)]
