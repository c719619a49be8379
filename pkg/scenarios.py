#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
验证场景注册表

每个场景复现一条恒等式（claim），运行后产生一个 CheckReport：
状态 pass / fail / error、命名残差、见证值、实际使用的参数与耗时。
run_all 按场景 id 排序返回报告，全部通过时退出码为 0。
"""

import cmath
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from beltrami import (
    ConformalDomainError,
    GridDomain,
    align_mu,
    beltrami_residual,
    bracket_from_mu,
    conformal_map,
    conformal_pullback_check,
    mu_exact,
    mu_grid,
    polydisc_admissible,
    qc_certify,
    stretched_exponential,
    transform_mu,
)
from cauchy_numeric import (
    ContourSpec,
    MuFunction,
    analytic_derivative,
    cauchy_derivative,
    cauchy_integral,
    cauchy_reproduce,
    cr_residual,
    cr_residual_second,
    mu_function_eval,
    normal_ordered_value,
)
from expr_parser import FamilyViolationError, ParseError, PowerOverflowError, parse, parse_scalar, serialize
from settings import DEFAULT_SEED
from star_engine import (
    StarConfig,
    hbar_coefficient,
    phase_kappa,
    poisson_bracket,
    quantum_correction,
    star,
    star_commutator,
    star_n,
    star_truncated,
    truncation_bound,
)
from term_algebra import (
    StarExpr,
    Term,
    add,
    affine,
    canonicalize,
    conj,
    constant,
    d_x,
    d_y,
    d_z,
    d_zbar,
    degree,
    distance,
    evaluate,
    evaluate_grid,
    exponential,
    monomial,
    mul,
    scale,
)

logger = logging.getLogger(__name__)


class ScenarioError(ValueError):
    """未知场景或参数覆盖无效"""


class ConfigError(ValueError):
    """配置文件格式错误，location 指明出错位置"""

    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, complex):
        return [_jsonable(value.real), _jsonable(value.imag)]
    if isinstance(value, float):
        return value if math.isfinite(value) else repr(value)
    return str(value)


@dataclass
class CheckReport:
    """单个场景的结构化结果"""

    scenario_id: str
    status: str
    claim: str
    tolerance: float
    residuals: Dict[str, float] = field(default_factory=dict)
    witnesses: Dict[str, Any] = field(default_factory=dict)
    parameters: Dict[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0
    reference: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    @property
    def max_residual(self) -> float:
        finite = [v for v in self.residuals.values() if not math.isnan(v)]
        return max(finite, default=0.0)

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        data = {
            "scenario": self.scenario_id,
            "status": self.status,
            "claim": self.claim,
            "reference": self.reference,
            "tolerance": self.tolerance,
            "residuals": _jsonable(self.residuals),
            "witnesses": _jsonable(self.witnesses),
            "parameters": _jsonable(self.parameters),
        }
        if include_timing:
            data["wall_time"] = round(self.wall_time, 6)
        return data

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True, ensure_ascii=False)

    def to_text(self, include_timing: bool = False) -> str:
        lines = [f"[{self.status.upper()}] {self.scenario_id}", f"  恒等式: {self.claim}"]
        if self.reference:
            lines.append(f"  出处: {self.reference}")
        for name in sorted(self.residuals):
            lines.append(f"  残差 {name} = {self.residuals[name]:.3e}")
        for name in sorted(self.witnesses):
            lines.append(f"  见证 {name} = {json.dumps(_jsonable(self.witnesses[name]), ensure_ascii=False)}")
        params = json.dumps(_jsonable(self.parameters), sort_keys=True, ensure_ascii=False)
        lines.append(f"  参数: {params}")
        if include_timing:
            lines.append(f"  耗时: {self.wall_time:.3f} s")
        return "\n".join(lines)


class ScenarioContext:
    """场景运行上下文：参数、种子化随机数与检查记录"""

    def __init__(self, params: Dict[str, Any]):
        self.params = params
        self.tol = params.get("tol", 1e-10)
        self.rng = np.random.default_rng(params.get("seed", DEFAULT_SEED))
        self.residuals: Dict[str, float] = {}
        self.witnesses: Dict[str, Any] = {}
        self.failures: List[str] = []

    def __getitem__(self, key: str) -> Any:
        return self.params[key]

    def cnormal(self, scale: float = 1.0) -> complex:
        return complex(scale * self.rng.normal(), scale * self.rng.normal())

    def in_disc(self, radius: float) -> complex:
        r = radius * math.sqrt(self.rng.uniform())
        return cmath.rect(r, self.rng.uniform(0, 2 * math.pi))

    def uniform(self, low: float, high: float) -> float:
        return float(self.rng.uniform(low, high))

    def check(self, name: str, residual: float, tol: Optional[float] = None, **witness) -> bool:
        """记录残差（取最大值），超出容差时记为失败"""
        tol = self.tol if tol is None else tol
        residual = float(residual)
        previous = self.residuals.get(name)
        if previous is None or math.isnan(residual) or residual > previous:
            self.residuals[name] = residual
        ok = math.isfinite(residual) and residual <= tol
        if not ok:
            self._fail(name, dict(witness, residual=residual, tolerance=tol))
        return ok

    def expect(self, name: str, condition: bool, **witness) -> bool:
        if not condition:
            self._fail(name, witness or {"condition": False})
        return bool(condition)

    def observe(self, name: str, value: Any) -> None:
        self.witnesses[name] = _jsonable(value)

    def _fail(self, name: str, witness: Dict[str, Any]) -> None:
        self.failures.append(name)
        self.witnesses.setdefault(name, _jsonable(witness))


@dataclass
class Scenario:
    id: str
    claim: str
    body: Callable[[ScenarioContext], None]
    defaults: Dict[str, Any]
    reference: str = ""

    @property
    def tolerance(self) -> float:
        return self.defaults["tol"]


SCENARIOS: Dict[str, Scenario] = {}


def scenario(scenario_id: str, claim: str, reference: str = "", **defaults):
    """注册场景；reference 为所验证恒等式的名称，defaults 中的值决定参数覆盖时的类型"""

    def register(body):
        if scenario_id in SCENARIOS:
            raise ScenarioError(f"场景 id 重复: {scenario_id}")
        SCENARIOS[scenario_id] = Scenario(scenario_id, claim, body, dict(defaults), reference)
        return body

    return register


def scenario_ids() -> List[str]:
    return sorted(SCENARIOS)


# ---------------------------------------------------------------------------
# 参数合并
# ---------------------------------------------------------------------------

_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def _coerce(key: str, value: Any, default: Any) -> Any:
    target = type(default)
    try:
        if target is bool:
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.strip().lower() in _TRUE | _FALSE:
                return value.strip().lower() in _TRUE
        elif target is int:
            if isinstance(value, bool):
                raise TypeError
            if isinstance(value, int):
                return value
            if isinstance(value, float) and value.is_integer():
                return int(value)
            if isinstance(value, str):
                return int(value.strip())
        elif target is float:
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                result = float(value)
            elif isinstance(value, str):
                result = float(value.strip())
            else:
                raise TypeError
            if not math.isfinite(result):
                raise ValueError
            return result
        elif target is complex:
            if isinstance(value, (int, float, complex)) and not isinstance(value, bool):
                return complex(value)
            if isinstance(value, (list, tuple)) and len(value) == 2:
                return complex(float(value[0]), float(value[1]))
            if isinstance(value, str):
                return parse_scalar(value)
        elif target is str and isinstance(value, str):
            return value
    except (TypeError, ValueError):
        pass
    raise ScenarioError(f"参数 {key} 需要 {target.__name__} 类型，实际为 {value!r}")


def merge_parameters(sc: Scenario, *layers: Optional[Dict[str, Any]], strict: bool = True) -> Dict[str, Any]:
    """
    按顺序叠加参数层（后者优先）

    Args:
        sc: 场景
        layers: 参数覆盖层
        strict: 为 True 时未声明的参数名报错，否则忽略
    """
    params = dict(sc.defaults)
    for layer in layers:
        for key, value in (layer or {}).items():
            if key not in sc.defaults:
                if strict:
                    raise ScenarioError(f"场景 {sc.id} 没有参数 '{key}'，可用参数: {', '.join(sorted(sc.defaults))}")
                continue
            params[key] = _coerce(key, value, sc.defaults[key])
    return params


def run_scenario(
    scenario_id: str,
    overrides: Optional[Dict[str, Any]] = None,
    base: Optional[Dict[str, Any]] = None,
) -> CheckReport:
    """
    运行单个场景

    Args:
        scenario_id: 已注册的场景 id
        overrides: 严格的参数覆盖（未知参数名报错）
        base: 宽松的底层参数（如环境种子、全局覆盖），只作用于已声明的参数

    Raises:
        ScenarioError: 未知 id 或参数类型无效
    """
    if scenario_id not in SCENARIOS:
        raise ScenarioError(f"未知场景 '{scenario_id}'，可选: {', '.join(scenario_ids())}")
    sc = SCENARIOS[scenario_id]
    params = merge_parameters(sc, base, strict=False)
    params = merge_parameters(sc, params, overrides)
    ctx = ScenarioContext(params)

    logger.info(f"开始场景 {scenario_id}")
    started = time.perf_counter()
    try:
        sc.body(ctx)
        status = "fail" if ctx.failures else "pass"
    except Exception as e:
        logger.error(f"场景 {scenario_id} 执行出错: {e}")
        ctx.witnesses["exception"] = {"type": type(e).__name__, "message": str(e)}
        status = "error"
    elapsed = time.perf_counter() - started
    logger.info(f"场景 {scenario_id}: {status.upper()}（{elapsed:.2f} s）")
    return CheckReport(
        scenario_id=scenario_id,
        status=status,
        claim=sc.claim,
        reference=sc.reference,
        tolerance=params["tol"],
        residuals=ctx.residuals,
        witnesses=ctx.witnesses,
        parameters=params,
        wall_time=elapsed,
    )


def load_config(path: str) -> Dict[str, Dict[str, Any]]:
    """
    读取配置文件: {"overrides": {"<scenario id>" | "*": {"参数": 值}}}

    Raises:
        ConfigError: 文件不可读、JSON 无效或结构错误
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(path, f"无法读取配置文件: {e.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}", f"JSON 格式错误: {e.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(path, "顶层必须是 JSON 对象")
    overrides = data.get("overrides", {})
    if not isinstance(overrides, dict):
        raise ConfigError(f"{path}: overrides", "必须是以场景 id 为键的对象")
    for key, value in overrides.items():
        if key != "*" and key not in SCENARIOS:
            raise ConfigError(f"{path}: overrides.{key}", f"未知场景 id，可选: {', '.join(scenario_ids())}")
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: overrides.{key}", "必须是参数对象")
    return overrides


def run_all(
    config_path: Optional[str] = None,
    jobs: int = 1,
    flags: Optional[Dict[str, Any]] = None,
    default_seed: int = DEFAULT_SEED,
) -> Tuple[List[CheckReport], int]:
    """
    运行全部场景

    优先级: 命令行参数 > 配置文件中按 id 的覆盖 > 配置文件 "*" > 环境种子 > 默认值

    Returns:
        (按 id 排序的报告列表, 退出码 0 表示全部通过)
    """
    overrides = load_config(config_path) if config_path else {}
    global_layer = overrides.get("*", {})
    for key in global_layer:
        if not any(key in sc.defaults for sc in SCENARIOS.values()):
            raise ConfigError(f"{config_path}: overrides.*.{key}", "没有任何场景声明该参数")

    def run_one(scenario_id: str) -> CheckReport:
        sc = SCENARIOS[scenario_id]
        params = merge_parameters(sc, {"seed": default_seed}, global_layer, strict=False)
        params = merge_parameters(sc, params, overrides.get(scenario_id))
        params = merge_parameters(sc, params, flags, strict=False)
        return run_scenario(scenario_id, params)

    ids = scenario_ids()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(run_one, ids))
    else:
        reports = [run_one(scenario_id) for scenario_id in ids]
    reports.sort(key=lambda report: report.scenario_id)
    passed = sum(report.passed for report in reports)
    logger.info(f"全部场景完成: {passed}/{len(reports)} 通过")
    return reports, 0 if passed == len(reports) else 1


def reports_to_frame(reports: List[CheckReport], include_timing: bool = False) -> pd.DataFrame:
    """汇总表：每个场景一行"""
    rows = []
    for report in reports:
        row = {
            "scenario": report.scenario_id,
            "status": report.status,
            "reference": report.reference,
            "max_residual": report.max_residual,
            "tolerance": report.tolerance,
            "checks": len(report.residuals),
        }
        if include_timing:
            row["wall_time"] = round(report.wall_time, 3)
        rows.append(row)
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# 场景实现
# ---------------------------------------------------------------------------

def _rel(a: complex, b: complex) -> float:
    return abs(a - b) / max(1.0, abs(b))


def _random_term(ctx: ScenarioContext, max_power: int, freq_scale: float) -> Term:
    return Term(
        ctx.cnormal(),
        int(ctx.rng.integers(0, max_power + 1)),
        int(ctx.rng.integers(0, max_power + 1)),
        ctx.cnormal(freq_scale),
        ctx.cnormal(freq_scale),
    )


def _random_expr(ctx: ScenarioContext, max_terms: int, max_power: int, freq_scale: float) -> StarExpr:
    count = int(ctx.rng.integers(1, max_terms + 1))
    return canonicalize(_random_term(ctx, max_power, freq_scale) for _ in range(count))


def _nonzero(ctx: ScenarioContext, scale: float = 1.0, floor: float = 0.2) -> complex:
    while True:
        value = ctx.cnormal(scale)
        if abs(value) >= floor:
            return value


@scenario(
    "affine-star",
    "(a₁z + b₁zbar + c₁) ⋆ (a₂z + b₂zbar + c₂) = f₁f₂ + iħ(a₁b₂ − b₁a₂)",
    reference="仿射函数星积闭式",
    seed=DEFAULT_SEED, trials=100, hbar_max=2.0, tol=1e-12,
)
def _affine_star(ctx: ScenarioContext) -> None:
    for trial in range(ctx["trials"]):
        a1, b1, c1, a2, b2, c2 = (ctx.cnormal() for _ in range(6))
        hbar = ctx.uniform(-ctx["hbar_max"], ctx["hbar_max"])
        f1, f2 = affine(a1, b1, c1), affine(a2, b2, c2)
        exact = star(f1, f2, StarConfig(hbar))
        closed = add(mul(f1, f2), constant(1j * hbar * (a1 * b2 - b1 * a2)))
        ctx.check("closed_form", distance(exact, closed), trial=trial, hbar=hbar)
        ctx.check("order_one_series", distance(star_truncated(f1, f2, hbar, 1), exact), trial=trial, hbar=hbar)

    f1, f2 = parse("2*z + zbar"), parse("3*z - zbar")
    concrete = star(f1, f2, StarConfig(1.0))
    ctx.check("concrete_example", distance(concrete, add(mul(f1, f2), constant(-5j))))
    ctx.observe("concrete_example", serialize(concrete))


@scenario(
    "exp-phase",
    "e^{i(α₁z+β₁zbar)} ⋆ e^{i(α₂z+β₂zbar)} = e^{−iħ(α₁β₂−β₁α₂)} f₁f₂",
    reference="指数族星积相位",
    seed=DEFAULT_SEED, trials=100, hbar=1.0, freq_scale=0.7,
    truncation_trials=20, max_order=20, tol=1e-12,
)
def _exp_phase(ctx: ScenarioContext) -> None:
    hbar = ctx["hbar"]
    cfg = StarConfig(hbar)
    for trial in range(ctx["trials"]):
        a1, b1, a2, b2 = (ctx.cnormal(ctx["freq_scale"]) for _ in range(4))
        f1 = exponential(a1, b1, ctx.cnormal())
        f2 = exponential(a2, b2, ctx.cnormal())
        kappa = phase_kappa(a1, b1, a2, b2)
        product = mul(f1, f2)
        ctx.check("phase_formula", distance(star(f1, f2, cfg), scale(product, cmath.exp(-1j * hbar * kappa))),
                  trial=trial, kappa=kappa)
        ctx.check("commutator", distance(star_commutator(f1, f2, cfg), scale(product, -2j * cmath.sin(hbar * kappa))),
                  trial=trial, kappa=kappa)
        ctx.check("conjugation", distance(conj(star(f1, f2, cfg)), star(conj(f1), conj(f2), cfg)), trial=trial)

    for trial in range(ctx["truncation_trials"]):
        a1, b1, a2, b2 = (ctx.cnormal(ctx["freq_scale"]) for _ in range(4))
        f1, f2 = exponential(a1, b1), exponential(a2, b2)
        w = -1j * hbar * phase_kappa(a1, b1, a2, b2)
        exact = star(f1, f2, cfg).terms[0].coeff
        for order in range(ctx["max_order"] + 1):
            truncated = star_truncated(f1, f2, hbar, order)
            value = truncated.terms[0].coeff if truncated.terms else 0j
            excess = abs(value - exact) - truncation_bound(w, order)
            ctx.check("truncation_bound_excess", max(0.0, excess) / max(1.0, abs(exact)),
                      trial=trial, order=order, w=w)


@scenario(
    "hbar-series",
    "F = F⁽⁰⁾ + ħF⁽¹⁾ + ħ²F⁽²⁾ + ···, F⁽⁰⁾ = f₁f₂, F⁽¹⁾ = i{f₁, f₂}, F⁽ᵏ⁾ = ((−iκ)ᵏ/k!) f₁f₂",
    reference="ħ 展开系数",
    seed=DEFAULT_SEED, trials=50, max_order=6, max_power=2, tol=1e-10,
)
def _hbar_series(ctx: ScenarioContext) -> None:
    for trial in range(ctx["trials"]):
        f = canonicalize([_random_term(ctx, ctx["max_power"], 0.7)])
        g = canonicalize([_random_term(ctx, ctx["max_power"], 0.7)])
        ctx.check("zeroth_order", distance(hbar_coefficient(f, g, 0), mul(f, g)), trial=trial)
        ctx.check("first_order_poisson", distance(hbar_coefficient(f, g, 1), scale(poisson_bracket(f, g), 1j)),
                  trial=trial)

        a1, b1, a2, b2 = (ctx.cnormal(0.7) for _ in range(4))
        e1, e2 = exponential(a1, b1, ctx.cnormal()), exponential(a2, b2, ctx.cnormal())
        kappa = phase_kappa(a1, b1, a2, b2)
        product = mul(e1, e2)
        for k in range(ctx["max_order"] + 1):
            expected = scale(product, (-1j * kappa) ** k / math.factorial(k))
            ctx.check("exponential_coefficients", distance(hbar_coefficient(e1, e2, k), expected), trial=trial, k=k)

        p = canonicalize(Term(ctx.cnormal(), int(ctx.rng.integers(0, 3)), int(ctx.rng.integers(0, 3))) for _ in range(3))
        q = canonicalize(Term(ctx.cnormal(), int(ctx.rng.integers(0, 3)), int(ctx.rng.integers(0, 3))) for _ in range(3))
        hbar = ctx.uniform(-2, 2)
        order = degree(p) + degree(q)
        ctx.check("polynomial_termination", distance(star_truncated(p, q, hbar, order), star(p, q, StarConfig(hbar))),
                  trial=trial, order=order)


@scenario(
    "mu-composite",
    "μ_F = (β₁+β₂)/(α₁+α₂) for F = f₁ ⋆ f₂, independent of ħ",
    reference="复合 Beltrami 系数",
    seed=DEFAULT_SEED, trials=50, hbars="0,0.5,1,2", tol=1e-12,
)
def _mu_composite(ctx: ScenarioContext) -> None:
    hbars = [float(h) for h in ctx["hbars"].split(",")]
    ctx.check("affine_example", abs(mu_exact(parse("z + 0.5*zbar")).value - 0.5))
    ctx.check("exponential_example", abs(mu_exact(parse("exp(i*z)*exp(0.3i*zbar)")).value - 0.3))
    ctx.check("holomorphic_example", abs(mu_exact(parse("exp(i*z)")).value))
    for trial in range(ctx["trials"]):
        alphas = [_nonzero(ctx) for _ in range(3)]
        while abs(alphas[0] + alphas[1]) < 0.2 or abs(sum(alphas)) < 0.2:
            alphas = [_nonzero(ctx) for _ in range(3)]
        betas = [ctx.cnormal(0.5) for _ in range(3)]
        factors = [exponential(a, b) for a, b in zip(alphas, betas)]
        for j, factor in enumerate(factors):
            ctx.check("single_factor", _rel(mu_exact(factor).value, betas[j] / alphas[j]), trial=trial)
        expected_pair = (betas[0] + betas[1]) / (alphas[0] + alphas[1])
        expected_triple = sum(betas) / sum(alphas)
        for hbar in hbars:
            cfg = StarConfig(hbar)
            pair = mu_exact(star(factors[0], factors[1], cfg))
            triple = mu_exact(star_n(factors, cfg))
            ctx.check("pair_composite", _rel(pair.value, expected_pair), trial=trial, hbar=hbar)
            ctx.check("triple_composite", _rel(triple.value, expected_triple), trial=trial, hbar=hbar)


@scenario(
    "associativity",
    "(f₁⋆f₂)⋆f₃ = f₁⋆(f₂⋆f₃); triple phase e^{−iħ[(α₁β₂−β₁α₂)+(α₂β₃−β₂α₃)+(α₁β₃−β₁α₃)]}",
    reference="结合律与三重相位",
    seed=DEFAULT_SEED, trials=100, max_power=2, hbar_max=2.0, tol=1e-10, phase_tol=1e-12,
)
def _associativity(ctx: ScenarioContext) -> None:
    passed = 0
    noncommuting = 0
    for trial in range(ctx["trials"]):
        f1, f2, f3 = (canonicalize([_random_term(ctx, ctx["max_power"], 0.6)]) for _ in range(3))
        cfg = StarConfig(ctx.uniform(-ctx["hbar_max"], ctx["hbar_max"]))
        left = star(star(f1, f2, cfg), f3, cfg)
        right = star(f1, star(f2, f3, cfg), cfg)
        if ctx.check("associativity", distance(left, right), trial=trial, hbar=cfg.hbar):
            passed += 1

        (a1, b1), (a2, b2), (a3, b3) = ((ctx.cnormal(0.7), ctx.cnormal(0.7)) for _ in range(3))
        e1, e2, e3 = exponential(a1, b1), exponential(a2, b2), exponential(a3, b3)
        kappa = phase_kappa(a1, b1, a2, b2) + phase_kappa(a2, b2, a3, b3) + phase_kappa(a1, b1, a3, b3)
        product = mul(mul(e1, e2), e3)
        triple = star_n([e1, e2, e3], cfg)
        ctx.check("triple_phase", distance(triple, scale(product, cmath.exp(-1j * cfg.hbar * kappa))),
                  ctx["phase_tol"], trial=trial)
        cyclic = star_n([e2, e3, e1], cfg)
        if distance(triple, cyclic) > ctx.tol:
            noncommuting += 1
    ctx.observe("associative_triples", f"{passed}/{ctx['trials']}")
    ctx.observe("cyclic_order_differs_count", f"{noncommuting}/{ctx['trials']}")
    ctx.expect("cyclic_order_differs", noncommuting > 0, noncommuting=noncommuting)
    single = canonicalize([_random_term(ctx, ctx["max_power"], 0.6)])
    ctx.expect("single_element", star_n([single]) == single)


@scenario(
    "poisson-vanishing",
    "{f₁, f₂} = (μ₂ − μ₁) ∂_z f₁ ∂_z f₂ vanishes iff μ₁ = μ₂; rotating and dilating μ aligns them",
    reference="Poisson 括号零点",
    seed=DEFAULT_SEED, trials=100, tol=1e-10,
)
def _poisson_vanishing(ctx: ScenarioContext) -> None:
    for trial in range(ctx["trials"]):
        a1, a2 = _nonzero(ctx), _nonzero(ctx)
        mu1 = ctx.in_disc(0.9)
        aligned = trial % 2 == 0
        mu2 = mu1
        while not aligned and abs(mu2 - mu1) < 0.05:
            mu2 = ctx.in_disc(0.9)
        f1 = exponential(a1, mu1 * a1, ctx.cnormal())
        f2 = exponential(a2, mu2 * a2, ctx.cnormal())
        bracket = poisson_bracket(f1, f2)
        ctx.expect("vanishing_iff_aligned", bracket.is_zero == aligned, trial=trial, aligned=aligned)
        if aligned:
            ctx.expect("no_quantum_correction", quantum_correction(f1, f2, StarConfig(1.0)).is_zero, trial=trial)
        else:
            ctx.check("mu_form", distance(bracket, bracket_from_mu(f1, f2)), trial=trial)
            realigned = align_mu(f1, mu2)
            ctx.check("realigned_mu", _rel(mu_exact(realigned).value, mu2), trial=trial)
            ctx.expect("realigned_bracket_vanishes", poisson_bracket(realigned, f2).is_zero, trial=trial)

    holomorphic = [mul(monomial(ctx.cnormal(), int(ctx.rng.integers(0, 3))), exponential(ctx.cnormal(), 0))
                   for _ in range(2)]
    ctx.expect("holomorphic_no_correction",
               quantum_correction(holomorphic[0], holomorphic[1], StarConfig(1.0)).is_zero)
    rotated = transform_mu(parse("z + 0.5*zbar"), math.pi, 1.0)
    ctx.check("rotation_example", abs(mu_exact(rotated).value + 0.5))


@scenario(
    "conformal-invariance",
    "|μ_{f∘φ}| = |μ_f| for conformal φ (translation, scaling, Möbius, exp on a strip)",
    reference="|μ| 的共形不变性",
    grid=256, tol=1e-6,
)
def _conformal_invariance(ctx: ScenarioContext) -> None:
    n = ctx["grid"]
    square = GridDomain.square(0, 1.0, n)
    upper = GridDomain(-1.0, 1.0, 0.1, 2.0, n, n)
    functions = {"affine": affine(1, 0.4), "exponential": exponential(1, 0.25)}
    cases = [
        ("identity", conformal_map("identity"), square),
        ("translation", conformal_map("translation", shift=0.5 - 0.25j), square),
        ("scaling", conformal_map("scaling", factor=1.5 + 0.5j), square),
        ("mobius_affine", conformal_map("mobius", a=2, b=1, c=0, d=1), square),
        ("mobius_cayley", conformal_map("mobius", a=1, b=-1j, c=1, d=1j), upper),
        ("exp_strip", conformal_map("exp-strip"), square),
    ]
    for fname, f in functions.items():
        for name, phi, dom in cases:
            for method in ("chain", "stencil"):
                residual = conformal_pullback_check(f, phi, dom, method=method)
                ctx.check(f"{fname}/{name}/{method}", residual)
        ctx.check(f"{fname}/identity/machine", conformal_pullback_check(f, conformal_map("identity"), square), 1e-14)

    try:
        conformal_pullback_check(functions["affine"], conformal_map("mobius", a=1, b=-1j, c=1, d=1j),
                                 GridDomain.square(0, 2.0, n))
        rejected = False
    except ConformalDomainError:
        rejected = True
    ctx.expect("pole_inside_rejected", rejected)


def _random_mu_function(ctx: ScenarioContext, n: int) -> Tuple[MuFunction, List[complex]]:
    alphas = tuple(_nonzero(ctx, 0.7) for _ in range(n))
    mf = MuFunction(alphas, ctx.in_disc(0.5), ctx.uniform(-1, 1))
    return mf, [ctx.in_disc(0.9) for _ in range(n)]


@scenario(
    "cauchy-2var",
    "F(μ₁, μ₂) = ∮∮ F(ζ₁, ζ₂) / ((ζ₁ − μ₁)(ζ₂ − μ₂)) dζ₁dζ₂/(2πi)²",
    reference="二元 Cauchy 积分表示",
    seed=DEFAULT_SEED, trials=20, nodes=128, tol=1e-8,
)
def _cauchy_2var(ctx: ScenarioContext) -> None:
    nodes = ctx["nodes"]
    mf = MuFunction((1, 2), 0.1 + 0.2j, 0.5)
    mus = [0.3, -0.2j]
    direct = mu_function_eval(mf, mus)
    ctx.check("two_code_paths", _rel(normal_ordered_value(mf, mus), direct), 1e-12)
    spot = cauchy_reproduce(mf, mus, [ContourSpec(0, 1.0, nodes)] * 2)
    ctx.check("spot_reproduction", _rel(spot, direct))
    ctx.check("equal_mu_is_product", _rel(mu_function_eval(mf, [0.3, 0.3]),
                                          evaluate(mul(exponential(1, 0.3), exponential(2, 0.6)), mf.z0)), 1e-12)

    for trial in range(ctx["trials"]):
        mf, mus = _random_mu_function(ctx, 2)
        direct = mu_function_eval(mf, mus)
        ctx.check("reproduction", _rel(cauchy_reproduce(mf, mus, [ContourSpec(0, 2.0, nodes)] * 2), direct),
                  trial=trial)
        other = cauchy_reproduce(mf, mus, [ContourSpec(0.1j, 3.5, nodes)] * 2)
        ctx.check("contour_independence", _rel(other, direct), trial=trial)
        errors = [_rel(cauchy_reproduce(mf, mus, [ContourSpec(0, 2.0, m)] * 2), direct) for m in (32, 64, 128)]
        ctx.check("node_doubling_increase", max(0.0, errors[1] - errors[0], errors[2] - errors[1]), 1e-12,
                  trial=trial, errors=errors)

    single = MuFunction((1,), 0.3 + 0.4j, 0.0)
    target = [0.3]
    exact = mu_function_eval(single, target)
    sweep = [_rel(cauchy_reproduce(single, target, [ContourSpec(0, r, 16)]), exact) for r in (0.9, 0.6, 0.45, 0.35)]
    ctx.observe("radius_sweep_errors", sweep)
    ctx.expect("radius_sweep_monotone", all(a < b for a, b in zip(sweep, sweep[1:])), errors=sweep)
    c = 2.5 - 1j
    reproduced = cauchy_integral(lambda grids: np.full(grids[0].shape, c), [0.4j], [ContourSpec(0, 1.0, 64)])
    ctx.check("constant_function", _rel(reproduced, c), 1e-12)


@scenario(
    "cauchy-nvar",
    "∂^{m}F(μ) = (m₁!···m_n!) ∮···∮ F(ζ) / Π(ζ_j − μ_j)^{m_j+1} Π dζ_j/(2πi), ∂F/∂μ_j = i[α_j zbar₀ + ħ(Σ_{k>j}α_jα_k − Σ_{k<j}α_kα_j)] F",
    reference="多元 Cauchy 积分与正规序导数",
    seed=DEFAULT_SEED, trials=10, nodes=128, nodes_3var=64, tol=1e-8, tol_3var=1e-6, fd_tol=1e-5, fd_step=1e-5,
)
def _cauchy_nvar(ctx: ScenarioContext) -> None:
    for trial in range(ctx["trials"]):
        mf, mus = _random_mu_function(ctx, 2)
        contours = [ContourSpec(0, 2.0, ctx["nodes"])] * 2
        ctx.check("orders_zero", _rel(cauchy_derivative(mf, mus, (0, 0), contours),
                                      cauchy_reproduce(mf, mus, contours)), 1e-14, trial=trial)
        for orders in ((1, 0), (0, 1), (1, 1), (2, 0)):
            numeric = cauchy_derivative(mf, mus, orders, contours)
            ctx.check("derivative_2var", _rel(numeric, analytic_derivative(mf, mus, orders)), trial=trial,
                      orders=list(orders))
        h = ctx["fd_step"]
        fd = (mu_function_eval(mf, [mus[0] + h, mus[1]]) - mu_function_eval(mf, [mus[0] - h, mus[1]])) / (2 * h)
        ctx.check("finite_difference", _rel(cauchy_derivative(mf, mus, (1, 0), contours), fd), ctx["fd_tol"],
                  trial=trial)

        mf3, mus3 = _random_mu_function(ctx, 3)
        contours3 = [ContourSpec(0, 2.0, ctx["nodes_3var"])] * 3
        ctx.check("reproduction_3var", _rel(cauchy_reproduce(mf3, mus3, contours3), mu_function_eval(mf3, mus3)),
                  ctx["tol_3var"], trial=trial)
        ctx.check("derivative_3var", _rel(cauchy_derivative(mf3, mus3, (1, 0, 1), contours3),
                                          analytic_derivative(mf3, mus3, (1, 0, 1))), ctx["tol_3var"], trial=trial)
        ctx.check("normal_ordered_3var", _rel(normal_ordered_value(mf3, mus3), mu_function_eval(mf3, mus3)), 1e-12,
                  trial=trial)


@scenario(
    "cauchy-riemann",
    "∂_{μbar_j} F = 0 and ∂_{μ_j}∂_{μbar_k} F = 0",
    reference="μ 空间 Cauchy-Riemann 条件",
    seed=DEFAULT_SEED, trials=20, step=1e-4, tol=1e-6, tol_second=1e-4,
)
def _cauchy_riemann(ctx: ScenarioContext) -> None:
    step = ctx["step"]
    for trial in range(ctx["trials"]):
        mf, mus = _random_mu_function(ctx, 2)
        for j in range(2):
            ctx.check("first_order", cr_residual(mf, mus, j, step), trial=trial, j=j)
            for k in range(2):
                ctx.check("second_mixed", cr_residual_second(mf, mus, j, k, step), ctx["tol_second"],
                          trial=trial, j=j, k=k)


@scenario(
    "lagrangian-phase",
    "L = ∂_xφ†∂_xφ + ∂_yφ†∂_yφ, L_⋆ = e^{−iħ(1−|μ_φ|²)|α|²} L",
    reference="星积拉格朗日量相位",
    seed=DEFAULT_SEED, trials=20, grid=16, tol=1e-10,
)
def _lagrangian_phase(ctx: ScenarioContext) -> None:
    points = GridDomain.square(0, 1.0, ctx["grid"]).points()

    def lagrangians(amplitude, alpha, beta, hbar):
        phi = exponential(alpha, beta, amplitude)
        phi_dagger = conj(phi)
        cfg = StarConfig(hbar)
        pointwise = add(mul(d_x(phi_dagger), d_x(phi)), mul(d_y(phi_dagger), d_y(phi)))
        starred = add(star(d_x(phi_dagger), d_x(phi), cfg), star(d_y(phi_dagger), d_y(phi), cfg))
        return phi, pointwise, starred

    _, pointwise, starred = lagrangians(1.0, 1.0, 0.5, 1.0)
    z0 = 0.3 + 0.1j
    ratio = evaluate(starred, z0) / evaluate(pointwise, z0)
    ctx.check("spot_phase", abs(ratio - cmath.exp(-0.75j)))
    ctx.observe("spot_phase", ratio)

    for trial in range(ctx["trials"]):
        amplitude, alpha, beta = ctx.cnormal(), _nonzero(ctx, 0.7), ctx.cnormal(0.5)
        hbar = ctx.uniform(-2, 2)
        phi, pointwise, starred = lagrangians(amplitude, alpha, beta, hbar)
        phase = cmath.exp(-1j * hbar * (1 - abs(beta / alpha) ** 2) * abs(alpha) ** 2)
        ctx.check("symbolic_phase", distance(starred, scale(pointwise, phase)), trial=trial, hbar=hbar)
        l_values = evaluate_grid(pointwise, points)
        ls_values = evaluate_grid(starred, points)
        ctx.check("grid_phase", float(np.max(np.abs(ls_values - phase * l_values)) / np.max(np.abs(l_values))),
                  trial=trial)
        wirtinger_form = 2 * (np.abs(evaluate_grid(d_z(phi), points)) ** 2
                              + np.abs(evaluate_grid(d_zbar(phi), points)) ** 2)
        ctx.check("wirtinger_form", float(np.max(np.abs(l_values - wirtinger_form)) / np.max(wirtinger_form)),
                  trial=trial)


@scenario(
    "qc-classification",
    "f is quasiconformal iff |∂_zbar f| ≤ k|∂_z f| with k < 1, ∂_z f ≠ 0 and f_z, f_zbar square integrable",
    reference="拟共形定义与 |μ| < 1",
    seed=DEFAULT_SEED, cases=50, grid=256, tol=1e-10,
)
def _qc_classification(ctx: ScenarioContext) -> None:
    dom = GridDomain.square(0, 1.0, ctx["grid"])
    agreements = 0
    for case in range(ctx["cases"]):
        a = _nonzero(ctx)
        ratio = ctx.uniform(0.0, 2.0)
        while abs(ratio - 1.0) < 0.05:
            ratio = ctx.uniform(0.0, 2.0)
        mu = cmath.rect(ratio, ctx.uniform(0, 2 * math.pi))
        f = affine(a, mu * a, ctx.cnormal()) if case % 2 == 0 else exponential(a, mu * a, ctx.cnormal())
        report = qc_certify(f, dom)
        if ctx.expect("verdict_matches_mu", report.verdict == (ratio < 1), case=case, mu=mu, k_hat=report.k_hat):
            agreements += 1
        ctx.check("k_hat", _rel(report.k_hat, ratio), case=case)
    ctx.observe("agreement", f"{agreements}/{ctx['cases']}")

    # |μ| = 1 位于边界上，判定为否
    for case in range(5):
        a = _nonzero(ctx)
        mu = cmath.exp(1j * ctx.uniform(0, 2 * math.pi))
        report = qc_certify(affine(a, mu * a), dom)
        ctx.expect("unit_mu_rejected", not report.verdict, case=case, mu=mu, k_hat=report.k_hat)
        ctx.check("unit_mu_k_hat", _rel(report.k_hat, 1.0), case=case)

    expectations = [
        ("z + 0.5*zbar", True, 0.5), ("zbar + 0.1*z", False, 10.0), ("z", True, 0.0),
        ("z + zbar", False, 1.0), ("exp(i*(z + zbar))", False, 1.0), ("2*z - 2i*zbar", False, 1.0),
    ]
    for source, verdict, k_hat in expectations:
        report = qc_certify(parse(source), dom)
        ctx.expect(f"example {source}", report.verdict == verdict, k_hat=report.k_hat)
        ctx.check(f"example {source}", _rel(report.k_hat, k_hat))
    conjugate = qc_certify(parse("zbar"), dom)
    ctx.expect("zbar_condition_iii", not conjugate.verdict and conjugate.witness_kind == "condition_iii")
    ctx.observe("zbar_report", conjugate.to_dict())
    stretched = qc_certify(stretched_exponential(3.0), dom)
    ctx.check("stretched_exponential", _rel(stretched.k_hat, 0.5))
    ctx.expect("polydisc", polydisc_admissible([1, 2], [0.5, -0.5]) and not polydisc_admissible([1, 2], [0.5, 1.2]))


@scenario(
    "wirtinger",
    "∂_zbar f = μ_f ∂_z f; symbolic ∂_z, ∂_zbar match finite differences; eval is a ring homomorphism",
    reference="Wirtinger 导数与 Beltrami 方程",
    seed=DEFAULT_SEED, trials=50, step=1e-4, tol=1e-6, beltrami_tol=1e-10, grid=16,
)
def _wirtinger(ctx: ScenarioContext) -> None:
    dom = GridDomain.square(0, 1.0, ctx["grid"])
    points = dom.points()
    h = ctx["step"]
    for trial in range(ctx["trials"]):
        f = _random_expr(ctx, 3, 2, 0.5)
        g = _random_expr(ctx, 2, 2, 0.5)
        dx = (evaluate_grid(f, points + h) - evaluate_grid(f, points - h)) / (2 * h)
        dy = (evaluate_grid(f, points + 1j * h) - evaluate_grid(f, points - 1j * h)) / (2 * h)
        dz, dzb = evaluate_grid(d_z(f), points), evaluate_grid(d_zbar(f), points)
        reference = max(1.0, float(np.max(np.abs(dz))), float(np.max(np.abs(dzb))))
        ctx.check("d_z_finite_difference", float(np.max(np.abs(dz - 0.5 * (dx - 1j * dy)))) / reference, trial=trial)
        ctx.check("d_zbar_finite_difference", float(np.max(np.abs(dzb - 0.5 * (dx + 1j * dy)))) / reference,
                  trial=trial)
        z0 = complex(points.flat[int(ctx.rng.integers(0, points.size))])
        ctx.check("homomorphism", _rel(evaluate(mul(f, g), z0), evaluate(f, z0) * evaluate(g, z0)),
                  ctx["beltrami_tol"], trial=trial)

        a, mu = _nonzero(ctx), ctx.in_disc(0.9)
        member = affine(a, mu * a, ctx.cnormal()) if trial % 2 == 0 else exponential(a, mu * a, ctx.cnormal())
        ctx.check("beltrami_residual", beltrami_residual(member, mu, dom), ctx["beltrami_tol"], trial=trial)
        field = mu_grid(member, dom)
        ctx.check("grid_matches_exact", float(np.max(np.abs(field.field[~field.mask] - mu))) / max(1.0, abs(mu)),
                  ctx["beltrami_tol"], trial=trial)

    offset = GridDomain(0.1, 1.0, 0.1, 1.0, ctx["grid"], ctx["grid"])
    field = mu_grid(parse("z*zbar"), offset)
    z = offset.points()
    ctx.check("zzbar_field", float(np.max(np.abs(field.field - z / np.conj(z)))), ctx["beltrami_tol"])


@scenario(
    "parser-roundtrip",
    "parse(serialize(f)) = f; error positions are exact byte offsets",
    reference="表达式往返与错误位置",
    seed=DEFAULT_SEED, trials=1000, tol=0.0,
)
def _parser_roundtrip(ctx: ScenarioContext) -> None:
    mismatches = 0
    for trial in range(ctx["trials"]):
        f = _random_expr(ctx, 4, 3, 1.0)
        text = serialize(f)
        back = parse(text)
        if back != f:
            mismatches += 1
            ctx.expect("roundtrip", False, trial=trial, source=text)
        ctx.expect("serialize_idempotent", serialize(back) == text, trial=trial, source=text)
    ctx.check("roundtrip_mismatches", mismatches)

    cases = [("2z", 1), ("z + $", 4), ("exp(z*z)", 4), ("z +", 3), ("(z", 2), ("z^", 2), ("z^1.5", 2),
             ("zz", 0), ("z**2", 2), ("z^65", 2)]
    for source, position in cases:
        try:
            parse(source)
            found = None
        except ParseError as e:
            found = e.position
        ctx.expect(f"error_position {source}", found == position, expected=position, found=found)

    sample = "2*z^2*zbar + exp(i*0.5*z + i*0.25*zbar) - 3"
    for offset in range(len(sample) + 1):
        try:
            parse(sample[:offset] + "$" + sample[offset:])
            found = None
        except ParseError as e:
            found = e.position
        ctx.expect("inserted_character", found == offset, offset=offset, found=found)

    for source, error in (("exp(z*z)", FamilyViolationError), ("z^65", PowerOverflowError)):
        try:
            parse(source)
            raised = None
        except ParseError as e:
            raised = type(e).__name__
        ctx.expect(f"error_kind {source}", raised == error.__name__, raised=raised)
    ctx.expect("canonical_merge", serialize(parse("z + z")) == "2*z")
    ctx.expect("zero", serialize(parse("z - z")) == "0")
