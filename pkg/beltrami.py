#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Beltrami 系数与拟共形判定

- mu_exact / mu_grid: 精确常数 μ 与网格上的逐点 μ = ∂_zbar f / ∂_z f
- qc_certify: 按拟共形定义的微分条件在网格上给出判定（sup 比值、∂_z f ≠ 0、平方可积）
- conformal_pullback_check: |μ| 在共形映射下的不变性
- transform_mu / align_mu: μ 的旋转与伸缩
"""

import cmath
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from term_algebra import (
    EvaluationOverflowError,
    StarExpr,
    Term,
    canonicalize,
    coefficient_of,
    d_z,
    d_zbar,
    evaluate_grid,
    exponential,
    is_affine,
    is_close,
    is_exponential_family,
    leading_term,
    mul,
    scale,
)

logger = logging.getLogger(__name__)

# |∂_z f| <= MASK_REL_TOL · max|∂_z f| 视为零点
MASK_REL_TOL = 1e-12
DEFAULT_K_THRESHOLD = 1 - 1e-9
DEFAULT_GRID = 256
MIN_GRID = 8

HOMEOMORPHISM_NOTE = "仅检验微分条件与平方可积性，未检验映射是否为同胚"


class BeltramiUndefinedError(ValueError):
    """∂_z f 恒为零，Beltrami 方程无定义"""


class DegenerateGridError(ValueError):
    """网格上所有点都被屏蔽"""


class PatternError(ValueError):
    """表达式不属于可识别的常数 μ 模式"""


class MuBoundError(ValueError):
    """变换后 |μ| >= 1，超出拟共形范围"""


class ConformalDomainError(ValueError):
    """共形映射在区域内不满足全纯单射条件"""


@dataclass(frozen=True)
class GridDomain:
    """
    z 平面上的矩形采样区域

    Attributes:
        re_min, re_max, im_min, im_max: 区域边界
        nx, ny: 实部、虚部方向的采样点数（>= 8）
    """

    re_min: float = -1.0
    re_max: float = 1.0
    im_min: float = -1.0
    im_max: float = 1.0
    nx: int = DEFAULT_GRID
    ny: int = DEFAULT_GRID

    def __post_init__(self):
        bounds = (self.re_min, self.re_max, self.im_min, self.im_max)
        if not all(math.isfinite(v) for v in bounds):
            raise ValueError(f"网格边界必须有限: {bounds}")
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError(f"网格边界无效: re [{self.re_min}, {self.re_max}], im [{self.im_min}, {self.im_max}]")
        if self.nx < MIN_GRID or self.ny < MIN_GRID:
            raise ValueError(f"网格分辨率至少为 {MIN_GRID}，实际为 {self.nx} × {self.ny}")

    @classmethod
    def square(cls, center: complex = 0j, half_width: float = 1.0, n: int = DEFAULT_GRID) -> "GridDomain":
        center = complex(center)
        return cls(center.real - half_width, center.real + half_width,
                   center.imag - half_width, center.imag + half_width, n, n)

    def with_resolution(self, n: int) -> "GridDomain":
        return GridDomain(self.re_min, self.re_max, self.im_min, self.im_max, n, n)

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.linspace(self.re_min, self.re_max, self.nx), np.linspace(self.im_min, self.im_max, self.ny)

    def points(self) -> np.ndarray:
        """形状为 (ny, nx) 的复数网格"""
        xs, ys = self.axes()
        x, y = np.meshgrid(xs, ys)
        return x + 1j * y

    def contains(self, z: complex) -> bool:
        return self.re_min <= z.real <= self.re_max and self.im_min <= z.imag <= self.im_max


@dataclass(eq=False)
class BeltramiValue:
    """精确常数 μ 或网格上的逐点 μ 场"""

    kind: str
    value: Optional[complex] = None
    field: Optional[np.ndarray] = None
    mask: Optional[np.ndarray] = None
    domain: Optional[GridDomain] = None

    @property
    def is_exact(self) -> bool:
        return self.kind == "exact_constant"


@dataclass
class QCReport:
    """拟共形判定报告"""

    k_hat: float
    dz_nonvanishing: bool
    l2_dz: float
    l2_dzbar: float
    verdict: bool
    witness: Optional[complex]
    witness_kind: str
    k_threshold: float
    note: str = HOMEOMORPHISM_NOTE

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["witness"] = None if self.witness is None else [self.witness.real, self.witness.imag]
        return data


# ---------------------------------------------------------------------------
# μ 的计算
# ---------------------------------------------------------------------------

def mu_exact(f: StarExpr) -> Optional[BeltramiValue]:
    """
    精确 Beltrami 系数

    当 ∂_zbar f = μ ∂_z f 对某个常数 μ 作为规范表达式成立时返回该常数，
    覆盖仿射 (b/a)、单指数 (β/α) 以及同频指数乘积 ((Σβ)/(Σα))。

    Returns:
        BeltramiValue 或 None（μ 不是常数）

    Raises:
        BeltramiUndefinedError: ∂_z f 恒为零
    """
    dz = d_z(f)
    if dz.is_zero:
        raise BeltramiUndefinedError("∂_z f ≡ 0，Beltrami 方程无定义（a = 0 或 α = 0）")
    dzb = d_zbar(f)
    if dzb.is_zero:
        return BeltramiValue("exact_constant", value=0j)
    pivot = leading_term(dz)
    mu = coefficient_of(dzb, pivot) / pivot.coeff
    if mu == 0 or not is_close(dzb, scale(dz, mu)):
        return None
    return BeltramiValue("exact_constant", value=mu)


def _derivative_fields(f: StarExpr, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return evaluate_grid(d_z(f), points), evaluate_grid(d_zbar(f), points)


def _zero_mask(magnitude: np.ndarray) -> np.ndarray:
    peak = float(np.max(magnitude)) if magnitude.size else 0.0
    return magnitude <= MASK_REL_TOL * peak


def mu_grid(f: StarExpr, dom: GridDomain) -> BeltramiValue:
    """
    网格上的逐点 Beltrami 系数，|∂_z f| 低于阈值的点被屏蔽（值为 nan）

    Raises:
        DegenerateGridError: 所有点都被屏蔽
    """
    dz_vals, dzb_vals = _derivative_fields(f, dom.points())
    mask = _zero_mask(np.abs(dz_vals))
    if mask.all():
        raise DegenerateGridError(f"∂_z f 在整个网格上为零（{dom.nx} × {dom.ny}）")
    if mask.any():
        logger.warning(f"μ 网格: {int(mask.sum())} 个点因 ∂_z f ≈ 0 被屏蔽")
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(mask, np.nan + 0j, dzb_vals / np.where(mask, 1, dz_vals))
    return BeltramiValue("pointwise_field", field=values, mask=mask, domain=dom)


def beltrami_residual(f: StarExpr, mu: complex, dom: GridDomain) -> float:
    """max |∂_zbar f − μ ∂_z f| / max|∂_z f|，未屏蔽点上的 Beltrami 方程残差"""
    dz_vals, dzb_vals = _derivative_fields(f, dom.points())
    magnitude = np.abs(dz_vals)
    mask = _zero_mask(magnitude)
    if mask.all():
        raise DegenerateGridError("∂_z f 在整个网格上为零")
    residual = np.abs(dzb_vals - mu * dz_vals)[~mask]
    return float(residual.max() / magnitude.max())


def bracket_from_mu(f1: StarExpr, f2: StarExpr) -> StarExpr:
    """(μ₂ − μ₁) ∂_z f₁ ∂_z f₂，常数 μ 情形下 Poisson 括号的 μ 形式"""
    mu1 = _require_exact(f1)
    mu2 = _require_exact(f2)
    return scale(mul(d_z(f1), d_z(f2)), mu2 - mu1)


def _require_exact(f: StarExpr) -> complex:
    value = mu_exact(f)
    if value is None:
        raise PatternError("表达式的 Beltrami 系数不是常数")
    return value.value


# ---------------------------------------------------------------------------
# 拟共形判定
# ---------------------------------------------------------------------------

def _trapezoid_2d(values: np.ndarray, dom: GridDomain) -> float:
    xs, ys = dom.axes()
    return float(np.trapezoid(np.trapezoid(values, x=xs, axis=1), x=ys))


def qc_certify(f: StarExpr, dom: GridDomain = GridDomain(), k_threshold: float = DEFAULT_K_THRESHOLD) -> QCReport:
    """
    在网格上检验拟共形条件

    Args:
        f: 待检验的表达式
        dom: 采样区域
        k_threshold: sup 比值上限，0 <= k_threshold < 1

    Returns:
        QCReport: verdict = (k_hat < k_threshold) ∧ ∂_z f 无零点 ∧ 两个积分有限
    """
    if not 0 <= k_threshold < 1:
        raise ValueError(f"k_threshold 必须满足 0 <= k < 1，实际为 {k_threshold}")
    points = dom.points()
    try:
        dz_vals, dzb_vals = _derivative_fields(f, points)
    except EvaluationOverflowError as e:
        logger.warning(f"拟共形判定: 求值溢出 {e}")
        return QCReport(math.inf, False, math.inf, math.inf, False, e.point, "overflow", k_threshold)

    dz_mag = np.abs(dz_vals)
    dzb_mag = np.abs(dzb_vals)
    mask = _zero_mask(dz_mag)
    dz_nonvanishing = not mask.any()

    if mask.all():
        k_hat = math.inf
    else:
        ratio = np.where(mask, -np.inf, dzb_mag / np.where(mask, 1, dz_mag))
        k_hat = float(ratio.max())

    if not dz_nonvanishing:
        index = int(np.argmax(mask.ravel()))
        witness_kind = "condition_iii"
    else:
        index = int(np.argmax(ratio.ravel()))
        witness_kind = "sup_ratio"
    witness = complex(points.flat[index])

    l2_dz = _trapezoid_2d(dz_mag ** 2, dom)
    l2_dzbar = _trapezoid_2d(dzb_mag ** 2, dom)
    verdict = bool(
        k_hat < k_threshold and dz_nonvanishing and math.isfinite(l2_dz) and math.isfinite(l2_dzbar)
    )
    logger.info(f"拟共形判定: k_hat = {k_hat:.6g}, ∂_z f 无零点 = {dz_nonvanishing}, 结论 = {verdict}")
    return QCReport(k_hat, dz_nonvanishing, l2_dz, l2_dzbar, verdict, witness, witness_kind, k_threshold)


# ---------------------------------------------------------------------------
# 共形映射目录
# ---------------------------------------------------------------------------

class ConformalMap(ABC):
    """目录中的共形映射：值、导数与区域检验"""

    name = "conformal"

    @abstractmethod
    def value(self, z: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def derivative(self, z: np.ndarray) -> np.ndarray:
        ...

    def validate(self, dom: GridDomain) -> None:
        """映射在 dom 上全纯单射且导数非零，否则抛出 ConformalDomainError"""

    def __call__(self, z):
        return self.value(z)


class IdentityMap(ConformalMap):
    name = "identity"

    def value(self, z):
        return np.asarray(z, dtype=complex)

    def derivative(self, z):
        return np.ones_like(np.asarray(z, dtype=complex))


@dataclass
class TranslationMap(ConformalMap):
    shift: complex = 0j
    name = "translation"

    def value(self, z):
        return np.asarray(z, dtype=complex) + self.shift

    def derivative(self, z):
        return np.ones_like(np.asarray(z, dtype=complex))


@dataclass
class ScalingMap(ConformalMap):
    factor: complex = 1 + 0j
    name = "scaling"

    def __post_init__(self):
        if self.factor == 0:
            raise ConformalDomainError("缩放因子不能为 0")

    def value(self, z):
        return self.factor * np.asarray(z, dtype=complex)

    def derivative(self, z):
        return np.full(np.shape(z), complex(self.factor))


@dataclass
class MobiusMap(ConformalMap):
    """φ(z) = (a z + b) / (c z + d)，ad − bc ≠ 0"""

    a: complex = 1 + 0j
    b: complex = 0j
    c: complex = 0j
    d: complex = 1 + 0j
    name = "mobius"

    def __post_init__(self):
        if self.a * self.d - self.b * self.c == 0:
            raise ConformalDomainError(f"Möbius 映射退化: ad − bc = 0 (a={self.a}, b={self.b}, c={self.c}, d={self.d})")

    @property
    def pole(self) -> Optional[complex]:
        return None if self.c == 0 else complex(-self.d / self.c)

    def value(self, z):
        z = np.asarray(z, dtype=complex)
        return (self.a * z + self.b) / (self.c * z + self.d)

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return (self.a * self.d - self.b * self.c) / (self.c * z + self.d) ** 2

    def validate(self, dom):
        pole = self.pole
        if pole is not None and dom.contains(pole):
            raise ConformalDomainError(f"Möbius 映射的极点 {pole} 位于区域内")


@dataclass
class ExpStripMap(ConformalMap):
    """φ(z) = exp(z)，在虚部宽度小于 2π 的水平带上单射"""

    name = "exp-strip"

    def value(self, z):
        return np.exp(np.asarray(z, dtype=complex))

    def derivative(self, z):
        return np.exp(np.asarray(z, dtype=complex))

    def validate(self, dom):
        width = dom.im_max - dom.im_min
        if width >= 2 * math.pi:
            raise ConformalDomainError(f"exp 映射要求虚部宽度 < 2π，实际为 {width:.6g}")


CONFORMAL_CATALOG = {
    "identity": IdentityMap,
    "translation": TranslationMap,
    "scaling": ScalingMap,
    "mobius": MobiusMap,
    "exp-strip": ExpStripMap,
}


def conformal_map(name: str, **params) -> ConformalMap:
    """按名称构造目录中的共形映射"""
    try:
        cls = CONFORMAL_CATALOG[name]
    except KeyError:
        raise ValueError(f"未知的共形映射 '{name}'，可选: {', '.join(CONFORMAL_CATALOG)}") from None
    return cls(**params)


def _stencil_wirtinger(func, points: np.ndarray, step: float) -> Tuple[np.ndarray, np.ndarray]:
    """4 点差分: ∂_z = ½(D_x − i D_y), ∂_zbar = ½(D_x + i D_y)"""
    dx = (func(points + step) - func(points - step)) / (2 * step)
    dy = (func(points + 1j * step) - func(points - 1j * step)) / (2 * step)
    return 0.5 * (dx - 1j * dy), 0.5 * (dx + 1j * dy)


def conformal_pullback_check(
    f: StarExpr,
    phi: ConformalMap,
    dom: GridDomain,
    method: str = "chain",
    step: float = 1e-5,
) -> float:
    """
    max over grid | |μ(f∘φ)|(z) − |μ_f|(φ(z)) |

    Args:
        f: 族中的表达式
        phi: 目录中的共形映射
        dom: 采样区域
        method: "chain"（链式法则）或 "stencil"（对 f∘φ 做 4 点差分）
        step: stencil 步长

    Raises:
        ConformalDomainError: φ 在区域内有极点或不单射
    """
    phi.validate(dom)
    points = dom.points()
    mapped = phi.value(points)
    dz_f = d_z(f)
    dzb_f = d_zbar(f)
    fz_at = evaluate_grid(dz_f, mapped)
    fzb_at = evaluate_grid(dzb_f, mapped)

    if method == "chain":
        dphi = phi.derivative(points)
        comp_dz = fz_at * dphi
        comp_dzb = fzb_at * np.conj(dphi)
    elif method == "stencil":
        comp_dz, comp_dzb = _stencil_wirtinger(lambda p: evaluate_grid(f, phi.value(p)), points, step)
    else:
        raise ValueError(f"未知的方法 '{method}'，可选 chain / stencil")

    exact = mu_exact(f)
    with np.errstate(divide="ignore", invalid="ignore"):
        if exact is not None:
            reference = np.full(points.shape, abs(exact.value))
        else:
            reference = np.abs(fzb_at / fz_at)
        pulled = np.abs(comp_dzb / comp_dz)
    mask = _zero_mask(np.abs(comp_dz)) | ~np.isfinite(reference)
    if mask.all():
        raise DegenerateGridError("复合映射的 ∂_z 在整个网格上为零")
    residual = float(np.max(np.abs(pulled - reference)[~mask]))
    logger.debug(f"共形不变性 [{phi.name}/{method}]: 残差 = {residual:.3e}")
    return residual


# ---------------------------------------------------------------------------
# μ 的旋转与伸缩
# ---------------------------------------------------------------------------

def _exponential_mu(f: StarExpr) -> Optional[complex]:
    """指数族中每一项 β/α 相同时返回该公共值"""
    if f.is_zero or not is_exponential_family(f):
        return None
    if any(term.freq_z == 0 for term in f.terms):
        return None
    ratios = [term.freq_zbar / term.freq_z for term in f.terms]
    if all(abs(r - ratios[0]) <= 1e-12 * max(1.0, abs(ratios[0])) for r in ratios):
        return ratios[0]
    return None


def transform_mu(f: StarExpr, theta: float, lam: float, strict: bool = True) -> StarExpr:
    """
    μ → e^{iθ} λ μ：仿射族中 b ↦ e^{iθ}λb，指数族中 β ↦ e^{iθ}λβ

    Args:
        f: 仿射（a ≠ 0）或公共 μ 的指数族表达式
        theta: 旋转角
        lam: 伸缩因子，λ > 0
        strict: 为 True 时 |μ'| >= 1 抛出 MuBoundError，否则仅记录警告

    Raises:
        PatternError: 不属于可识别的模式
        MuBoundError: 变换后 |μ| >= 1
    """
    if not lam > 0:
        raise ValueError(f"伸缩因子必须为正，实际为 {lam}")
    factor = cmath.exp(1j * theta) * lam

    if is_affine(f):
        a = coefficient_of(f, Term(1, 1, 0))
        if a == 0:
            raise PatternError("仿射表达式的 z 系数为 0，μ 无定义")
        mu = coefficient_of(f, Term(1, 0, 1)) / a
        raw = [term.with_coeff(term.coeff * factor) if term.pow_zbar == 1 else term for term in f.terms]
    else:
        mu = _exponential_mu(f)
        if mu is None:
            raise PatternError("表达式既不是仿射也不是公共 μ 的指数族")
        raw = [Term(term.coeff, 0, 0, term.freq_z, term.freq_zbar * factor) for term in f.terms]

    new_mu = factor * mu
    if abs(new_mu) >= 1:
        message = f"变换后 |μ| = {abs(new_mu):.6g} >= 1（要求 0 < λ < 1/|μ|）"
        if strict:
            raise MuBoundError(message)
        logger.warning(message)
    return canonicalize(raw)


def align_mu(f: StarExpr, target_mu: complex, strict: bool = True) -> StarExpr:
    """旋转并伸缩 μ_f 使其等于 target_mu"""
    current = _require_exact(f)
    if current == 0 or target_mu == 0:
        raise PatternError("μ = 0 无法通过旋转与伸缩对齐")
    ratio = complex(target_mu) / current
    return transform_mu(f, cmath.phase(ratio), abs(ratio), strict=strict)


def stretched_exponential(K: float) -> StarExpr:
    """e^{iz} 复合仿射拉伸 z ↦ ((K+1)z + (K−1)zbar)/2，μ = (K−1)/(K+1)"""
    if K < 1:
        raise ValueError(f"拉伸系数 K 必须 >= 1，实际为 {K}")
    return exponential((K + 1) / 2, (K - 1) / 2)


def polydisc_admissible(alphas: Sequence[complex], mus: Sequence[complex]) -> bool:
    """每个 |μ_j| < 1 且复合 |Σμ_jα_j / Σα_j| < 1"""
    if len(alphas) != len(mus) or not alphas:
        raise ValueError("alphas 与 mus 必须等长且非空")
    if any(abs(mu) >= 1 for mu in mus):
        return False
    total_alpha = sum(alphas)
    if total_alpha == 0:
        return False
    composite = sum(mu * alpha for mu, alpha in zip(mus, alphas)) / total_alpha
    return abs(composite) < 1
