#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Beltrami 系数空间中的多变量 Cauchy 积分

指数族的 n 重星积 F 在 z0 处作为 (μ₁, ..., μ_n) 的函数是整函数（β_j = μ_j α_j）。
本模块用圆周上的周期梯形公式做逐轴 Cauchy 积分，复现 F 及其偏导数，
并用复差分模板检验 μ 空间中的 Cauchy-Riemann 条件。
"""

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from star_engine import StarConfig, star_exponential_batch, star_n
from term_algebra import evaluate, exponential

logger = logging.getLogger(__name__)

MAX_VARIABLES = 3
MIN_NODES = 16
DEFAULT_NODES = 128


class ContourError(ValueError):
    """积分路径不满足前提条件"""


class MuFunctionError(ValueError):
    """MuFunction 参数无效"""


@dataclass(frozen=True)
class ContourSpec:
    """
    圆周积分路径 ζ = center + radius · e^{iθ}

    Attributes:
        center: 圆心
        radius: 半径（> 0）
        nodes: 梯形公式节点数（>= 16）
    """

    center: complex = 0j
    radius: float = 2.0
    nodes: int = DEFAULT_NODES

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ContourError(f"半径必须为正，实际为 {self.radius}")
        if self.nodes < MIN_NODES:
            raise ContourError(f"节点数至少为 {MIN_NODES}，实际为 {self.nodes}")

    def encloses(self, mu: complex) -> bool:
        return abs(complex(mu) - self.center) < self.radius

    def nodes_and_weights(self, mu: complex, order: int = 0) -> Tuple[np.ndarray, np.ndarray]:
        """节点 ζ_k 与权重 (ζ_k − c)/N / (ζ_k − μ)^{m+1}"""
        theta = 2 * np.pi * np.arange(self.nodes) / self.nodes
        offsets = self.radius * np.exp(1j * theta)
        zeta = self.center + offsets
        return zeta, offsets / self.nodes / (zeta - mu) ** (order + 1)


@dataclass(frozen=True)
class MuFunction:
    """
    F(μ₁, ..., μ_n)：指数因子 exp(i(α_j z + μ_j α_j zbar)) 的 n 重星积在 z0 处的值

    Attributes:
        alphas: 非零频率 α₁..α_n
        z0: 求值点
        hbar: 形变参数
    """

    alphas: Tuple[complex, ...]
    z0: complex = 0j
    hbar: float = 1.0

    def __post_init__(self):
        alphas = tuple(complex(a) for a in self.alphas)
        if not alphas:
            raise MuFunctionError("至少需要一个频率")
        if any(a == 0 for a in alphas):
            raise MuFunctionError(f"所有 α_j 必须非零，实际为 {alphas}")
        if not all(math.isfinite(abs(a)) for a in alphas):
            raise MuFunctionError(f"α_j 必须有限: {alphas}")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "z0", complex(self.z0))
        object.__setattr__(self, "hbar", float(self.hbar))

    @property
    def n(self) -> int:
        return len(self.alphas)

    def __call__(self, mus: Sequence) -> np.ndarray:
        """对可广播的 μ 数组向量化求值"""
        self.check_arity(mus)
        betas = [np.asarray(mu) * alpha for mu, alpha in zip(mus, self.alphas)]
        total_alpha, total_beta, log_phase = star_exponential_batch(list(self.alphas), betas, self.hbar)
        return np.exp(log_phase + 1j * (total_alpha * self.z0 + total_beta * self.z0.conjugate()))

    def check_arity(self, mus: Sequence) -> None:
        if len(mus) != self.n:
            raise MuFunctionError(f"需要 {self.n} 个 μ，实际为 {len(mus)}")


def mu_function_eval(mf: MuFunction, mus: Sequence[complex]) -> complex:
    """经由星积引擎精确构造 F 后在 z0 处求值"""
    mf.check_arity(mus)
    factors = [exponential(alpha, complex(mu) * alpha) for alpha, mu in zip(mf.alphas, mus)]
    return evaluate(star_n(factors, StarConfig(mf.hbar)), mf.z0)


def log_derivatives(mf: MuFunction) -> List[complex]:
    """g_j = i[α_j zbar0 + ħ(Σ_{k>j} α_j α_k − Σ_{k<j} α_k α_j)]，∂F/∂μ_j = g_j F"""
    zbar0 = mf.z0.conjugate()
    result = []
    for j, alpha in enumerate(mf.alphas):
        later = sum(alpha * other for other in mf.alphas[j + 1:])
        earlier = sum(other * alpha for other in mf.alphas[:j])
        result.append(1j * (alpha * zbar0 + mf.hbar * (later - earlier)))
    return result


def normal_ordered_value(mf: MuFunction, mus: Sequence[complex]) -> complex:
    """正规序闭式 e^{iΣα_j z0} Π_j e^{g_j μ_j}"""
    mf.check_arity(mus)
    exponent = 1j * sum(mf.alphas) * mf.z0
    exponent += sum(g * complex(mu) for g, mu in zip(log_derivatives(mf), mus))
    return cmath.exp(exponent)


def analytic_derivative(mf: MuFunction, mus: Sequence[complex], orders: Sequence[int]) -> complex:
    """∂^{m₁+...+m_n} F / ∂μ₁^{m₁}···∂μ_n^{m_n} = Π_j g_j^{m_j} · F"""
    mf.check_arity(orders)
    value = normal_ordered_value(mf, mus)
    for g, m in zip(log_derivatives(mf), orders):
        value *= g ** m
    return value


def default_contours(mus: Sequence[complex], nodes: int = DEFAULT_NODES) -> List[ContourSpec]:
    """以 0 为圆心、半径 2·max(1, |μ_j|) 的圆周"""
    return [ContourSpec(0j, 2.0 * max(1.0, abs(complex(mu))), nodes) for mu in mus]


def cauchy_integral(
    func: Callable[[List[np.ndarray]], np.ndarray],
    mus: Sequence[complex],
    contours: Sequence[ContourSpec],
    orders: Optional[Sequence[int]] = None,
) -> complex:
    """
    逐轴梯形公式计算 (Π m_j!) ∮···∮ func(ζ) / Π(ζ_j − μ_j)^{m_j+1} Π dζ_j/(2πi)

    Args:
        func: 接受 n 个同形状复数数组、返回同形状数组的函数
        mus: 目标点
        contours: 每个变量的积分圆周
        orders: 各变量的求导阶数，缺省为 0

    Raises:
        ContourError: 变量数超过 3、数量不一致，或目标点不在圆周内部
    """
    n = len(mus)
    orders = [0] * n if orders is None else list(orders)
    if not 1 <= n <= MAX_VARIABLES:
        raise ContourError(f"变量数必须在 1..{MAX_VARIABLES} 之间，实际为 {n}")
    if len(contours) != n or len(orders) != n:
        raise ContourError(f"contours / orders 数量必须与变量数 {n} 一致")
    if any(m < 0 for m in orders):
        raise ContourError(f"求导阶数必须非负: {orders}")

    nodes, weights = [], []
    for j, (mu, contour, m) in enumerate(zip(mus, contours, orders)):
        if not contour.encloses(mu):
            raise ContourError(
                f"μ_{j + 1} = {complex(mu)} 不在圆周 |ζ − {contour.center}| = {contour.radius} 内部"
            )
        zeta, weight = contour.nodes_and_weights(complex(mu), m)
        nodes.append(zeta)
        weights.append(weight)

    grids = np.meshgrid(*nodes, indexing="ij")
    values = np.asarray(func(grids), dtype=complex)
    logger.debug(f"Cauchy 积分: {n} 个变量, {values.size} 个节点")
    for weight in weights:
        values = np.tensordot(weight, values, axes=([0], [0]))
    factorial = math.prod(math.factorial(m) for m in orders)
    return complex(values) * factorial


def cauchy_reproduce(
    mf: MuFunction,
    mus: Sequence[complex],
    contours: Optional[Sequence[ContourSpec]] = None,
) -> complex:
    """Cauchy 积分复现 F(μ₁, ..., μ_n)"""
    mf.check_arity(mus)
    contours = default_contours(mus) if contours is None else contours
    return cauchy_integral(mf, mus, contours)


def cauchy_derivative(
    mf: MuFunction,
    mus: Sequence[complex],
    orders: Sequence[int],
    contours: Optional[Sequence[ContourSpec]] = None,
) -> complex:
    """Cauchy 积分公式计算偏导数 ∂^{m} F"""
    mf.check_arity(mus)
    contours = default_contours(mus) if contours is None else contours
    return cauchy_integral(mf, mus, contours, orders)


def _shifted(mus: Sequence[complex], j: int, delta: complex) -> List[complex]:
    shifted = [complex(mu) for mu in mus]
    shifted[j] += delta
    return shifted


def _wirtinger_stencil(func: Callable[[List[complex]], complex], mus, j: int, step: float, conjugate: bool) -> complex:
    """4 点模板: ∂_μ = ½(D_x − i D_y), ∂_μbar = ½(D_x + i D_y)"""
    dx = (func(_shifted(mus, j, step)) - func(_shifted(mus, j, -step))) / (2 * step)
    dy = (func(_shifted(mus, j, 1j * step)) - func(_shifted(mus, j, -1j * step))) / (2 * step)
    return 0.5 * (dx + 1j * dy) if conjugate else 0.5 * (dx - 1j * dy)


def _check_index(mf: MuFunction, mus, index: int, step: float) -> None:
    mf.check_arity(mus)
    if not 0 <= index < mf.n:
        raise MuFunctionError(f"变量下标 {index} 超出范围 0..{mf.n - 1}")
    if not step > 0:
        raise ValueError(f"步长必须为正，实际为 {step}")


def cr_residual(mf: MuFunction, mus: Sequence[complex], j: int, step: float = 1e-4) -> float:
    """|∂F/∂μbar_j|，F 关于 μ_j 全纯时应为零"""
    _check_index(mf, mus, j, step)
    return abs(_wirtinger_stencil(lambda point: mu_function_eval(mf, point), mus, j, step, conjugate=True))


def cr_residual_second(mf: MuFunction, mus: Sequence[complex], j: int, k: int, step: float = 1e-4) -> float:
    """|∂_{μ_j} ∂_{μbar_k} F|，两个模板复合（16 次求值）"""
    _check_index(mf, mus, j, step)
    _check_index(mf, mus, k, step)

    def inner(point):
        return _wirtinger_stencil(lambda p: complex(mf(p)), point, k, step, conjugate=True)

    return abs(_wirtinger_stencil(inner, mus, j, step, conjugate=False))
