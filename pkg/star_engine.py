#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Moyal-Weyl 星积引擎

    ⋆ ≡ exp[iħ(←∂_z →∂_zbar − ←∂_zbar →∂_z)]

在封闭函数族上精确重求和：每个 Wirtinger 导数拆成频率部分（乘以 iα 或 iβ）
与只作用于多项式因子的导子。双微分指数因此分解为
    (a) 标量相位 exp(−iħ(α₁β₂ − β₁α₂))
    (b) 多项式因子上的有限导子级数（超过总次数即为零）
截断模式与 ħ 级数系数则按 (∂_z⊗∂_zbar − ∂_zbar⊗∂_z)^k 的二项展开逐项计算，
作为与重求和互相独立的第二条计算路径。
"""

import cmath
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import reduce
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from term_algebra import (
    MAX_DEGREE,
    DegreeBoundError,
    StarExpr,
    Term,
    add,
    canonicalize,
    d_z,
    d_zbar,
    mul,
    scale,
    sub,
)

logger = logging.getLogger(__name__)

BiMonomial = Tuple[int, int, int, int]


class StarOverflowError(ValueError):
    """相位因子溢出"""


@dataclass(frozen=True)
class StarConfig:
    """
    星积配置

    Attributes:
        hbar: 形变参数 ħ（实数）
        truncation_order: 截断阶数；为 None 时计算精确（重求和）星积
    """

    hbar: float = 1.0
    truncation_order: Optional[int] = None

    def __post_init__(self):
        hbar = self.hbar
        if isinstance(hbar, complex):
            if hbar.imag != 0:
                raise ValueError(f"ħ 必须是实数，实际为 {hbar}")
            hbar = hbar.real
        hbar = float(hbar)
        if not math.isfinite(hbar):
            raise ValueError(f"ħ 必须有限，实际为 {hbar}")
        object.__setattr__(self, "hbar", hbar)
        if self.truncation_order is not None and (
            isinstance(self.truncation_order, bool) or int(self.truncation_order) != self.truncation_order
            or self.truncation_order < 0
        ):
            raise ValueError(f"截断阶数必须是非负整数，实际为 {self.truncation_order}")


def phase_kappa(alpha1, beta1, alpha2, beta2):
    """κ = α₁β₂ − β₁α₂（标量或 numpy 数组）"""
    return alpha1 * beta2 - beta1 * alpha2


def _derivation_series(t1: Term, t2: Term, hbar: float) -> Dict[BiMonomial, complex]:
    """
    exp(iħQ) 作用于 z^m1 zbar^n1 ⊗ z^m2 zbar^n2，Q 为去掉标量相位后的导子部分：

        Q = D1z·D2zbar − D1zbar·D2z + iβ₂·D1z + iα₁·D2zbar − iα₂·D1zbar − iβ₁·D2z

    每次作用至少降低一次总次数，故级数有限。
    """
    a1, b1, a2, b2 = t1.freq_z, t1.freq_zbar, t2.freq_z, t2.freq_zbar
    state: Dict[BiMonomial, complex] = {(t1.pow_z, t1.pow_zbar, t2.pow_z, t2.pow_zbar): 1 + 0j}
    total = dict(state)
    k = 0
    while state:
        k += 1
        nxt: Dict[BiMonomial, complex] = defaultdict(complex)
        for (p1, q1, p2, q2), c in state.items():
            if p1 and q2:
                nxt[(p1 - 1, q1, p2, q2 - 1)] += c * p1 * q2
            if q1 and p2:
                nxt[(p1, q1 - 1, p2 - 1, q2)] -= c * q1 * p2
            if p1 and b2 != 0:
                nxt[(p1 - 1, q1, p2, q2)] += c * 1j * b2 * p1
            if q2 and a1 != 0:
                nxt[(p1, q1, p2, q2 - 1)] += c * 1j * a1 * q2
            if q1 and a2 != 0:
                nxt[(p1, q1 - 1, p2, q2)] -= c * 1j * a2 * q1
            if p2 and b1 != 0:
                nxt[(p1, q1, p2 - 1, q2)] -= c * 1j * b1 * p2
        factor = 1j * hbar / k
        state = {key: c * factor for key, c in nxt.items() if c != 0}
        for key, c in state.items():
            total[key] = total.get(key, 0j) + c
    return total


def _star_terms(t1: Term, t2: Term, hbar: float) -> List[Term]:
    if t1.degree + t2.degree > MAX_DEGREE:
        raise DegreeBoundError(t1.degree + t2.degree)
    kappa = phase_kappa(t1.freq_z, t1.freq_zbar, t2.freq_z, t2.freq_zbar)
    try:
        phase = cmath.exp(-1j * hbar * kappa)
    except OverflowError:
        raise StarOverflowError(f"相位 exp(−iħκ) 溢出: ħ = {hbar}, κ = {kappa}") from None
    base = t1.coeff * t2.coeff * phase
    alpha = t1.freq_z + t2.freq_z
    beta = t1.freq_zbar + t2.freq_zbar
    series = _derivation_series(t1, t2, hbar)
    return [Term(base * c, p1 + p2, q1 + q2, alpha, beta) for (p1, q1, p2, q2), c in series.items()]


def star(f: StarExpr, g: StarExpr, cfg: StarConfig = StarConfig()) -> StarExpr:
    """
    精确星积 f ⋆ g

    Args:
        f, g: 封闭族中的表达式
        cfg: 星积配置；带截断阶数时委托给 star_truncated

    Returns:
        StarExpr: 规范化的乘积
    """
    if cfg.truncation_order is not None:
        return star_truncated(f, g, cfg.hbar, cfg.truncation_order)
    if cfg.hbar == 0:
        return mul(f, g)
    raw = [piece for t1 in f.terms for t2 in g.terms for piece in _star_terms(t1, t2, cfg.hbar)]
    logger.debug(f"星积展开: {len(f)} × {len(g)} 个项对 → {len(raw)} 个原始项")
    return canonicalize(raw)


def _derivative_tower(f: StarExpr, order: int) -> Dict[Tuple[int, int], StarExpr]:
    """tower[(a, b)] = ∂_z^a ∂_zbar^b f，a + b <= order"""
    tower = {(0, 0): f}
    for a in range(order + 1):
        if a:
            tower[(a, 0)] = d_z(tower[(a - 1, 0)])
        for b in range(1, order - a + 1):
            tower[(a, b)] = d_zbar(tower[(a, b - 1)])
    return tower


def hbar_series(f: StarExpr, g: StarExpr, order: int) -> List[StarExpr]:
    """
    ħ 展开系数 [F^(0), ..., F^(order)]

    F^(k) = (i^k / k!) Σ_j C(k, j) (−1)^j (∂_z^{k−j} ∂_zbar^j f)(∂_zbar^{k−j} ∂_z^j g)
    """
    if order < 0:
        raise ValueError(f"阶数必须非负，实际为 {order}")
    tower_f = _derivative_tower(f, order)
    tower_g = _derivative_tower(g, order)
    coefficients = []
    for k in range(order + 1):
        raw: List[Term] = []
        for j in range(k + 1):
            weight = math.comb(k, j) * (-1) ** j
            product = mul(tower_f[(k - j, j)], tower_g[(j, k - j)])
            raw.extend(term.with_coeff(term.coeff * weight) for term in product.terms)
        coefficients.append(scale(canonicalize(raw), 1j ** k / math.factorial(k)))
    return coefficients


def hbar_coefficient(f: StarExpr, g: StarExpr, k: int) -> StarExpr:
    """ħ^k 的精确系数 F^(k)"""
    return hbar_series(f, g, k)[k]


def star_truncated(f: StarExpr, g: StarExpr, hbar: float, order: int) -> StarExpr:
    """部分和 Σ_{k<=order} ħ^k F^(k)"""
    coefficients = hbar_series(f, g, order)
    result = coefficients[0]
    for k, coefficient in enumerate(coefficients[1:], start=1):
        result = add(result, scale(coefficient, hbar ** k))
    return result


def poisson_bracket(f: StarExpr, g: StarExpr) -> StarExpr:
    """{f, g} = ∂_z f ∂_zbar g − ∂_zbar f ∂_z g"""
    return sub(mul(d_z(f), d_zbar(g)), mul(d_zbar(f), d_z(g)))


def star_n(fs: Sequence[StarExpr], cfg: StarConfig = StarConfig()) -> StarExpr:
    """f₁ ⋆ f₂ ⋆ ··· ⋆ f_n，从左到右折叠"""
    if not fs:
        raise ValueError("star_n 需要至少一个因子")
    return reduce(lambda left, right: star(left, right, cfg), fs)


def star_commutator(f: StarExpr, g: StarExpr, cfg: StarConfig = StarConfig()) -> StarExpr:
    """f ⋆ g − g ⋆ f"""
    return sub(star(f, g, cfg), star(g, f, cfg))


def quantum_correction(f: StarExpr, g: StarExpr, cfg: StarConfig = StarConfig()) -> StarExpr:
    """f ⋆ g − f g，形变量子化带来的全部修正"""
    return sub(star(f, g, cfg), mul(f, g))


def star_exponential_batch(alphas: Sequence, betas: Sequence, hbar: float):
    """
    指数因子 exp(i(α_j z + β_j zbar)) 的左折叠星积，支持 numpy 广播

    Returns:
        (A, B, log_phase): 结果为 exp(log_phase) · exp(i(A z + B zbar))
    """
    if len(alphas) != len(betas) or not alphas:
        raise ValueError("alphas 与 betas 必须等长且非空")
    total_alpha = alphas[0]
    total_beta = betas[0]
    log_phase = np.zeros(np.broadcast(total_alpha, total_beta).shape, dtype=complex)
    for alpha, beta in zip(alphas[1:], betas[1:]):
        log_phase = log_phase - 1j * hbar * phase_kappa(total_alpha, total_beta, alpha, beta)
        total_alpha = total_alpha + alpha
        total_beta = total_beta + beta
    return total_alpha, total_beta, log_phase


def truncation_bound(w: complex, order: int) -> float:
    """
    exp(w) 的 N 阶 Taylor 余项上界 |w|^{N+1}/(N+1)! · max(1, e^{Re w})
    w 为纯虚数（κ 为实数）时即 |ħκ|^{N+1}/(N+1)!
    """
    magnitude = abs(w)
    if magnitude == 0:
        return 0.0
    log_bound = (order + 1) * math.log(magnitude) - math.lgamma(order + 2) + max(0.0, w.real)
    return math.exp(log_bound)
