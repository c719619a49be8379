#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
星积封闭函数族的项代数

函数族的每个生成元（规范项）为
    c · z^m · zbar^n · exp(i(α z + β zbar))
StarExpr 是规范化之后的有限项和。本模块提供逐点的加法、乘法、复共轭、
Wirtinger 导数 ∂_z / ∂_zbar、实坐标导数 ∂_x / ∂_y，以及标量与网格求值。

所有值在构造后不可变，所有运算都是纯函数。
"""

import cmath
import logging
import math
import operator
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

# 允许的最高总次数 m + n
MAX_DEGREE = 64
# 频率合并容差：|a - b| <= FREQ_MERGE_TOL * max(1, |a|, |b|)
FREQ_MERGE_TOL = 1e-12
# 系数剪枝阈值（相对于参与规范化的最大系数模）
ZERO_PRUNE_TOL = 1e-14

Scalar = Union[int, float, complex]


class NonFiniteTermError(ValueError):
    """规范化时遇到非有限的系数或频率"""

    def __init__(self, index: int, term: "Term"):
        self.index = index
        self.term = term
        super().__init__(f"第 {index} 个项包含非有限数值: {term!r}")


class DegreeBoundError(ValueError):
    """项的总次数 m + n 超过 MAX_DEGREE"""

    def __init__(self, degree: int):
        self.degree = degree
        super().__init__(f"总次数 {degree} 超过上限 {MAX_DEGREE}")


class EvaluationOverflowError(ValueError):
    """求值溢出，携带量级最大的项"""

    def __init__(self, term_index: int, term: "Term", point: Optional[complex] = None):
        self.term_index = term_index
        self.term = term
        self.point = point
        where = f"（z = {point}）" if point is not None else ""
        super().__init__(f"求值溢出{where}，主导项为第 {term_index} 项: {term!r}")


def _is_finite(value: complex) -> bool:
    return math.isfinite(value.real) and math.isfinite(value.imag)


def complex_sort_key(value: complex) -> Tuple[float, float]:
    """复数的全序：按 (Re, Im) 字典序"""
    return (value.real, value.imag)


def same_frequency(a: complex, b: complex) -> bool:
    return abs(a - b) <= FREQ_MERGE_TOL * max(1.0, abs(a), abs(b))


def _as_power(value) -> int:
    if isinstance(value, bool):
        raise TypeError(f"幂次必须是整数，实际为 {value!r}")
    power = operator.index(value)
    if power < 0:
        raise ValueError(f"幂次必须非负，实际为 {power}")
    return power


@dataclass(frozen=True)
class Term:
    """规范项 coeff · z^pow_z · zbar^pow_zbar · exp(i(freq_z·z + freq_zbar·zbar))"""

    coeff: complex
    pow_z: int = 0
    pow_zbar: int = 0
    freq_z: complex = 0j
    freq_zbar: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "coeff", complex(self.coeff))
        object.__setattr__(self, "freq_z", complex(self.freq_z))
        object.__setattr__(self, "freq_zbar", complex(self.freq_zbar))
        object.__setattr__(self, "pow_z", _as_power(self.pow_z))
        object.__setattr__(self, "pow_zbar", _as_power(self.pow_zbar))
        if self.pow_z + self.pow_zbar > MAX_DEGREE:
            raise DegreeBoundError(self.pow_z + self.pow_zbar)

    @property
    def degree(self) -> int:
        return self.pow_z + self.pow_zbar

    @property
    def has_frequency(self) -> bool:
        return self.freq_z != 0 or self.freq_zbar != 0

    def is_finite(self) -> bool:
        return _is_finite(self.coeff) and _is_finite(self.freq_z) and _is_finite(self.freq_zbar)

    def sort_key(self) -> Tuple[int, int, float, float, float, float]:
        return (self.pow_z, self.pow_zbar) + complex_sort_key(self.freq_z) + complex_sort_key(self.freq_zbar)

    def same_key(self, other: "Term") -> bool:
        return (
            self.pow_z == other.pow_z
            and self.pow_zbar == other.pow_zbar
            and same_frequency(self.freq_z, other.freq_z)
            and same_frequency(self.freq_zbar, other.freq_zbar)
        )

    def with_coeff(self, coeff: Scalar) -> "Term":
        return Term(coeff, self.pow_z, self.pow_zbar, self.freq_z, self.freq_zbar)

    def times(self, other: "Term") -> "Term":
        return Term(
            self.coeff * other.coeff,
            self.pow_z + other.pow_z,
            self.pow_zbar + other.pow_zbar,
            self.freq_z + other.freq_z,
            self.freq_zbar + other.freq_zbar,
        )

    def conjugate(self) -> "Term":
        # conj(c z^m zbar^n e^{i(αz+βzbar)}) = conj(c) z^n zbar^m e^{i(-conj(β) z - conj(α) zbar)}
        return Term(
            self.coeff.conjugate(),
            self.pow_zbar,
            self.pow_z,
            -self.freq_zbar.conjugate(),
            -self.freq_z.conjugate(),
        )

    def log_magnitude(self, z0: complex) -> float:
        """log|term(z0)|，用于定位溢出时的主导项"""
        if self.coeff == 0:
            return -math.inf
        result = math.log(abs(self.coeff))
        if self.degree:
            if z0 == 0:
                return -math.inf
            result += self.degree * math.log(abs(z0))
        result += -(self.freq_z * z0 + self.freq_zbar * z0.conjugate()).imag
        return result


@dataclass(frozen=True)
class StarExpr:
    """
    规范化的项和。请通过 canonicalize() 构造，以保证：
    键 (m, n, α, β) 互不相同、系数非零、按固定全序排列。
    """

    terms: Tuple[Term, ...] = ()

    def __iter__(self):
        return iter(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other):
        return add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        if isinstance(other, StarExpr):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __call__(self, z0: Scalar) -> complex:
        return evaluate(self, z0)


ZERO = StarExpr()


def _coerce(value) -> StarExpr:
    if isinstance(value, StarExpr):
        return value
    return constant(value)


def canonicalize(raw: Iterable[Term]) -> StarExpr:
    """
    规范化项列表：合并相同键（系数相加）、剪枝零系数、按全序排序

    Args:
        raw: 任意顺序的项

    Returns:
        StarExpr: 规范形式

    Raises:
        NonFiniteTermError: 某个项的系数或频率非有限，附带其下标
    """
    terms = list(raw)
    for index, term in enumerate(terms):
        if not term.is_finite():
            raise NonFiniteTermError(index, term)
    if not terms:
        return ZERO

    scale_ref = max(abs(term.coeff) for term in terms)
    exact: Dict[Tuple, List] = {}
    for term in terms:
        key = (term.pow_z, term.pow_zbar, term.freq_z, term.freq_zbar)
        entry = exact.get(key)
        if entry is None:
            exact[key] = [term, term.coeff]
        else:
            entry[1] += term.coeff

    # 排序后只与相邻项比较频率容差
    buckets: List[List] = []
    for representative, total in sorted(exact.values(), key=lambda entry: entry[0].sort_key()):
        if buckets and buckets[-1][0].same_key(representative):
            buckets[-1][1] += total
        else:
            buckets.append([representative, total])

    threshold = ZERO_PRUNE_TOL * scale_ref
    merged = [
        representative.with_coeff(total)
        for representative, total in buckets
        if total != 0 and abs(total) > threshold
    ]
    return StarExpr(tuple(merged))


# ---------------------------------------------------------------------------
# 构造函数
# ---------------------------------------------------------------------------

def constant(value: Scalar) -> StarExpr:
    return canonicalize([Term(value)])


def monomial(coeff: Scalar, pow_z: int = 0, pow_zbar: int = 0) -> StarExpr:
    return canonicalize([Term(coeff, pow_z, pow_zbar)])


def exponential(alpha: Scalar, beta: Scalar, coeff: Scalar = 1.0, pow_z: int = 0, pow_zbar: int = 0) -> StarExpr:
    """coeff · z^pow_z · zbar^pow_zbar · exp(i(α z + β zbar))"""
    return canonicalize([Term(coeff, pow_z, pow_zbar, alpha, beta)])


def affine(a: Scalar, b: Scalar, c: Scalar = 0) -> StarExpr:
    """a z + b zbar + c"""
    return canonicalize([Term(a, 1, 0), Term(b, 0, 1), Term(c)])


ONE = constant(1)
Z = monomial(1, 1, 0)
ZBAR = monomial(1, 0, 1)


# ---------------------------------------------------------------------------
# 环运算
# ---------------------------------------------------------------------------

def add(f: StarExpr, g: StarExpr) -> StarExpr:
    return canonicalize(f.terms + g.terms)


def neg(f: StarExpr) -> StarExpr:
    return StarExpr(tuple(term.with_coeff(-term.coeff) for term in f.terms))


def sub(f: StarExpr, g: StarExpr) -> StarExpr:
    return add(f, neg(g))


def scale(f: StarExpr, factor: Scalar) -> StarExpr:
    return canonicalize(term.with_coeff(term.coeff * factor) for term in f.terms)


def mul(f: StarExpr, g: StarExpr) -> StarExpr:
    """逐点乘积：系数相乘、幂次相加、频率相加"""
    return canonicalize(t1.times(t2) for t1 in f.terms for t2 in g.terms)


def power(f: StarExpr, exponent: int) -> StarExpr:
    result = ONE
    for _ in range(_as_power(exponent)):
        result = mul(result, f)
    return result


def conj(f: StarExpr) -> StarExpr:
    """作为函数的复共轭"""
    return canonicalize(term.conjugate() for term in f.terms)


# ---------------------------------------------------------------------------
# Wirtinger 导数
# ---------------------------------------------------------------------------

def _d_z_term(term: Term) -> List[Term]:
    out = []
    if term.pow_z:
        out.append(Term(term.coeff * term.pow_z, term.pow_z - 1, term.pow_zbar, term.freq_z, term.freq_zbar))
    if term.freq_z != 0:
        out.append(term.with_coeff(term.coeff * 1j * term.freq_z))
    return out


def _d_zbar_term(term: Term) -> List[Term]:
    out = []
    if term.pow_zbar:
        out.append(Term(term.coeff * term.pow_zbar, term.pow_z, term.pow_zbar - 1, term.freq_z, term.freq_zbar))
    if term.freq_zbar != 0:
        out.append(term.with_coeff(term.coeff * 1j * term.freq_zbar))
    return out


def d_z(f: StarExpr) -> StarExpr:
    return canonicalize(piece for term in f.terms for piece in _d_z_term(term))


def d_zbar(f: StarExpr) -> StarExpr:
    return canonicalize(piece for term in f.terms for piece in _d_zbar_term(term))


def d_x(f: StarExpr) -> StarExpr:
    return add(d_z(f), d_zbar(f))


def d_y(f: StarExpr) -> StarExpr:
    return scale(sub(d_z(f), d_zbar(f)), 1j)


# ---------------------------------------------------------------------------
# 求值
# ---------------------------------------------------------------------------

def _dominant_index(f: StarExpr, z0: complex) -> int:
    magnitudes = [term.log_magnitude(z0) for term in f.terms]
    return max(range(len(magnitudes)), key=magnitudes.__getitem__)


def evaluate(f: StarExpr, z0: Scalar) -> complex:
    """
    在 z0 处求值

    Raises:
        ValueError: z0 非有限
        EvaluationOverflowError: 结果溢出，附带主导项
    """
    z0 = complex(z0)
    if not _is_finite(z0):
        raise ValueError(f"求值点必须有限，实际为 {z0}")
    zc = z0.conjugate()
    total = 0j
    try:
        for term in f.terms:
            total += (
                term.coeff
                * z0 ** term.pow_z
                * zc ** term.pow_zbar
                * cmath.exp(1j * (term.freq_z * z0 + term.freq_zbar * zc))
            )
    except OverflowError:
        index = _dominant_index(f, z0)
        raise EvaluationOverflowError(index, f.terms[index], z0) from None
    if not _is_finite(total):
        index = _dominant_index(f, z0)
        raise EvaluationOverflowError(index, f.terms[index], z0)
    return total


def evaluate_grid(f: StarExpr, points: np.ndarray, check_finite: bool = True) -> np.ndarray:
    """
    在 numpy 网格上向量化求值

    Args:
        f: 表达式
        points: 复数数组（任意形状）
        check_finite: 为 True 时遇到溢出抛出 EvaluationOverflowError

    Returns:
        np.ndarray: 与 points 同形状的复数数组
    """
    points = np.asarray(points, dtype=complex)
    conj_points = np.conj(points)
    result = np.zeros(points.shape, dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        for term in f.terms:
            phase = np.exp(1j * (term.freq_z * points + term.freq_zbar * conj_points))
            result += term.coeff * points ** term.pow_z * conj_points ** term.pow_zbar * phase
    if check_finite and not np.all(np.isfinite(result)):
        bad = complex(points.flat[int(np.argmax(~np.isfinite(result).ravel()))])
        index = _dominant_index(f, bad)
        raise EvaluationOverflowError(index, f.terms[index], bad)
    return result


# ---------------------------------------------------------------------------
# 比较与模式判断
# ---------------------------------------------------------------------------

def norm(f: StarExpr) -> float:
    """最大系数模"""
    return max((abs(term.coeff) for term in f.terms), default=0.0)


def distance(f: StarExpr, g: StarExpr) -> float:
    """按键匹配后的最大系数差，相对于两者中最大的系数模"""
    reference = max(norm(f), norm(g))
    if reference == 0:
        return 0.0
    return norm(sub(f, g)) / reference


def is_close(f: StarExpr, g: StarExpr, rel_tol: float = 1e-10) -> bool:
    return distance(f, g) <= rel_tol


def degree(f: StarExpr) -> int:
    return max((term.degree for term in f.terms), default=0)


def is_affine(f: StarExpr) -> bool:
    return all(not term.has_frequency and term.degree <= 1 for term in f.terms)


def is_exponential_family(f: StarExpr) -> bool:
    return all(term.degree == 0 for term in f.terms)


def is_constant(f: StarExpr) -> bool:
    return all(term.degree == 0 and not term.has_frequency for term in f.terms)


def constant_value(f: StarExpr) -> complex:
    if not is_constant(f):
        raise ValueError("表达式不是常数")
    return sum((term.coeff for term in f.terms), 0j)


def leading_term(f: StarExpr) -> Term:
    """系数模最大的项（并列时取规范序中的第一个）"""
    if f.is_zero:
        raise ValueError("零表达式没有主导项")
    return max(f.terms, key=lambda term: abs(term.coeff))


def coefficient_of(f: StarExpr, key: Term) -> complex:
    for term in f.terms:
        if term.same_key(key):
            return term.coeff
    return 0j
