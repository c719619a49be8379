#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
测试规范项代数：规范化、环运算、Wirtinger 导数与求值
"""

import cmath
import math
import os
import sys

import numpy as np

# 添加当前目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from term_algebra import (
    MAX_DEGREE,
    ONE,
    Z,
    ZBAR,
    DegreeBoundError,
    EvaluationOverflowError,
    NonFiniteTermError,
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
    is_affine,
    is_close,
    is_exponential_family,
    monomial,
    mul,
    power,
    scale,
    sub,
)


def test_canonical_merge_and_order():
    """相同键合并、零系数剪枝、按全序排序"""
    print("=== 测试规范化 ===")
    raw = [Term(2, 0, 1), Term(1, 1, 0), Term(3, 1, 0), Term(-2, 0, 1), Term(1)]
    result = canonicalize(raw)
    assert len(result) == 2
    assert result.terms[0] == Term(1)
    assert result.terms[1] == Term(4, 1, 0)
    assert canonicalize(reversed(raw)) == result

    # 频率在容差内视为同一键
    close = canonicalize([Term(1, 0, 0, 1.0, 0), Term(1, 0, 0, 1.0 + 1e-15, 0)])
    assert len(close) == 1
    assert close.terms[0].coeff == 2

    # 相对最大系数的剪枝
    tiny = canonicalize([Term(1e-20, 1, 0), Term(1.0)])
    assert tiny == constant(1.0)

    # 大量重复键与互不相同的频率
    many = canonicalize([Term(1, 0, 0, k % 500, 0) for k in range(20000)])
    assert len(many) == 500
    assert all(term.coeff == 40 for term in many)
    assert [term.freq_z for term in many] == [complex(k) for k in range(500)]
    print("✅ 规范化测试通过")


def test_non_finite_rejected():
    """非有限系数在规范化时报错并给出下标"""
    print("=== 测试非有限项 ===")
    try:
        canonicalize([Term(1), Term(complex(math.nan, 0), 1, 0)])
    except NonFiniteTermError as e:
        assert e.index == 1
    else:
        raise AssertionError("nan 系数应当报错")
    try:
        canonicalize([Term(1, 0, 0, math.inf, 0)])
    except NonFiniteTermError as e:
        assert e.index == 0
    else:
        raise AssertionError("inf 频率应当报错")
    print("✅ 非有限项测试通过")


def test_degree_bound():
    """总次数上限为 64"""
    print("=== 测试次数上限 ===")
    assert degree(power(Z, MAX_DEGREE)) == MAX_DEGREE
    try:
        mul(power(Z, 40), power(ZBAR, 25))
    except DegreeBoundError as e:
        assert e.degree == 65
    else:
        raise AssertionError("总次数 65 应当报错")
    print("✅ 次数上限测试通过")


def test_ring_operations():
    """加法、乘法与共轭"""
    print("=== 测试环运算 ===")
    f = affine(2, 1, 0)
    g = affine(3, -1, 0)
    product = mul(f, g)
    expected = canonicalize([Term(6, 2, 0), Term(1, 1, 1), Term(-1, 0, 2)])
    assert product == expected
    assert sub(f, f).is_zero
    assert add(f, g) == affine(5, 0, 0)
    assert f + g == add(f, g)
    assert f * g == product

    e = exponential(1 + 0.5j, 0.25, coeff=2j)
    assert is_close(conj(conj(e)), e)
    z0 = 0.3 - 0.7j
    assert abs(evaluate(conj(e), z0) - evaluate(e, z0).conjugate()) < 1e-14
    assert abs(evaluate(conj(product), z0) - evaluate(product, z0).conjugate()) < 1e-12
    print("✅ 环运算测试通过")


def test_wirtinger_derivatives():
    """符号 Wirtinger 导数"""
    print("=== 测试 Wirtinger 导数 ===")
    f = affine(2, 0.5, 1)
    assert d_z(f) == constant(2)
    assert d_zbar(f) == constant(0.5)

    e = exponential(3, 0.5)
    assert is_close(d_z(e), scale(e, 3j))
    assert is_close(d_zbar(e), scale(e, 0.5j))

    zz = mul(Z, ZBAR)
    assert d_z(zz) == ZBAR
    assert d_zbar(zz) == Z
    assert is_close(d_x(zz), affine(1, 1))
    assert is_close(d_y(zz), affine(-1j, 1j))

    # 与有限差分对比
    g = add(mul(monomial(1.5, 2, 1), exponential(0.4, -0.2j)), exponential(0.1, 0.3, 0.5))
    z0 = 0.2 + 0.1j
    h = 1e-5
    dx = (evaluate(g, z0 + h) - evaluate(g, z0 - h)) / (2 * h)
    dy = (evaluate(g, z0 + 1j * h) - evaluate(g, z0 - 1j * h)) / (2 * h)
    assert abs(evaluate(d_z(g), z0) - 0.5 * (dx - 1j * dy)) < 1e-8
    assert abs(evaluate(d_zbar(g), z0) - 0.5 * (dx + 1j * dy)) < 1e-8
    print("✅ Wirtinger 导数测试通过")


def test_evaluate_and_grid():
    """逐点与网格求值一致，溢出时报告主导项"""
    print("=== 测试求值 ===")
    f = add(mul(monomial(2, 1, 2), exponential(1, 0.5)), constant(-1j))
    rng = np.random.default_rng(42)
    points = rng.normal(size=(4, 5)) + 1j * rng.normal(size=(4, 5))
    grid = evaluate_grid(f, points)
    assert grid.shape == points.shape
    for index in np.ndindex(points.shape):
        assert abs(grid[index] - evaluate(f, points[index])) < 1e-12 * max(1.0, abs(grid[index]))

    z0 = 0.5 + 0.5j
    expected = 2 * z0 * z0.conjugate() ** 2 * cmath.exp(1j * (z0 + 0.5 * z0.conjugate())) - 1j
    assert abs(f(z0) - expected) < 1e-13

    huge = add(exponential(-1000j, 0), ONE)
    try:
        evaluate(huge, 1.0)
    except EvaluationOverflowError as e:
        assert e.term.has_frequency
        assert e.point == 1.0
    else:
        raise AssertionError("溢出应当报错")
    values = evaluate_grid(huge, np.array([0.0, 1.0]), check_finite=False)
    assert values[0] == 2
    assert not np.isfinite(values[1])
    print("✅ 求值测试通过")


def test_patterns_and_distance():
    """模式判断与相对距离"""
    print("=== 测试模式判断 ===")
    assert is_affine(affine(1, 2, 3))
    assert not is_affine(mul(Z, Z))
    assert not is_affine(exponential(1, 0))
    assert is_exponential_family(add(exponential(1, 0), exponential(2, 1)))
    assert not is_exponential_family(Z)
    assert distance(constant(1), constant(1 + 1e-12)) < 1e-11
    assert distance(Z, ZBAR) == 1.0
    assert distance(constant(0), constant(0)) == 0.0
    print("✅ 模式判断测试通过")


def main():
    """运行所有测试"""
    print("=" * 60)
    print("规范项代数测试")
    print("=" * 60)

    tests = [
        ("规范化", test_canonical_merge_and_order),
        ("非有限项", test_non_finite_rejected),
        ("次数上限", test_degree_bound),
        ("环运算", test_ring_operations),
        ("Wirtinger 导数", test_wirtinger_derivatives),
        ("求值", test_evaluate_and_grid),
        ("模式判断", test_patterns_and_distance),
    ]

    results = []
    for test_name, test_func in tests:
        try:
            test_func()
            results.append(True)
        except Exception as e:
            print(f"❌ {test_name} 失败: {type(e).__name__}: {e}")
            results.append(False)

    passed = sum(results)
    print(f"\n总计: {passed}/{len(tests)} 测试通过")
    return passed == len(tests)


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
