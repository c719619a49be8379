#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
测试 Beltrami 系数、拟共形判定、共形映射与 μ 的旋转伸缩
"""

import math
import os
import sys

import numpy as np

# 添加当前目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from beltrami import (
    HOMEOMORPHISM_NOTE,
    BeltramiUndefinedError,
    ConformalDomainError,
    DegenerateGridError,
    GridDomain,
    MuBoundError,
    PatternError,
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
from expr_parser import parse
from star_engine import StarConfig, poisson_bracket, star
from term_algebra import Z, ZBAR, affine, distance, exponential, mul

SMALL_GRID = GridDomain.square(0, 1.0, 64)


def test_grid_domain():
    """网格区域的校验与形状"""
    print("=== 测试 GridDomain ===")
    dom = GridDomain(-1.0, 2.0, 0.0, 1.0, 16, 8)
    assert dom.points().shape == (8, 16)
    assert dom.contains(0.5 + 0.5j)
    assert not dom.contains(3 + 0j)
    assert dom.with_resolution(32).points().shape == (32, 32)
    for args in ((1.0, -1.0, 0.0, 1.0), (0.0, 1.0, 0.0, 1.0, 4, 4), (0.0, math.inf, 0.0, 1.0)):
        try:
            GridDomain(*args)
        except ValueError:
            pass
        else:
            raise AssertionError(f"无效区域 {args} 应当报错")
    print("✅ GridDomain 测试通过")


def test_mu_exact():
    """仿射、指数与同频指数乘积的精确 μ"""
    print("=== 测试精确 μ ===")
    assert abs(mu_exact(parse("z + 0.5*zbar")).value - 0.5) < 1e-15
    assert abs(mu_exact(exponential(1, 0.3)).value - 0.3) < 1e-15
    assert mu_exact(parse("exp(i*z)")).value == 0
    assert mu_exact(affine(2, 1j)).is_exact
    assert abs(mu_exact(mul(exponential(1, 0.3), exponential(2, 0.6))).value - 0.3) < 1e-15
    assert mu_exact(mul(Z, ZBAR)) is None

    for source in ("zbar", "3", "exp(i*zbar)"):
        try:
            mu_exact(parse(source))
        except BeltramiUndefinedError:
            pass
        else:
            raise AssertionError(f"{source} 的 μ 应当无定义")
    print("✅ 精确 μ 测试通过")


def test_mu_composite_independent_of_hbar():
    """f₁ ⋆ f₂ 的 μ = (β₁+β₂)/(α₁+α₂)，与 ħ 无关"""
    print("=== 测试复合 μ ===")
    f1, f2 = exponential(1.0, 0.2), exponential(0.5 - 0.5j, -0.1j)
    expected = (0.2 - 0.1j) / (1.5 - 0.5j)
    for hbar in (0.0, 0.5, 1.0, 2.0):
        value = mu_exact(star(f1, f2, StarConfig(hbar))).value
        assert abs(value - expected) < 1e-12
    print("✅ 复合 μ 测试通过")


def test_mu_grid():
    """逐点 μ 场与屏蔽"""
    print("=== 测试逐点 μ ===")
    offset = GridDomain(0.1, 1.0, 0.1, 1.0, 16, 16)
    field = mu_grid(mul(Z, ZBAR), offset)
    z = offset.points()
    assert not field.is_exact
    assert np.max(np.abs(field.field - z / np.conj(z))) < 1e-12

    centered = GridDomain.square(0, 1.0, 9)
    masked = mu_grid(mul(Z, ZBAR), centered)
    assert int(masked.mask.sum()) == 1
    assert masked.mask[4, 4]
    assert np.isnan(masked.field[4, 4])

    try:
        mu_grid(ZBAR, centered)
    except DegenerateGridError:
        pass
    else:
        raise AssertionError("∂_z f ≡ 0 应当报错")

    member = exponential(0.8 + 0.1j, (0.3 - 0.4j) * (0.8 + 0.1j), 1.5)
    assert beltrami_residual(member, 0.3 - 0.4j, SMALL_GRID) < 1e-12
    print("✅ 逐点 μ 测试通过")


def test_bracket_from_mu():
    """{f₁, f₂} = (μ₂ − μ₁) ∂_z f₁ ∂_z f₂"""
    print("=== 测试 μ 形式的 Poisson 括号 ===")
    f1 = exponential(1.2, 0.6)
    f2 = exponential(-0.4 + 0.3j, (-0.4 + 0.3j) * -0.2j)
    assert distance(poisson_bracket(f1, f2), bracket_from_mu(f1, f2)) < 1e-12
    aligned = exponential(2.0, 1.0)
    assert poisson_bracket(f1, aligned).is_zero
    try:
        bracket_from_mu(mul(Z, ZBAR), f1)
    except PatternError:
        pass
    else:
        raise AssertionError("非常数 μ 应当报错")
    print("✅ μ 形式的 Poisson 括号测试通过")


def test_qc_certify():
    """拟共形判定：sup 比值、∂_z f 零点与溢出"""
    print("=== 测试拟共形判定 ===")
    good = qc_certify(parse("z + 0.5*zbar"), SMALL_GRID)
    assert good.verdict
    assert abs(good.k_hat - 0.5) < 1e-12
    assert good.dz_nonvanishing
    assert good.witness_kind == "sup_ratio"
    assert good.note == HOMEOMORPHISM_NOTE
    assert abs(good.l2_dz - 4.0) < 1e-9

    bad = qc_certify(parse("zbar + 0.1*z"), SMALL_GRID)
    assert not bad.verdict
    assert abs(bad.k_hat - 10.0) < 1e-9

    # |μ| = 1 不是拟共形
    for source in ("z + zbar", "exp(i*(z + zbar))", "2*z - 2i*zbar"):
        boundary = qc_certify(parse(source), SMALL_GRID)
        assert not boundary.verdict, source
        assert boundary.dz_nonvanishing
        assert abs(boundary.k_hat - 1.0) < 1e-12

    conjugate = qc_certify(ZBAR, SMALL_GRID)
    assert not conjugate.verdict
    assert conjugate.witness_kind == "condition_iii"
    assert not conjugate.dz_nonvanishing
    assert conjugate.to_dict()["witness"] is not None

    stretched = qc_certify(stretched_exponential(3.0), SMALL_GRID)
    assert stretched.verdict
    assert abs(stretched.k_hat - 0.5) < 1e-12

    overflow = qc_certify(exponential(-1000j, 0), SMALL_GRID)
    assert not overflow.verdict
    assert overflow.witness_kind == "overflow"

    try:
        qc_certify(Z, SMALL_GRID, 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("k_threshold = 1 应当报错")
    print("✅ 拟共形判定测试通过")


def test_conformal_invariance():
    """共形复合后 |μ| 不变；极点在区域内时拒绝"""
    print("=== 测试共形不变性 ===")
    f = affine(1, 0.4)
    e = exponential(1, 0.25)
    maps = [
        conformal_map("identity"),
        conformal_map("translation", shift=0.5 - 0.25j),
        conformal_map("scaling", factor=1.5 + 0.5j),
        conformal_map("mobius", a=2, b=1, c=0, d=1),
        conformal_map("exp-strip"),
    ]
    for phi in maps:
        for g in (f, e):
            assert conformal_pullback_check(g, phi, SMALL_GRID, method="chain") < 1e-12
            assert conformal_pullback_check(g, phi, SMALL_GRID, method="stencil") < 1e-6

    upper = GridDomain(-1.0, 1.0, 0.1, 2.0, 32, 32)
    cayley = conformal_map("mobius", a=1, b=-1j, c=1, d=1j)
    assert conformal_pullback_check(f, cayley, upper) < 1e-12
    try:
        conformal_pullback_check(f, cayley, GridDomain.square(0, 2.0, 32))
    except ConformalDomainError:
        pass
    else:
        raise AssertionError("极点在区域内应当报错")
    try:
        conformal_pullback_check(f, conformal_map("exp-strip"), GridDomain.square(0, 4.0, 32))
    except ConformalDomainError:
        pass
    else:
        raise AssertionError("带宽 >= 2π 应当报错")

    for name, params in (("mobius", {"a": 1, "b": 2, "c": 2, "d": 4}), ("scaling", {"factor": 0})):
        try:
            conformal_map(name, **params)
        except ConformalDomainError:
            pass
        else:
            raise AssertionError(f"退化映射 {name} 应当报错")
    try:
        conformal_map("reflection")
    except ValueError:
        pass
    else:
        raise AssertionError("未知映射应当报错")
    print("✅ 共形不变性测试通过")


def test_transform_and_align():
    """μ → e^{iθ}λμ 以及对齐到目标 μ"""
    print("=== 测试 μ 的旋转与伸缩 ===")
    rotated = transform_mu(parse("z + 0.5*zbar"), math.pi, 1.0)
    assert abs(mu_exact(rotated).value + 0.5) < 1e-15

    scaled = transform_mu(exponential(2, 0.6), math.pi / 2, 1.0)
    assert abs(mu_exact(scaled).value - 0.3j) < 1e-15

    try:
        transform_mu(affine(1, 0.5), 0.0, 3.0)
    except MuBoundError:
        pass
    else:
        raise AssertionError("|μ| >= 1 应当报错")
    relaxed = transform_mu(affine(1, 0.5), 0.0, 3.0, strict=False)
    assert abs(mu_exact(relaxed).value - 1.5) < 1e-15

    for bad in (mul(Z, ZBAR), affine(0, 1)):
        try:
            transform_mu(bad, 0.0, 0.5)
        except PatternError:
            pass
        else:
            raise AssertionError("无法识别的模式应当报错")

    aligned = align_mu(affine(1, 0.5, 2), 0.2j)
    assert abs(mu_exact(aligned).value - 0.2j) < 1e-15
    f2 = exponential(0.7, 0.7 * 0.2j)
    assert poisson_bracket(align_mu(exponential(1, -0.3), 0.2j), f2).is_zero
    print("✅ μ 的旋转与伸缩测试通过")


def test_polydisc_and_stretch():
    """多圆盘可容许性与拉伸指数"""
    print("=== 测试多圆盘 ===")
    assert polydisc_admissible([1, 2], [0.5, -0.5])
    assert not polydisc_admissible([1, 2], [0.5, 1.2])
    assert not polydisc_admissible([1, -1], [0.1, 0.2])
    assert abs(mu_exact(stretched_exponential(1.0)).value) == 0
    assert abs(mu_exact(stretched_exponential(4.0)).value - 0.6) < 1e-15
    try:
        stretched_exponential(0.5)
    except ValueError:
        pass
    else:
        raise AssertionError("K < 1 应当报错")
    print("✅ 多圆盘测试通过")


def main():
    """运行所有测试"""
    print("=" * 60)
    print("Beltrami 系数测试")
    print("=" * 60)

    tests = [
        ("GridDomain", test_grid_domain),
        ("精确 μ", test_mu_exact),
        ("复合 μ", test_mu_composite_independent_of_hbar),
        ("逐点 μ", test_mu_grid),
        ("μ 形式的 Poisson 括号", test_bracket_from_mu),
        ("拟共形判定", test_qc_certify),
        ("共形不变性", test_conformal_invariance),
        ("μ 的旋转与伸缩", test_transform_and_align),
        ("多圆盘", test_polydisc_and_stretch),
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
