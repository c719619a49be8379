#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
最终验证脚本 - 通过命令行入口运行全部场景并检查各子命令
不需要任何外部数据，所有场景使用固定种子
"""

import contextlib
import io
import json
import os
import sys
import tempfile

import pandas as pd

# 添加当前目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

# 只输出到 stderr，不在当前目录生成日志文件
os.environ["MWQC_LOG_FILE"] = ""
os.environ.setdefault("MWQC_LOG_LEVEL", "WARNING")

from expr_parser import parse
from mwqc import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main as mwqc_main
from scenarios import scenario_ids
from term_algebra import add, affine, constant, is_close, mul


def run_cli(*argv):
    """运行命令行并返回 (退出码, stdout)"""
    buffer = io.StringIO()
    with contextlib.redirect_stdout(buffer):
        code = mwqc_main(list(argv))
    return code, buffer.getvalue()


def test_star_and_poisson():
    """star / poisson 子命令输出规范表达式"""
    print("=== 测试 star 与 poisson ===")
    code, out = run_cli("star", "--f", "2*z + zbar", "--g", "3*z - zbar", "--hbar", "1")
    assert code == EXIT_OK
    f1, f2 = affine(2, 1), affine(3, -1)
    assert is_close(parse(out.strip()), add(mul(f1, f2), constant(-5j)))

    code, out = run_cli("star", "--f", "z", "--g", "zbar", "--hbar", "0.5", "--order", "1")
    assert code == EXIT_OK
    assert is_close(parse(out.strip()), add(mul(affine(1, 0), affine(0, 1)), constant(0.5j)))

    code, out = run_cli("poisson", "--f", "z", "--g", "zbar")
    assert code == EXIT_OK
    assert out.strip() == "1"
    print("✅ star 与 poisson 测试通过")


def test_mu_and_qc():
    """mu / qc 子命令与退出码"""
    print("=== 测试 mu 与 qc ===")
    code, out = run_cli("mu", "--f", "z + 0.5*zbar")
    assert code == EXIT_OK
    assert out.strip() == "0.5"

    assert run_cli("mu", "--f", "zbar")[0] == EXIT_FAILURE

    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, "mu.csv")
        code, out = run_cli("mu", "--f", "z*zbar", "--grid", "9", "--output", path)
        assert code == EXIT_OK
        frame = pd.read_csv(path)
        assert len(frame) == 81
        assert int(frame["masked"].sum()) == 1

    code, out = run_cli("qc", "--f", "z + 0.5*zbar", "--grid", "32", "--format", "json")
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["verdict"] is True
    assert abs(report["k_hat"] - 0.5) < 1e-12

    code, out = run_cli("qc", "--f", "zbar", "--grid", "32")
    assert code == EXIT_FAILURE
    assert "verdict: false" in out
    assert "condition_iii" in out
    print("✅ mu 与 qc 测试通过")


def test_cauchy_command():
    """cauchy 子命令：两变量复现与求导"""
    print("=== 测试 cauchy ===")
    code, out = run_cli("cauchy", "--alphas", "1,2", "--mus=0.3,-0.2i", "--z0", "0.1+0.2i", "--hbar", "0.5")
    assert code == EXIT_OK, out
    assert "residual" in out
    code, _ = run_cli("cauchy", "--alphas", "1,2", "--mus=0.3,-0.2i", "--orders", "1,1")
    assert code == EXIT_OK
    code, _ = run_cli("cauchy", "--alphas", "1,2", "--mus=0.3,1.5", "--radius", "1")
    assert code == EXIT_FAILURE
    print("✅ cauchy 测试通过")


def test_usage_errors():
    """用法与解析错误返回 2"""
    print("=== 测试用法错误 ===")
    assert run_cli()[0] == EXIT_USAGE
    assert run_cli("star", "--f", "2z", "--g", "z")[0] == EXIT_USAGE
    assert run_cli("run", "no-such-scenario")[0] == EXIT_USAGE
    assert run_cli("run", "affine-star", "--bogus", "1")[0] == EXIT_USAGE
    assert run_cli("run", "affine-star", "--trials", "many")[0] == EXIT_USAGE
    assert run_cli("star", "--f", "z", "--g", "z", "--extra")[0] == EXIT_USAGE
    assert run_cli("run-all", "--config", "/nonexistent/config.json")[0] == EXIT_USAGE
    assert run_cli("star", "--f", "z", "--g", "zbar", "--order", "-1")[0] == EXIT_USAGE
    assert run_cli("star", "--f", "z", "--g", "zbar", "--hbar", "nan")[0] == EXIT_USAGE
    assert run_cli("cauchy", "--alphas", "1,2", "--mus", "0.3,0.2", "--orders", "1,x")[0] == EXIT_USAGE
    assert run_cli("cauchy", "--alphas", "1,2", "--mus", "0.3,0.2", "--orders", "1")[0] == EXIT_USAGE
    assert run_cli("cauchy", "--alphas", "1,2", "--mus", "0.3,0.2", "--orders", "1.5,0")[0] == EXIT_USAGE
    assert run_cli("qc", "--f", "z", "--grid", "0")[0] == EXIT_USAGE
    assert run_cli("mu", "--f", "z*zbar", "--grid", "4")[0] == EXIT_USAGE
    deep = "(" * 300 + "z" + ")" * 300
    assert run_cli("star", "--f", deep, "--g", "z")[0] == EXIT_USAGE
    assert run_cli("poisson", "--f", "z + \udcff", "--g", "z")[0] == EXIT_USAGE
    assert run_cli("--help")[0] == EXIT_OK
    print("✅ 用法错误测试通过")


def test_run_single():
    """run 子命令：额外参数写作 --key value"""
    print("=== 测试 run ===")
    code, out = run_cli("run", "affine-star", "--trials", "3", "--hbar-max", "1.5", "--format", "json")
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["status"] == "pass"
    assert report["parameters"]["trials"] == 3
    assert report["parameters"]["hbar_max"] == 1.5
    assert "wall_time" not in report
    print("✅ run 测试通过")


def test_run_all_precedence():
    """命令行参数 > 按 id 的覆盖 > "*" 覆盖 > 默认值"""
    print("=== 测试 run-all 参数优先级 ===")
    config = {"overrides": {"*": {"trials": 2, "cases": 4}, "affine-star": {"trials": 3}}}
    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, "config.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(config, fh)
        code, out = run_cli("run-all", "--config", path, "--seed", "9", "--jobs", "2", "--format", "json")
    reports = {r["scenario"]: r for r in map(json.loads, out.strip().splitlines())}
    assert code == EXIT_OK, [r["scenario"] for r in reports.values() if r["status"] != "pass"]
    assert list(reports) == scenario_ids()
    assert reports["affine-star"]["parameters"]["trials"] == 3
    assert reports["exp-phase"]["parameters"]["trials"] == 2
    assert reports["qc-classification"]["parameters"]["cases"] == 4
    assert reports["affine-star"]["parameters"]["seed"] == 9
    assert "seed" not in reports["conformal-invariance"]["parameters"]
    print("✅ run-all 参数优先级测试通过")


def test_reports_reproducible():
    """相同种子下报告逐字节一致，与并行数无关"""
    print("=== 测试报告可复现 ===")
    config = {"overrides": {"*": {"trials": 3, "cases": 6}}}
    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, "config.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(config, fh)
        outputs = [
            run_cli("run-all", "--config", path, "--format", "json", "--jobs", jobs)
            for jobs in ("1", "1", "4")
        ]
    codes = {code for code, _ in outputs}
    assert codes == {EXIT_OK}, codes
    first = outputs[0][1]
    assert first
    for _, out in outputs[1:]:
        assert out == first
    assert all("reference" in json.loads(line) for line in first.strip().splitlines())

    text_runs = [run_cli("run", "exp-phase", "--trials", "5")[1] for _ in range(2)]
    assert text_runs[0] == text_runs[1]
    print("✅ 报告可复现测试通过")


def test_run_all_defaults():
    """默认参数下全部 14 个场景通过，CSV 汇总与 JSON 输出一致"""
    print("=== 测试 run-all（默认参数） ===")
    with tempfile.TemporaryDirectory() as directory:
        csv_path = os.path.join(directory, "summary.csv")
        code, out = run_cli("run-all", "--format", "json", "--csv", csv_path)
        summary = pd.read_csv(csv_path)
    reports = [json.loads(line) for line in out.strip().splitlines()]
    failed = [r["scenario"] for r in reports if r["status"] != "pass"]
    assert not failed, f"未通过的场景: {failed}"
    assert code == EXIT_OK
    assert len(reports) == 14
    assert list(summary["scenario"]) == scenario_ids()
    assert set(summary["status"]) == {"pass"}
    print("✅ run-all（默认参数）测试通过")


def main():
    """运行所有测试"""
    print("=" * 60)
    print("最终验证")
    print("=" * 60)

    tests = [
        ("star 与 poisson", test_star_and_poisson),
        ("mu 与 qc", test_mu_and_qc),
        ("cauchy", test_cauchy_command),
        ("用法错误", test_usage_errors),
        ("run", test_run_single),
        ("run-all 参数优先级", test_run_all_precedence),
        ("报告可复现", test_reports_reproducible),
        ("run-all（默认参数）", test_run_all_defaults),
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
    if passed == len(tests):
        print("🎉 所有验证通过！")
    return passed == len(tests)


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
