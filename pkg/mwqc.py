#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
mwqc 命令行工具

    mwqc run-all [--config PATH] [--format text|json] [--csv PATH] [--jobs N]
    mwqc run ID [--key value ...]
    mwqc star|poisson|mu|qc|cauchy [参数]

退出码: 0 全部检查通过；1 检查失败或计算错误；2 用法或解析错误
"""

import argparse
import json
import logging
import math
import sys
from typing import Dict, List, Optional

import pandas as pd

from beltrami import DEFAULT_K_THRESHOLD, MIN_GRID, GridDomain, mu_exact, mu_grid, qc_certify
from cauchy_numeric import (
    ContourSpec,
    MuFunction,
    analytic_derivative,
    cauchy_derivative,
    default_contours,
    mu_function_eval,
)
from expr_parser import ParseError, format_scalar, parse, parse_scalar, serialize
from scenarios import ConfigError, ScenarioError, reports_to_frame, run_all, run_scenario, scenario_ids
from settings import load_settings, setup_logging
from star_engine import StarConfig, poisson_bracket, star

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class UsageError(ValueError):
    """命令行参数取值无效"""


def finite_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"无效的数值: '{text}'") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"数值必须有限，实际为 '{text}'")
    return value


def nonnegative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"无效的整数: '{text}'") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"必须是非负整数，实际为 {value}")
    return value


def positive_int(text: str) -> int:
    value = nonnegative_int(text)
    if value == 0:
        raise argparse.ArgumentTypeError("必须是正整数")
    return value


def grid_size(text: str) -> int:
    value = nonnegative_int(text)
    if value < MIN_GRID:
        raise argparse.ArgumentTypeError(f"网格分辨率至少为 {MIN_GRID}，实际为 {value}")
    return value


def order_list(text: str) -> List[int]:
    """逗号分隔的非负整数，如 "1,0" """
    return [nonnegative_int(part.strip()) for part in text.split(',')]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='mwqc', description='Moyal-Weyl 星积与 Beltrami 系数验证工具')
    subparsers = parser.add_subparsers(dest='command', required=True)

    def add_scenario_flags(sub):
        sub.add_argument('--format', choices=['text', 'json'], default='text', help='输出格式 (默认 text)')
        sub.add_argument('--timing', action='store_true', help='在报告中输出耗时')
        sub.add_argument('--seed', type=int, help='随机场景的种子 (默认取 MWQC_SEED 或 42)')
        sub.add_argument('--trials', type=int, help='随机场景的试验次数')
        sub.add_argument('--tol', type=finite_float, help='覆盖场景容差')

    run_all_parser = subparsers.add_parser('run-all', help='运行全部验证场景')
    run_all_parser.add_argument('--config', type=str, help='JSON 配置文件 (overrides 按场景 id 分组)')
    run_all_parser.add_argument('--csv', type=str, help='将汇总表保存为 CSV')
    run_all_parser.add_argument('--jobs', type=int, default=1, help='并行线程数 (默认 1)')
    add_scenario_flags(run_all_parser)

    run_parser = subparsers.add_parser('run', help='运行单个场景，额外参数写作 --key value')
    run_parser.add_argument('id', type=str, help=f"场景 id: {', '.join(scenario_ids())}")
    add_scenario_flags(run_parser)

    star_parser = subparsers.add_parser('star', help='计算 f ⋆ g')
    star_parser.add_argument('--f', required=True, help='左因子表达式')
    star_parser.add_argument('--g', required=True, help='右因子表达式')
    star_parser.add_argument('--hbar', type=finite_float, default=1.0, help='形变参数 ħ (默认 1.0)')
    star_parser.add_argument('--order', type=nonnegative_int, help='截断阶数 (缺省为精确星积)')

    poisson_parser = subparsers.add_parser('poisson', help='计算 Poisson 括号 {f, g}')
    poisson_parser.add_argument('--f', required=True, help='表达式 f')
    poisson_parser.add_argument('--g', required=True, help='表达式 g')

    mu_parser = subparsers.add_parser('mu', help='计算 Beltrami 系数 μ_f')
    mu_parser.add_argument('--f', required=True, help='表达式 f')
    mu_parser.add_argument('--grid', type=grid_size, help='在 [-1,1]² 的 N×N 网格上逐点计算')
    mu_parser.add_argument('--output', type=str, help='逐点结果保存为 CSV')

    qc_parser = subparsers.add_parser('qc', help='拟共形判定')
    qc_parser.add_argument('--f', required=True, help='表达式 f')
    qc_parser.add_argument('--grid', type=grid_size, default=256, help='网格分辨率 (默认 256)')
    qc_parser.add_argument('--k', type=finite_float, default=DEFAULT_K_THRESHOLD, help='sup 比值上限 k < 1')
    qc_parser.add_argument('--format', choices=['text', 'json'], default='text', help='输出格式 (默认 text)')

    cauchy_parser = subparsers.add_parser('cauchy', help='μ 空间 Cauchy 积分复现')
    cauchy_parser.add_argument('--alphas', required=True, help='频率 α_j，逗号分隔，如 "1,2"')
    cauchy_parser.add_argument('--mus', required=True, help='目标 μ_j，逗号分隔，如 "0.3,-0.2i"')
    cauchy_parser.add_argument('--z0', default='0', help='求值点 (默认 0)')
    cauchy_parser.add_argument('--hbar', type=finite_float, default=1.0, help='形变参数 ħ (默认 1.0)')
    cauchy_parser.add_argument('--nodes', type=positive_int, default=128, help='每个圆周的节点数 (默认 128)')
    cauchy_parser.add_argument('--radius', type=finite_float, help='圆周半径 (默认 2·max(1, |μ_j|))')
    cauchy_parser.add_argument('--orders', type=order_list, help='求导阶数，逗号分隔 (默认全为 0)')
    cauchy_parser.add_argument('--tol', type=finite_float, default=1e-8, help='相对残差上限 (默认 1e-8)')
    return parser


def parse_extra_flags(extras: List[str]) -> Dict[str, str]:
    """将 ['--key', 'value', '--other=v'] 解析为参数覆盖"""
    overrides = {}
    index = 0
    while index < len(extras):
        item = extras[index]
        if not item.startswith('--') or len(item) <= 2:
            raise ScenarioError(f"无法识别的参数 '{item}'，应写作 --key value")
        key = item[2:]
        if '=' in key:
            key, value = key.split('=', 1)
        else:
            if index + 1 >= len(extras):
                raise ScenarioError(f"参数 --{key} 缺少取值")
            index += 1
            value = extras[index]
        overrides[key.replace('-', '_')] = value
        index += 1
    return overrides


def _scenario_flags(args) -> Dict[str, object]:
    flags = {}
    for key in ('seed', 'trials', 'tol'):
        value = getattr(args, key)
        if value is not None:
            flags[key] = value
    return flags


def cmd_run_all(args, settings) -> int:
    if args.jobs < 1:
        raise ScenarioError(f"--jobs 必须 >= 1，实际为 {args.jobs}")
    reports, status = run_all(args.config, jobs=args.jobs, flags=_scenario_flags(args), default_seed=settings.seed)
    if args.format == 'json':
        for report in reports:
            print(report.to_json(args.timing))
    else:
        frame = reports_to_frame(reports, args.timing)
        print(frame.to_string(index=False))
        for report in reports:
            if not report.passed:
                print()
                print(report.to_text(args.timing))
        passed = sum(report.passed for report in reports)
        print(f"\n通过: {passed}/{len(reports)}")
    if args.csv:
        reports_to_frame(reports, args.timing).to_csv(args.csv, index=False)
        logger.info(f"汇总表已保存到: {args.csv}")
    return status


def cmd_run(args, extras, settings) -> int:
    base = {'seed': settings.seed}
    base.update(_scenario_flags(args))
    report = run_scenario(args.id, parse_extra_flags(extras), base=base)
    print(report.to_json(args.timing) if args.format == 'json' else report.to_text(args.timing))
    return EXIT_OK if report.passed else EXIT_FAILURE


def cmd_star(args) -> int:
    f, g = parse(args.f), parse(args.g)
    result = star(f, g, StarConfig(args.hbar, args.order))
    print(serialize(result))
    return EXIT_OK


def cmd_poisson(args) -> int:
    print(serialize(poisson_bracket(parse(args.f), parse(args.g))))
    return EXIT_OK


def cmd_mu(args) -> int:
    f = parse(args.f)
    exact = mu_exact(f)
    n = args.grid or 64
    dom = GridDomain().with_resolution(n)
    value = exact if exact is not None and args.grid is None else mu_grid(f, dom)
    if value.is_exact:
        print(format_scalar(value.value))
        return EXIT_OK
    points = dom.points()
    frame = pd.DataFrame({
        're': points.real.ravel(),
        'im': points.imag.ravel(),
        'mu_re': value.field.real.ravel(),
        'mu_im': value.field.imag.ravel(),
        'masked': value.mask.ravel(),
    })
    if exact is not None:
        print(f"μ = {format_scalar(exact.value)}")
    else:
        print("μ 不是常数，逐点结果:")
    magnitude = frame.loc[~frame['masked'], ['mu_re', 'mu_im']].pow(2).sum(axis=1).pow(0.5)
    print(f"网格: {n} × {n}，屏蔽点: {int(frame['masked'].sum())}")
    print(f"|μ| 范围: {magnitude.min():.17g} .. {magnitude.max():.17g}")
    if args.output:
        frame.to_csv(args.output, index=False)
        logger.info(f"逐点 μ 已保存到: {args.output}")
    return EXIT_OK


def cmd_qc(args) -> int:
    report = qc_certify(parse(args.f), GridDomain().with_resolution(args.grid), args.k)
    if args.format == 'json':
        print(json.dumps(report.to_dict(), sort_keys=True, ensure_ascii=False, default=str))
    else:
        print(f"verdict: {'true' if report.verdict else 'false'}")
        print(f"k_hat: {report.k_hat:.17g}")
        print(f"dz_nonvanishing: {'true' if report.dz_nonvanishing else 'false'}")
        print(f"l2_dz: {report.l2_dz:.17g}")
        print(f"l2_dzbar: {report.l2_dzbar:.17g}")
        if report.witness is not None:
            print(f"witness ({report.witness_kind}): {format_scalar(report.witness)}")
        print(f"note: {report.note}")
    return EXIT_OK if report.verdict else EXIT_FAILURE


def _scalar_list(text: str) -> List[complex]:
    return [parse_scalar(part) for part in text.split(',')]


def cmd_cauchy(args) -> int:
    alphas = _scalar_list(args.alphas)
    mus = _scalar_list(args.mus)
    mf = MuFunction(tuple(alphas), parse_scalar(args.z0), args.hbar)
    orders = args.orders if args.orders is not None else [0] * len(mus)
    if len(orders) != len(mus):
        raise UsageError(f"--orders 需要 {len(mus)} 个值，实际为 {len(orders)}")
    if len(alphas) != len(mus):
        raise UsageError(f"--alphas 与 --mus 的个数不一致: {len(alphas)} 与 {len(mus)}")
    if args.radius is None:
        contours = default_contours(mus, args.nodes)
    else:
        contours = [ContourSpec(0, args.radius, args.nodes)] * len(mus)
    numeric = cauchy_derivative(mf, mus, orders, contours)
    if any(orders):
        reference = analytic_derivative(mf, mus, orders)
    else:
        reference = mu_function_eval(mf, mus)
    residual = abs(numeric - reference) / max(1.0, abs(reference))
    print(f"cauchy: {format_scalar(numeric)}")
    print(f"direct: {format_scalar(reference)}")
    print(f"residual: {residual:.3e}")
    return EXIT_OK if math.isfinite(residual) and residual <= args.tol else EXIT_FAILURE


def main(argv: Optional[List[str]] = None) -> int:
    """主函数"""
    parser = build_parser()
    try:
        args, extras = parser.parse_known_args(argv)
        if extras and args.command != 'run':
            parser.error(f"无法识别的参数: {' '.join(extras)}")
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        settings = load_settings()
    except ValueError as e:
        print(f"配置错误: {e}", file=sys.stderr)
        return EXIT_USAGE
    setup_logging(settings)

    try:
        if args.command == 'run-all':
            return cmd_run_all(args, settings)
        if args.command == 'run':
            return cmd_run(args, extras, settings)
        if args.command == 'star':
            return cmd_star(args)
        if args.command == 'poisson':
            return cmd_poisson(args)
        if args.command == 'mu':
            return cmd_mu(args)
        if args.command == 'qc':
            return cmd_qc(args)
        return cmd_cauchy(args)
    except (ParseError, ScenarioError, ConfigError, UsageError) as e:
        logger.error(f"输入错误: {e}")
        return EXIT_USAGE
    except ValueError as e:
        logger.error(f"计算错误: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
