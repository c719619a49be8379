#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
运行配置与日志初始化

配置从 .env 文件与环境变量读取:
    MWQC_SEED       随机场景的默认种子（默认 42）
    MWQC_LOG_LEVEL  日志级别（默认 INFO）
    MWQC_LOG_FILE   日志文件（默认 mwqc.log，设为空字符串则只输出到 stderr）
"""

import logging
import os
import sys
from dataclasses import dataclass

from dotenv import load_dotenv

DEFAULT_SEED = 42
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


@dataclass(frozen=True)
class Settings:
    seed: int = DEFAULT_SEED
    log_level: str = "INFO"
    log_file: str = "mwqc.log"


def load_settings() -> Settings:
    """
    读取 .env 与环境变量

    Raises:
        ValueError: MWQC_SEED 不是整数或日志级别无效
    """
    load_dotenv()

    raw_seed = os.getenv('MWQC_SEED', str(DEFAULT_SEED)).strip()
    try:
        seed = int(raw_seed)
    except ValueError:
        raise ValueError(f"MWQC_SEED 必须是整数，实际为 '{raw_seed}'") from None

    log_level = os.getenv('MWQC_LOG_LEVEL', 'INFO').strip().upper()
    if not isinstance(logging.getLevelName(log_level), int):
        raise ValueError(f"无效的日志级别 MWQC_LOG_LEVEL='{log_level}'")

    log_file = os.getenv('MWQC_LOG_FILE', 'mwqc.log').strip()
    return Settings(seed=seed, log_level=log_level, log_file=log_file)


def setup_logging(settings: Settings) -> None:
    """配置根日志：文件 + stderr（stdout 只输出结果）"""
    handlers = [logging.StreamHandler(sys.stderr)]
    if settings.log_file:
        handlers.insert(0, logging.FileHandler(settings.log_file, encoding='utf-8'))
    logging.basicConfig(
        level=getattr(logging, settings.log_level),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
