"""
日志配置模块
基于loguru；控制台写stderr，stdout只输出命令结果。
每条日志带当前运行标签（规约/算法/种子），基准进程池中的子进程用 worker_initializer 重新挂载处理器
"""

import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

from loguru import logger

from config.settings import settings

NO_RUN = "-"

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
    "<level>{level: <8}</level> | "
    "<magenta>{extra[run]}</magenta> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | "
    "<level>{message}</level>"
)

FILE_FORMAT = (
    "{time:YYYY-MM-DD HH:mm:ss.SSS} | "
    "{level: <8} | "
    "{process.id} | "
    "{extra[run]} | "
    "{name}:{function}:{line} | "
    "{message}"
)


def setup_logger(name: Optional[str] = None,
                 level: Optional[str] = None,
                 log_file: Optional[str] = None,
                 to_file: bool = True) -> "logger":
    """设置日志配置

    Args:
        name: 日志器名称
        level: 日志级别
        log_file: 日志文件路径
        to_file: 是否同时写入日志文件

    Returns:
        配置好的logger实例
    """
    level = (level or settings.log_level).upper()
    log_file = log_file or settings.log_file

    # 重复调用时只保留最新配置
    logger.remove()
    logger.configure(extra={"run": NO_RUN})

    logger.add(
        sys.stderr,
        format=CONSOLE_FORMAT,
        level=level,
        colorize=True,
        backtrace=True,
        diagnose=False
    )

    if to_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        # 基准子进程也写同一个文件
        logger.add(
            log_file,
            format=FILE_FORMAT,
            level=level,
            rotation="10 MB",
            retention="7 days",
            compression="zip",
            enqueue=True,
            backtrace=True,
            diagnose=False,
            encoding="utf-8"
        )

    if name:
        return logger.bind(name=name)

    return logger


def worker_initializer(level: str, log_file: Optional[str] = None) -> None:
    """进程池子进程的初始化函数：spawn 启动的子进程没有继承父进程的处理器"""
    setup_logger(level=level, log_file=log_file, to_file=log_file is not None)


@contextmanager
def run_context(spec: str, algorithm: str, seed: int) -> Iterator[str]:
    """在上下文内的日志都带上运行标签"""
    label = f"{spec}/{algorithm}/seed={seed}"
    with logger.contextualize(run=label):
        yield label


def get_logger(name: str) -> "logger":
    """获取指定名称的logger

    Args:
        name: logger名称

    Returns:
        logger实例
    """
    return logger.bind(name=name)
