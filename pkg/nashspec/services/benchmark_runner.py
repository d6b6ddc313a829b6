"""
基准运行服务
按 (基准, 算法, 种子) 运行实验，汇总为 CSV 表并逐行写出每次运行的详情
"""

import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from config.settings import settings
from utils.logger import run_context, worker_initializer

from ..data.loader import ExperimentLoader
from ..envs.base import GameModel
from ..models.errors import RunTimeoutError
from ..models.results import (
    BenchmarkConfig,
    BenchmarkEntry,
    ExperimentConfig,
    Hyperparameters,
    HyperOverrides,
    RunResult,
)
from ..models.spec import Spec
from .baselines import epsilon_min, run_maqrm, run_nvi
from .deadline import Deadline
from .simulation import compile_machines, estimate_scores
from .verifier import SearchResult, high_nash_search

SUMMARY_COLUMNS = [
    "spec",
    "algorithm",
    "welfare_mean",
    "welfare_std",
    "epsmin_mean",
    "epsmin_std",
    "terminated",
    "steps_mean",
]


def run_highnashsearch(
    game: GameModel,
    specs: List[Spec],
    hyper: Hyperparameters,
    seed: int = 0,
    deadline: Optional[Deadline] = None,
) -> Tuple[RunResult, SearchResult]:
    """运行高福利 Nash 搜索，并在真实环境中评估返回策略的福利与 ε_min"""
    started = time.monotonic()
    search = high_nash_search(game, specs, hyper, seed=seed, deadline=deadline)
    result = RunResult(
        spec="",
        algorithm="highnashsearch",
        seed=seed,
        enumeration_steps=search.enumeration_steps,
        verification_steps=search.verification_steps,
        found=search.found,
    )
    if search.found:
        rng = np.random.default_rng(seed + 1)
        machines = compile_machines(specs)
        report = estimate_scores(game, search.policy, specs, hyper.welfare_samples, rng, machines=machines)
        eps, _ = epsilon_min(game, search.policy, specs, hyper, rng, machines=machines)
        result.welfare = report.welfare
        result.scores = report.scores
        result.epsilon_min = eps
    else:
        result.note = f"未找到均衡（检查了 {search.candidates_checked} 个候选）"
    result.wall_time = time.monotonic() - started
    return result, search


def run_experiment(config: ExperimentConfig, name: Optional[str] = None) -> RunResult:
    """
    按配置运行一次实验；超时记为未终止而不抛出

    Args:
        config: 实验配置
        name: 结果中的规约名，缺省为配置名

    Returns:
        运行结果
    """
    hyper = config.hyperparameters()
    seed = config.effective_seed()
    game, specs = ExperimentLoader.build(config)
    deadline = Deadline(hyper.run_timeout_seconds)
    started = time.monotonic()
    with run_context(name or config.name, config.algorithm, seed):
        result = _dispatch(config, game, specs, hyper, seed, deadline, started)
        result.spec = name or config.name
        logger.info(
            f"[基准] {result.spec} / {result.algorithm} / seed={seed}: 福利 {result.welfare:.3f}, "
            f"ε_min {result.epsilon_min:.3f}, 采样 {result.sample_steps} 步, 用时 {result.wall_time:.1f}s"
        )
    return result


def _dispatch(
    config: ExperimentConfig,
    game: GameModel,
    specs: List[Spec],
    hyper: Hyperparameters,
    seed: int,
    deadline: Deadline,
    started: float,
) -> RunResult:
    try:
        if config.algorithm == "highnashsearch":
            result, _ = run_highnashsearch(game, specs, hyper, seed, deadline)
        elif config.algorithm == "nvi":
            result = run_nvi(game, specs, hyper, seed, deadline)
        else:
            result = run_maqrm(game, specs, hyper, seed, deadline)
    except RunTimeoutError as e:
        logger.warning(f"运行超时: {e.message}")
        result = RunResult(
            spec="",
            algorithm=config.algorithm,
            seed=seed,
            terminated=False,
            found=False,
            wall_time=time.monotonic() - started,
            note=e.message,
        )
    return result


def _run_job(job: Dict[str, Any]) -> Dict[str, Any]:
    """进程池任务：参数与返回值都是可序列化的字典"""
    entry = BenchmarkEntry.model_validate(job["entry"])
    config = entry.to_experiment(
        name=job["name"],
        algorithm=job["algorithm"],
        seed=job["seed"],
        hyper=HyperOverrides.model_validate(job["hyper"]),
    )
    return run_experiment(config, name=job["name"]).model_dump()


def summarize(runs: List[RunResult]) -> pd.DataFrame:
    """
    汇总为每个 (规约, 算法) 一行；均值与标准差只统计已终止的运行

    Returns:
        列为 SUMMARY_COLUMNS 的表，没有运行时只有表头
    """
    if not runs:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)
    frame = pd.DataFrame([run.model_dump() for run in runs])
    rows = []
    for (spec, algorithm), group in frame.groupby(["spec", "algorithm"], sort=False):
        done = group[group["terminated"]]
        rows.append(
            {
                "spec": spec,
                "algorithm": algorithm,
                "welfare_mean": done["welfare"].mean(),
                "welfare_std": done["welfare"].std(ddof=0),
                "epsmin_mean": done["epsilon_min"].mean(),
                "epsmin_std": done["epsilon_min"].std(ddof=0),
                "terminated": int(group["terminated"].sum()),
                "steps_mean": done["sample_steps"].mean(),
            }
        )
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def run_benchmark(
    suite: List[str],
    bench_config: BenchmarkConfig,
    catalogue: Dict[str, BenchmarkEntry],
    output_dir: Optional[str] = None,
) -> pd.DataFrame:
    """
    运行一组基准并写出 summary.csv 与 runs.jsonl

    第 r 次运行使用种子 seed + r，结果只由配置和种子决定

    Args:
        suite: 基准编号列表，可以为空
        bench_config: 算法、次数、种子与超参数覆盖
        catalogue: 基准目录
        output_dir: 输出目录

    Returns:
        汇总表
    """
    runs_per_spec = bench_config.runs or settings.bench_runs
    workers = bench_config.workers or settings.workers
    output = Path(output_dir or bench_config.output_dir or settings.output_dir)
    output.mkdir(parents=True, exist_ok=True)

    jobs = [
        {
            "name": bench_id,
            "entry": catalogue[bench_id].model_dump(),
            "algorithm": algorithm,
            "seed": bench_config.seed + r,
            "hyper": bench_config.hyper.model_dump(),
        }
        for bench_id in suite
        for algorithm in bench_config.algorithms
        for r in range(runs_per_spec)
    ]
    logger.info(f"[基准] 共 {len(jobs)} 次运行，{workers} 个进程")

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=worker_initializer,
            initargs=(settings.log_level, settings.log_file),
        ) as pool:
            dumps = list(pool.map(_run_job, jobs))
    else:
        dumps = [_run_job(job) for job in jobs]
    runs = [RunResult.model_validate(d) for d in dumps]

    summary = summarize(runs)
    summary.to_csv(output / "summary.csv", index=False)
    ExperimentLoader.save_runs(runs, output / "runs.jsonl")
    logger.info(f"[基准] 结果已写入 {output}")
    return summary
