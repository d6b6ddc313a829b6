"""
基准运行与汇总测试
"""

import pytest

from nashspec.data.loader import ExperimentLoader
from nashspec.models.errors import ConfigError
from nashspec.models.results import (
    BenchmarkConfig,
    BenchmarkEntry,
    EnvConfig,
    ExperimentConfig,
    HyperOverrides,
    RunResult,
)
from nashspec.services.benchmark_runner import SUMMARY_COLUMNS, run_benchmark, run_experiment, summarize

FAST = HyperOverrides(
    nash_epsilon=0.06,
    precision_delta=0.01,
    k_mode="fixed",
    k_samples=20,
    score_samples=100,
    edge_budget=1500,
    reach_samples=50,
    welfare_samples=50,
    maqrm_steps=1000,
    best_response_steps=500,
    epsilon_min_samples=50,
    run_timeout_seconds=600,
)

ONE_CAR = BenchmarkEntry(
    description="单车通过路口",
    env=EnvConfig(id="intersection", params={"cars": [["ns", 1]]}),
    horizon=3,
    specs=["achieve crossed_0"],
)


def run(spec, algorithm, welfare, terminated=True, steps=10):
    return RunResult(
        spec=spec,
        algorithm=algorithm,
        seed=0,
        welfare=welfare,
        epsilon_min=0.1,
        enumeration_steps=steps,
        terminated=terminated,
    )


class TestSummarize:
    """汇总表测试"""

    def test_empty(self):
        """测试没有运行时只有表头"""
        summary = summarize([])
        assert list(summary.columns) == SUMMARY_COLUMNS
        assert summary.empty

    def test_only_terminated_counted(self):
        """测试均值只统计已终止的运行"""
        summary = summarize(
            [
                run("a", "nvi", 1.0),
                run("a", "nvi", 0.5),
                run("a", "nvi", 0.0, terminated=False, steps=999),
                run("b", "nvi", 0.25),
            ]
        )
        assert list(summary["spec"]) == ["a", "b"]
        first = summary.iloc[0]
        assert first["welfare_mean"] == pytest.approx(0.75)
        assert first["welfare_std"] == pytest.approx(0.25)
        assert first["terminated"] == 2
        assert first["steps_mean"] == pytest.approx(10)


class TestRunExperiment:
    """单次实验测试"""

    def test_highnashsearch(self):
        """测试单车场景找到均衡并记录采样步数"""
        config = ONE_CAR.to_experiment("one_car", "highnashsearch", seed=0, hyper=FAST)
        result = run_experiment(config)
        assert result.spec == "one_car"
        assert result.terminated and result.found
        assert result.welfare > 0.8
        assert result.enumeration_steps > 0
        assert result.verification_steps > 0
        assert result.sample_steps == result.enumeration_steps + result.verification_steps

    def test_timeout_marks_unterminated(self):
        """测试超时记为未终止而不抛出"""
        hyper = FAST.model_copy(update={"run_timeout_seconds": 0})
        config = ONE_CAR.to_experiment("one_car", "highnashsearch", seed=0, hyper=hyper)
        result = run_experiment(config)
        assert not result.terminated
        assert not result.found
        assert result.welfare == 0.0

    def test_agent_mismatch(self):
        """测试规约数与智能体数不一致"""
        config = ExperimentConfig(
            env=EnvConfig(id="intersection", params={"cars": [["ns", 1]]}),
            specs=["achieve crossed_0", "achieve crossed_0"],
        )
        with pytest.raises(ConfigError) as info:
            run_experiment(config)
        assert info.value.code == "AGENT_MISMATCH"


class TestRunBenchmark:
    """基准套件测试"""

    def test_empty_suite(self, tmp_path):
        """测试空套件也写出只有表头的 summary.csv 与空的 runs.jsonl"""
        summary = run_benchmark([], BenchmarkConfig(runs=1, workers=1), {}, output_dir=str(tmp_path))
        assert summary.empty
        assert (tmp_path / "summary.csv").read_text(encoding="utf-8").strip() == ",".join(SUMMARY_COLUMNS)
        assert (tmp_path / "runs.jsonl").read_text(encoding="utf-8") == ""

    def test_runs_written(self, tmp_path):
        """测试每次运行写一行且汇总一行"""
        bench = BenchmarkConfig(algorithms=["maqrm"], runs=2, seed=5, hyper=FAST, workers=1)
        summary = run_benchmark(["one_car"], bench, {"one_car": ONE_CAR}, output_dir=str(tmp_path))
        assert len(summary) == 1
        assert summary.iloc[0]["terminated"] == 2

        runs = ExperimentLoader.load_runs(tmp_path / "runs.jsonl")
        assert len(runs) == 2
        assert sorted(runs["seed"]) == [5, 6]
        assert set(runs["algorithm"]) == {"maqrm"}

    def test_same_seed_same_result(self, tmp_path):
        """测试结果只由配置和种子决定"""
        bench = BenchmarkConfig(algorithms=["maqrm"], runs=1, seed=3, hyper=FAST, workers=1)
        first = run_benchmark(["one_car"], bench, {"one_car": ONE_CAR}, output_dir=str(tmp_path / "a"))
        second = run_benchmark(["one_car"], bench, {"one_car": ONE_CAR}, output_dir=str(tmp_path / "b"))
        assert first["welfare_mean"].tolist() == second["welfare_mean"].tolist()
