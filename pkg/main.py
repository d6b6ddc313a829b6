"""
NashSpec 主程序
提供规约编译、均衡搜索、策略验证与基准测试的命令行界面
"""

import json
import sys
from pathlib import Path
from typing import Callable, Optional

import click
import numpy as np
from dotenv import load_dotenv
from loguru import logger

from config.settings import Settings, validate_config
from nashspec import __version__
from nashspec.data.loader import ExperimentLoader
from nashspec.models.automaton import automaton_to_dict
from nashspec.models.errors import NashSpecError
from nashspec.services.abstract_graph import render_graph, spec_to_abstract_graph
from nashspec.services.automata import spec_to_dfa
from nashspec.services.benchmark_runner import run_benchmark
from nashspec.services.deadline import Deadline
from nashspec.services.enumerator import prioritized_enumeration
from nashspec.services.spec_parser import format_spec, parse_spec, scan_atom_names, symbolic_predicate_table
from nashspec.services.verifier import high_nash_search, verify_nash
from utils.logger import setup_logger

# 加载环境变量
load_dotenv()


class NashSpecCLI:
    """命令行各子命令的实现"""

    def __init__(self, debug: bool = False):
        """初始化CLI

        Args:
            debug: 是否启用调试日志
        """
        self.settings = Settings()
        self.loader = ExperimentLoader()
        setup_logger("cli", level="DEBUG" if debug else self.settings.log_level, log_file=self.settings.log_file)
        if debug:
            click.echo("🔍 调试模式已启用", err=True)

    def compile_spec(self, spec_file: str, config_file: Optional[str], graph: bool, output: Optional[str]):
        """编译规约为DFA，可选输出抽象图"""
        text = self.loader.load_spec_file(spec_file)
        if config_file:
            game, _ = self.loader.build(self.loader.load_experiment(config_file))
            table = game.predicate_table()
        else:
            table = symbolic_predicate_table(scan_atom_names(text))

        spec = parse_spec(text, table)
        dfa = spec_to_dfa(spec, self.settings.max_dfa_states)
        payload = json.dumps(automaton_to_dict(dfa), ensure_ascii=False, indent=2)

        click.echo(f"📜 规约: {format_spec(spec)}", err=True)
        click.echo(f"🤖 DFA: {len(dfa.states)} 个状态, {len(dfa.transitions)} 条迁移", err=True)
        if output:
            Path(output).parent.mkdir(parents=True, exist_ok=True)
            Path(output).write_text(payload, encoding="utf-8")
            click.echo(f"✅ 已写入 {output}", err=True)
        else:
            click.echo(payload)

        if graph:
            dump = render_graph(spec_to_abstract_graph(spec))
            if output:
                graph_path = Path(output).with_suffix(".graph.txt")
                graph_path.write_text(dump + "\n", encoding="utf-8")
                click.echo(f"✅ 抽象图已写入 {graph_path}", err=True)
            else:
                click.echo(dump)

    def search(self, config_file: str, output: Optional[str], run_verify: bool):
        """枚举候选策略并写出排序后的候选列表"""
        config = self.loader.load_experiment(config_file)
        game, specs = self.loader.build(config)
        hyper = config.hyperparameters()
        seed = config.effective_seed()
        deadline = Deadline(hyper.run_timeout_seconds)

        click.echo(f"🚀 开始搜索: {config.name}（{game!r}, seed={seed}）", err=True)
        if run_verify:
            result = high_nash_search(game, specs, hyper, seed=seed, deadline=deadline)
            candidates = result.candidates
        else:
            result = None
            ranked = prioritized_enumeration(game, specs, hyper, np.random.default_rng(seed), deadline=deadline)
            candidates = ranked.ordered()

        out_path = Path(output or config.output or Path(self.settings.output_dir) / f"{config.name}.candidates.jsonl")
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", encoding="utf-8") as f:
            for rank, candidate in enumerate(candidates, 1):
                f.write(candidate.to_report(rank).model_dump_json() + "\n")
        click.echo(f"📋 {len(candidates)} 个候选已写入 {out_path}")

        if result is None:
            return
        if result.found:
            policy_path = out_path.with_suffix(".policy.json")
            self.loader.save_policy(result.candidate.policy, policy_path)
            click.echo(
                f"✅ 找到 ε-Nash 均衡: 联盟 {list(result.candidate.coalition)}, "
                f"福利 {result.candidate.welfare:.3f}, 策略已保存到 {policy_path}"
            )
        else:
            click.echo(f"⚠️ 未找到 ε-Nash 均衡（检查了 {result.candidates_checked} 个候选）")

    def verify(self, config_file: str, policy_file: str):
        """验证保存的候选策略"""
        config = self.loader.load_experiment(config_file)
        game, specs = self.loader.build(config)
        hyper = config.hyperparameters()
        seed = config.effective_seed()
        policy = self.loader.load_policy(policy_file, game, specs)

        click.echo(f"🔎 验证策略: {policy_file}（{policy.num_stages} 条边）", err=True)
        result = verify_nash(game, policy, specs, hyper, np.random.default_rng(seed), seed=seed)

        click.echo(f"{'agent':>5} {'J_j':>8} {'dev_j':>8} {'margin':>8}  结果")
        for row in result.rows:
            mark = "✅" if row.passed else "❌"
            click.echo(f"{row.agent:>5} {row.score:>8.3f} {row.deviation:>8.3f} {row.margin:>8.3f}  {mark}")
        verdict = "是" if result.is_nash else "不是"
        click.echo(f"🏁 结论: 该策略{verdict} ε-Nash 均衡 (ε={hyper.nash_epsilon}, δ={hyper.precision_delta})")

    def bench(self, suite: str, config_file: str, output_dir: Optional[str]):
        """运行基准套件"""
        bench_config = self.loader.load_bench_config(config_file)
        selected = self.loader.select_benchmarks(suite)
        click.echo(f"🧪 基准: {len(selected)} 个规约 × {len(bench_config.algorithms)} 个算法", err=True)
        summary = run_benchmark(selected, bench_config, self.loader.load_benchmarks(), output_dir=output_dir)
        if summary.empty:
            click.echo("⚠️ 没有运行任何基准")
        else:
            click.echo(summary.to_string(index=False))


def _run(debug: bool, action: Callable[[NashSpecCLI], None]):
    """执行子命令，统一处理错误与退出码"""
    try:
        action(NashSpecCLI(debug))
    except NashSpecError as e:
        click.echo(f"❌ {e}", err=True)
        logger.error(f"命令执行失败: {e}")
        sys.exit(1)
    except Exception as e:
        click.echo(f"❌ 程序运行错误: {e}", err=True)
        logger.exception(f"程序运行错误: {e}")
        sys.exit(1)


# CLI命令定义
@click.group()
@click.version_option(version=__version__, prog_name="NashSpec")
def cli():
    """🎯 规约驱动的多智能体 ε-Nash 均衡搜索

    从每个智能体的任务规约出发，枚举高社会福利的联合策略并验证其均衡性
    """
    pass


@cli.command("compile-spec")
@click.argument("spec_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), help="实验配置，用于取得环境谓词表")
@click.option("--graph", is_flag=True, help="同时输出抽象图")
@click.option("--output", "-o", help="DFA JSON 输出路径")
@click.option("--debug", is_flag=True, help="启用调试模式")
def compile_spec(spec_file: str, config_file: Optional[str], graph: bool, output: Optional[str], debug: bool):
    """把规约文件编译为确定自动机"""
    _run(debug, lambda app: app.compile_spec(spec_file, config_file, graph, output))


@cli.command()
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "-o", help="候选列表 JSON-lines 输出路径")
@click.option("--verify", "run_verify", is_flag=True, help="依次验证候选并保存找到的均衡策略")
@click.option("--debug", is_flag=True, help="启用调试模式")
def search(config_file: str, output: Optional[str], run_verify: bool, debug: bool):
    """枚举并排序候选联合策略"""
    _run(debug, lambda app: app.search(config_file, output, run_verify))


@cli.command()
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("policy_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--debug", is_flag=True, help="启用调试模式")
def verify(config_file: str, policy_file: str, debug: bool):
    """验证候选策略能否扩展为 ε-Nash 均衡"""
    _run(debug, lambda app: app.verify(config_file, policy_file))


@cli.command()
@click.argument("suite")
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--output-dir", help="结果目录，覆盖配置")
@click.option("--debug", is_flag=True, help="启用调试模式")
def bench(suite: str, config_file: str, output_dir: Optional[str], debug: bool):
    """运行基准套件，SUITE 为逗号分隔的基准编号、环境名或 all"""
    _run(debug, lambda app: app.bench(suite, config_file, output_dir))


@cli.command()
@click.option("--debug", is_flag=True, help="启用调试模式")
def config(debug: bool):
    """显示配置信息"""
    settings = Settings()

    click.echo("📋 当前配置:")
    click.echo(f"   • 随机种子: {settings.seed if settings.seed is not None else '未设置'}")
    click.echo(f"   • Nash因子ε: {settings.nash_epsilon}")
    click.echo(f"   • 验证精度δ: {settings.precision_delta}")
    click.echo(f"   • 采样次数K: {settings.k_samples} ({settings.k_mode})")
    click.echo(f"   • 边训练步数C: {settings.edge_budget}")
    click.echo(f"   • 福利估计轨迹数: {settings.welfare_samples}")
    click.echo(f"   • 单次运行超时: {settings.run_timeout_seconds}秒")
    click.echo(f"   • 缓存后端: {settings.cache_backend}")
    click.echo(f"   • 日志级别: {'DEBUG' if debug else settings.log_level}")
    click.echo(f"   • 配置校验: {'✅ 通过' if validate_config() else '❌ 失败'}")


def main():
    """主函数"""
    try:
        cli()
    except Exception as e:
        click.echo(f"❌ 程序启动失败: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
