"""
实验数据加载器
读取实验配置、规约文件与内置基准目录，保存和读取候选策略与运行结果
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import pandas as pd
from loguru import logger
from pydantic import ValidationError

from ..envs import GameModel, make_env
from ..models.errors import ConfigError, PathError
from ..models.graph import ProductEdge
from ..models.results import BenchmarkConfig, BenchmarkEntry, ExperimentConfig, RunResult
from ..models.spec import Spec
from ..services.abstract_graph import product, spec_to_abstract_graph
from ..services.enumerator import EdgePolicy, PathPolicy
from ..services.spec_parser import parse_spec


def _freeze(value: Any) -> Any:
    """JSON 列表还原为元组（状态与监视器标志都是嵌套元组）"""
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def _thaw(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_thaw(v) for v in value]
    return value


class ExperimentLoader:
    """实验数据加载器"""

    def __init__(self, data_dir: Optional[str] = None):
        """
        初始化加载器

        Args:
            data_dir: 基准目录所在目录，默认为当前模块目录
        """
        if data_dir is None:
            data_dir = Path(__file__).parent
        self.data_dir = Path(data_dir)
        self._benchmarks: Optional[Dict[str, BenchmarkEntry]] = None

    def _read_json(self, path: Union[str, Path], what: str) -> Any:
        try:
            with open(path, "r", encoding="utf-8") as f:
                return json.load(f)
        except Exception as e:
            logger.error(f"读取{what}失败: {e}")
            raise ConfigError(f"读取{what}失败: {path}: {e}", code="READ_FAILED") from e

    def load_spec_file(self, path: Union[str, Path]) -> str:
        """读取 UTF-8 规约文件"""
        try:
            return Path(path).read_text(encoding="utf-8")
        except Exception as e:
            logger.error(f"读取规约文件失败: {e}")
            raise ConfigError(f"读取规约文件失败: {path}: {e}", code="READ_FAILED") from e

    def load_experiment(self, path: Union[str, Path]) -> ExperimentConfig:
        """
        读取实验配置；以 .spec 结尾的规约条目按配置文件所在目录解析并替换为文件内容

        Raises:
            ConfigError: 文件读取或校验失败
        """
        logger.info(f"正在加载实验配置: {path}")
        data = self._read_json(path, "实验配置")
        try:
            config = ExperimentConfig.model_validate(data)
        except ValidationError as e:
            logger.error(f"实验配置校验失败: {e}")
            raise ConfigError(f"实验配置校验失败: {e}", code="INVALID_CONFIG") from e

        base_dir = Path(path).parent
        specs = []
        for source in config.specs:
            if source.strip().endswith(".spec"):
                specs.append(self.load_spec_file(base_dir / source.strip()))
            else:
                specs.append(source)
        return config.model_copy(update={"specs": specs})

    def load_bench_config(self, path: Union[str, Path]) -> BenchmarkConfig:
        data = self._read_json(path, "基准配置")
        try:
            return BenchmarkConfig.model_validate(data)
        except ValidationError as e:
            logger.error(f"基准配置校验失败: {e}")
            raise ConfigError(f"基准配置校验失败: {e}", code="INVALID_CONFIG") from e

    def load_benchmarks(self) -> Dict[str, BenchmarkEntry]:
        """读取内置基准目录"""
        if self._benchmarks is None:
            data = self._read_json(self.data_dir / "benchmarks.json", "基准目录")
            try:
                self._benchmarks = {key: BenchmarkEntry.model_validate(v) for key, v in data.items()}
            except ValidationError as e:
                raise ConfigError(f"基准目录校验失败: {e}", code="INVALID_CONFIG") from e
            logger.debug(f"加载了 {len(self._benchmarks)} 个基准")
        return self._benchmarks

    def select_benchmarks(self, suite: str) -> List[str]:
        """
        解析基准套件：逗号分隔的基准编号或环境前缀，"all" 表示全部

        Raises:
            ConfigError: 套件中有未知编号
        """
        catalogue = self.load_benchmarks()
        selected: List[str] = []
        for token in (t.strip() for t in suite.split(",")):
            if not token:
                continue
            if token == "all":
                matches = list(catalogue)
            elif token in catalogue:
                matches = [token]
            else:
                matches = [key for key in catalogue if key.startswith(f"{token}/")]
            if not matches:
                raise ConfigError(f"未知基准: {token}", code="UNKNOWN_BENCHMARK")
            selected.extend(m for m in matches if m not in selected)
        return selected

    @staticmethod
    def build(config: ExperimentConfig) -> Tuple[GameModel, List[Spec]]:
        """构造环境并用环境的谓词表解析各智能体规约"""
        game = make_env(config.env.id, config.env.params, config.horizon)
        table = game.predicate_table()
        specs = [parse_spec(text, table) for text in config.specs]
        if len(specs) != game.num_agents:
            raise ConfigError(
                f"规约数 {len(specs)} 与智能体数 {game.num_agents} 不一致", code="AGENT_MISMATCH"
            )
        return game, specs

    def save_policy(self, policy: PathPolicy, path: Union[str, Path]) -> None:
        """
        保存路径策略：联盟、乘积路径以及每条边的贪心动作表
        """
        payload = {"coalition": list(policy.graph.coalition), "path": []}
        for edge, edge_policy in zip(policy.path, policy.edge_policies):
            rows = [
                {"state": _thaw(state), "flags": _thaw(flags), "action": list(action)}
                for (state, flags), action in edge_policy.greedy_table().items()
            ]
            payload["path"].append(
                {
                    "source": list(edge.source),
                    "target": list(edge.target),
                    "progress": sorted(edge.progress),
                    "rows": rows,
                }
            )
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, ensure_ascii=False)
        logger.info(f"策略已保存: {path}（{len(policy.path)} 条边）")

    def load_policy(self, path: Union[str, Path], game: GameModel, specs: List[Spec]) -> PathPolicy:
        """
        读取路径策略并在当前规约的乘积图上重建

        Raises:
            ConfigError: 文件读取失败
            PathError: 路径中的边不在乘积图中
        """
        data = self._read_json(path, "策略文件")
        graphs = {i: spec_to_abstract_graph(spec) for i, spec in enumerate(specs)}
        graph = product(graphs, data["coalition"])
        known = set(graph.edges)
        joint_actions = game.joint_actions()

        edges, policies = [], []
        for item in data["path"]:
            edge = ProductEdge(
                source=tuple(item["source"]),
                target=tuple(item["target"]),
                progress=frozenset(item["progress"]),
            )
            if edge not in known:
                raise PathError(f"策略文件中的边 {edge.source}->{edge.target} 不在乘积图中")
            table = {(_freeze(r["state"]), _freeze(r["flags"])): tuple(r["action"]) for r in item["rows"]}
            edges.append(edge)
            policies.append(EdgePolicy.from_table(edge, joint_actions, table))
        return PathPolicy(graph, tuple(edges), policies)

    @staticmethod
    def save_runs(runs: List[RunResult], path: Union[str, Path]) -> None:
        """逐行写出运行结果（JSON-lines）"""
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for run in runs:
                f.write(run.model_dump_json() + "\n")

    @staticmethod
    def load_runs(path: Union[str, Path]) -> pd.DataFrame:
        """读取 JSON-lines 运行结果"""
        return pd.read_json(path, lines=True)
