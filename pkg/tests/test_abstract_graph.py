"""
抽象图与乘积图测试
"""

import numpy as np
import pytest

from nashspec.models.errors import CoalitionError, PathBudgetError, PathError
from nashspec.models.graph import AlwaysSafe, ConcatSafe
from nashspec.models.spec import Trajectory
from nashspec.services.abstract_graph import (
    EdgeMonitor,
    achieves_edge,
    achieves_path,
    count_paths,
    enumerate_paths,
    product,
    render_graph,
    render_product,
    satisfies_graph,
    spec_to_abstract_graph,
    topological_order,
    useful_subgraph,
)
from nashspec.services.spec_parser import parse_spec, satisfies

GRAPH_SPECS = [
    "achieve a",
    "achieve a ensuring (a or b)",
    "achieve a ; achieve b",
    "achieve a or achieve b",
    "(achieve a or achieve b) ; achieve c",
    "achieve a ; achieve b ; achieve a",
    "(achieve a ; achieve b) ensuring (a or b or c)",
    "(achieve a ensuring (a or c)) ; (achieve b ensuring (b or c))",
]


def random_trajectory(rng, max_length=6):
    length = int(rng.integers(1, max_length + 1))
    return Trajectory(tuple(str(c) for c in rng.choice(list("abcd"), size=length)))


def two_agent_product(letters, first="achieve a", second="achieve b"):
    graphs = {
        0: spec_to_abstract_graph(parse_spec(first, letters)),
        1: spec_to_abstract_graph(parse_spec(second, letters)),
    }
    return graphs, product(graphs, (0, 1))


class TestAbstractGraph:
    """单个智能体的抽象图测试"""

    def test_achieve_graph(self, letters):
        """测试 achieve 产生两个顶点一条边"""
        graph = spec_to_abstract_graph(parse_spec("achieve a", letters))
        assert graph.vertices == [0, 1]
        assert list(graph.edges) == [(0, 1)]
        assert graph.finals == frozenset({1})

    def test_seq_graph_uses_concat_safe(self, letters):
        """测试顺序组合的衔接边是两段安全集合的拼接"""
        graph = spec_to_abstract_graph(parse_spec("achieve a ; achieve b", letters))
        assert len(graph.vertices) == 3
        assert graph.num_edges == 2
        kinds = sorted(type(safe).__name__ for safe in graph.edges.values())
        assert kinds == [AlwaysSafe.__name__, ConcatSafe.__name__]

    def test_choice_graph_shares_initial(self, letters):
        """测试选择组合共享初始顶点"""
        graph = spec_to_abstract_graph(parse_spec("achieve a or achieve b", letters))
        assert len(graph.outgoing(graph.initial)) == 2
        assert len(graph.finals) == 2
        assert not graph.incoming(graph.initial)

    def test_finals_are_sinks(self, letters):
        """测试终点没有出边"""
        for text in GRAPH_SPECS:
            graph = spec_to_abstract_graph(parse_spec(text, letters))
            for final in graph.finals:
                assert graph.outgoing(final) == []

    @pytest.mark.parametrize("text", GRAPH_SPECS)
    def test_graph_matches_semantics(self, letters, text):
        """测试 ζ ⊨ G_φ 当且仅当 ζ ⊨ φ"""
        spec = parse_spec(text, letters)
        graph = spec_to_abstract_graph(spec)
        rng = np.random.default_rng(13)
        for _ in range(300):
            trajectory = random_trajectory(rng)
            assert satisfies_graph(trajectory, graph) == satisfies(trajectory, spec), trajectory

    def test_render(self, letters):
        """测试文本转储"""
        graph = spec_to_abstract_graph(parse_spec("achieve a ; achieve b", letters))
        dump = render_graph(graph)
        assert dump.startswith("initial: 0")
        assert "edge 0 -> 1" in dump


class TestProduct:
    """联盟乘积图测试"""

    def test_two_achieves(self, letters):
        """测试两个 achieve 的乘积：5 条边、3 条路径"""
        _, graph = two_agent_product(letters)
        assert len(graph.vertices) == 4
        assert len(graph.edges) == 5
        assert graph.finals == frozenset({(1, 1)})
        assert count_paths(graph) == 3
        assert len(enumerate_paths(graph)) == 3

    def test_every_edge_makes_progress(self, letters):
        """测试每条乘积边至少有一个智能体前进"""
        _, graph = two_agent_product(letters, "achieve a ; achieve b", "achieve c or achieve d")
        for edge in graph.edges:
            assert edge.progress
            for agent in graph.coalition:
                moved = graph.component(edge.source, agent) != graph.component(edge.target, agent)
                assert moved == (agent in edge.progress)

    def test_single_agent_coalition(self, letters):
        """测试单人联盟与原图同构"""
        graphs, _ = two_agent_product(letters, "achieve a ; achieve b")
        graph = product(graphs, (0,))
        assert len(graph.edges) == graphs[0].num_edges
        assert count_paths(graph) == 1

    def test_empty_coalition(self, letters):
        """测试空联盟非法"""
        graphs, _ = two_agent_product(letters)
        with pytest.raises(CoalitionError):
            product(graphs, ())

    def test_missing_agent(self, letters):
        """测试缺少抽象图的智能体"""
        graphs, _ = two_agent_product(letters)
        with pytest.raises(CoalitionError):
            product(graphs, (0, 2))

    def test_path_budget(self, letters):
        """测试路径数上限"""
        _, graph = two_agent_product(letters)
        with pytest.raises(PathBudgetError):
            enumerate_paths(graph, max_paths=2)

    def test_topological_order(self, letters):
        """测试拓扑序中每条边的源都在目标之前"""
        _, graph = two_agent_product(letters, "achieve a ; achieve b", "achieve c")
        order = {v: i for i, v in enumerate(topological_order(graph))}
        for edge in graph.edges:
            assert order[edge.source] < order[edge.target]

    def test_useful_subgraph_keeps_paths(self, letters):
        """测试有用子图不丢失路径"""
        _, graph = two_agent_product(letters, "achieve a or achieve b", "achieve c")
        useful = useful_subgraph(graph)
        assert count_paths(useful) == count_paths(graph)
        assert "coalition: [0, 1]" in render_product(useful)


class TestAchievement:
    """边与路径达成测试"""

    def test_minimal_index(self, letters):
        """测试 achieves_edge 返回最小的 k"""
        _, graph = two_agent_product(letters)
        edge = next(e for e in graph.edges if e.source == (0, 0) and e.target == (1, 1))
        achieved, k = achieves_edge(Trajectory.of("c", "a", "b", "a"), edge, graph)
        assert not achieved or k is not None
        # a 与 b 不能在同一个状态同时成立，但可以先后命中
        assert achieved and k == 2

    def test_bad_paths(self, letters):
        """测试非法路径"""
        _, graph = two_agent_product(letters)
        with pytest.raises(PathError):
            achieves_path(Trajectory.of("a"), (), graph)
        partial = next(e for e in graph.edges if e.target == (1, 0))
        with pytest.raises(PathError):
            achieves_path(Trajectory.of("a"), (partial,), graph)

    def test_path_achievement_implies_specs(self, letters):
        """测试达成乘积路径的轨迹满足联盟内每个规约"""
        texts = ["achieve a ; achieve b", "achieve c ensuring (a or b or c)"]
        specs = [parse_spec(t, letters) for t in texts]
        graphs = {i: spec_to_abstract_graph(s) for i, s in enumerate(specs)}
        graph = product(graphs, (0, 1))
        paths = enumerate_paths(graph)
        rng = np.random.default_rng(17)
        hits = 0
        for _ in range(500):
            trajectory = random_trajectory(rng, max_length=7)
            for path in paths:
                if achieves_path(trajectory, path, graph):
                    hits += 1
                    assert all(satisfies(trajectory, spec) for spec in specs)
        assert hits > 0

    def test_monitor_matches_offline_check(self, letters):
        """测试在线监视器首次达成的时刻与离线判定一致"""
        _, graph = two_agent_product(
            letters, "achieve a ; (achieve b ensuring (b or c))", "achieve c or achieve d"
        )
        rng = np.random.default_rng(19)
        for edge in graph.edges:
            monitor = EdgeMonitor(graph, edge)
            for _ in range(100):
                trajectory = random_trajectory(rng)
                expected, k = achieves_edge(trajectory, edge, graph)
                flags = monitor.initial_flags()
                first = None
                failed_early = False
                for index, state in enumerate(trajectory.states):
                    flags = monitor.advance(flags, state)
                    if monitor.achieved(flags):
                        first = index
                        break
                    if monitor.failed(flags):
                        failed_early = True
                assert (first is not None) == expected
                assert first == k
                if failed_early:
                    assert not expected


@pytest.mark.slow
class TestExhaustiveGraphs:
    """小规约与基准规约上的大规模对照"""

    def test_graph_matches_semantics_exhaustively(self, small_specs, short_trajectories):
        """测试随机小规约的抽象图在全部短轨迹上都与语义一致"""
        for spec in small_specs:
            graph = spec_to_abstract_graph(spec)
            for trajectory in short_trajectories:
                assert satisfies_graph(trajectory, graph) == satisfies(trajectory, spec), (spec, trajectory)

    def test_benchmark_paths_imply_specs(self, benchmark_suite, env_rollout):
        """测试每个基准的全联盟乘积图上，1万个 (轨迹, 路径) 样本中达成路径的轨迹都满足全部规约"""
        rng = np.random.default_rng(47)
        hits = 0
        for key, game, specs in benchmark_suite:
            graphs = {i: spec_to_abstract_graph(spec) for i, spec in enumerate(specs)}
            graph = product(graphs, tuple(range(len(specs))))
            paths = enumerate_paths(graph, max_paths=100_000)
            for _ in range(10_000):
                trajectory = env_rollout(game, rng)
                path = paths[int(rng.integers(len(paths)))]
                if achieves_path(trajectory, path, graph):
                    hits += 1
                    assert all(satisfies(trajectory, spec) for spec in specs), (key, trajectory)
        assert hits > 0
