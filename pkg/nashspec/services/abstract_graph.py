"""
抽象图服务
规约到抽象图的构造、联盟乘积图、轨迹达成判定以及在线边监视器
"""

import itertools
from functools import reduce
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple

from loguru import logger

from config.settings import settings

from ..models.errors import CoalitionError, PathBudgetError, PathError
from ..models.graph import (
    AbstractGraph,
    AlwaysSafe,
    ConcatSafe,
    Path,
    ProductEdge,
    ProductGraph,
    ProductVertex,
    SafeSet,
    Vertex,
)
from ..models.spec import (
    TRUE,
    Achieve,
    Choice,
    Ensuring,
    Predicate,
    Seq,
    Spec,
    State,
    Trajectory,
    conjoin,
)
from .spec_parser import format_predicate


def first(safe: SafeSet) -> AlwaysSafe:
    """First(Z_b) = Z_b，First(Z_b1 ∘ Z_b2) = Z_b1"""
    if isinstance(safe, ConcatSafe):
        return AlwaysSafe(safe.first)
    return safe


def _restrict(safe: SafeSet, predicate: Predicate) -> SafeSet:
    if isinstance(safe, ConcatSafe):
        return ConcatSafe(conjoin(safe.first, predicate), conjoin(safe.second, predicate))
    return AlwaysSafe(conjoin(safe.predicate, predicate))


class _GraphBuilder:
    """结构归纳构造抽象图，顶点编号全局唯一"""

    def __init__(self):
        self.counter = 0

    def _fresh(self) -> Vertex:
        self.counter += 1
        return self.counter - 1

    def build(self, spec: Spec) -> AbstractGraph:
        if isinstance(spec, Achieve):
            start, goal = self._fresh(), self._fresh()
            return AbstractGraph(
                vertices=[start, goal],
                edges={(start, goal): AlwaysSafe(TRUE)},
                initial=start,
                final_safe={goal: TRUE},
                subgoals={goal: spec.predicate},
            )

        if isinstance(spec, Ensuring):
            graph = self.build(spec.spec)
            return AbstractGraph(
                vertices=graph.vertices,
                edges={key: _restrict(safe, spec.predicate) for key, safe in graph.edges.items()},
                initial=graph.initial,
                final_safe={
                    vertex: conjoin(safe, spec.predicate) for vertex, safe in graph.final_safe.items()
                },
                subgoals=graph.subgoals,
            )

        if isinstance(spec, Seq):
            left, right = self.build(spec.first), self.build(spec.second)
            edges = dict(left.edges)
            edges.update(
                {(s, t): safe for (s, t), safe in right.edges.items() if s != right.initial}
            )
            # φ1 的终点接到 φ2 初始边的目标上
            for final, final_safe in left.final_safe.items():
                for target in right.outgoing(right.initial):
                    entry = right.edges[(right.initial, target)]
                    if not isinstance(entry, AlwaysSafe):
                        raise AssertionError("初始边的安全集合必须是 Z_b 形式")
                    edges[(final, target)] = ConcatSafe(final_safe, entry.predicate)
            subgoals = dict(left.subgoals)
            subgoals.update(right.subgoals)
            return AbstractGraph(
                vertices=left.vertices + [v for v in right.vertices if v != right.initial],
                edges=edges,
                initial=left.initial,
                final_safe=dict(right.final_safe),
                subgoals=subgoals,
            )

        left, right = self.build(spec.left), self.build(spec.right)
        edges = dict(left.edges)
        for (source, target), safe in right.edges.items():
            edges[(left.initial if source == right.initial else source, target)] = safe
        final_safe = dict(left.final_safe)
        final_safe.update(right.final_safe)
        subgoals = dict(left.subgoals)
        subgoals.update(right.subgoals)
        return AbstractGraph(
            vertices=left.vertices + [v for v in right.vertices if v != right.initial],
            edges=edges,
            initial=left.initial,
            final_safe=final_safe,
            subgoals=subgoals,
        )


def _renumber(graph: AbstractGraph) -> AbstractGraph:
    """按从初始顶点出发的广度优先顺序重新编号"""
    order = [graph.initial]
    for vertex in order:
        for target in sorted(graph.outgoing(vertex)):
            if target not in order:
                order.append(target)
    order += [v for v in graph.vertices if v not in order]
    mapping = {old: new for new, old in enumerate(order)}
    return AbstractGraph(
        vertices=list(range(len(order))),
        edges={(mapping[s], mapping[t]): safe for (s, t), safe in graph.edges.items()},
        initial=mapping[graph.initial],
        final_safe={mapping[v]: safe for v, safe in graph.final_safe.items()},
        subgoals={mapping[v]: p for v, p in graph.subgoals.items()},
    )


def spec_to_abstract_graph(spec: Spec) -> AbstractGraph:
    """
    由规约构造抽象图 G_φ，满足 ζ ⊨ G_φ 当且仅当 ζ ⊨ φ

    Args:
        spec: 规约

    Returns:
        抽象图；初始顶点无入边且 β(u0) = true，终点都是汇点
    """
    graph = _renumber(_GraphBuilder().build(spec))
    logger.debug(f"抽象图构造完成: {len(graph.vertices)} 个顶点, {graph.num_edges} 条边")
    return graph


def satisfies_graph(trajectory: Trajectory, graph: AbstractGraph) -> bool:
    """
    轨迹是否满足抽象图

    在 (顶点, 下标) 上做动态规划；只有初始边允许 k1 = k0
    """
    states = trajectory.states
    t = trajectory.length
    reached: Set[Tuple[Vertex, int]] = set()
    frontier = [(graph.initial, 0)]
    while frontier:
        vertex, index = frontier.pop()
        if (vertex, index) in reached:
            continue
        reached.add((vertex, index))
        for target in graph.outgoing(vertex):
            safe = graph.edges[(vertex, target)]
            lowest = index if vertex == graph.initial else index + 1
            for nxt in range(lowest, t + 1):
                if graph.subgoal(target).holds(states[nxt]) and safe.contains(
                    states[index:nxt + 1]
                ):
                    frontier.append((target, nxt))

    for vertex, index in reached:
        if vertex in graph.final_safe and all(
            graph.final_safe[vertex].holds(s) for s in states[index:]
        ):
            return True
    return False


def product(graphs: Dict[int, AbstractGraph], coalition: Sequence[int]) -> ProductGraph:
    """
    联盟 B 的异步乘积图

    Args:
        graphs: 智能体编号到抽象图的映射
        coalition: 非空智能体子集

    Returns:
        乘积图；每条边至少一个智能体沿真实边前进，其余停留

    Raises:
        CoalitionError: 联盟为空或缺少某个智能体的抽象图
    """
    members = tuple(sorted(set(coalition)))
    if not members:
        raise CoalitionError("联盟不能为空")
    missing = [agent for agent in members if agent not in graphs]
    if missing:
        raise CoalitionError(f"缺少智能体 {missing} 的抽象图")

    components = [graphs[agent] for agent in members]
    vertices = [tuple(v) for v in itertools.product(*(g.vertices for g in components))]
    edges: List[ProductEdge] = []
    for vertex in vertices:
        options = [
            [None] + sorted(graph.outgoing(component))
            for graph, component in zip(components, vertex)
        ]
        for choice in itertools.product(*options):
            movers = frozenset(members[p] for p, target in enumerate(choice) if target is not None)
            if not movers:
                continue
            target = tuple(
                component if step is None else step for component, step in zip(vertex, choice)
            )
            edges.append(ProductEdge(vertex, target, movers))

    finals = frozenset(
        v for v in vertices if all(c in g.final_safe for g, c in zip(components, v))
    )
    logger.debug(f"乘积图 B={list(members)}: {len(vertices)} 个顶点, {len(edges)} 条边")
    return ProductGraph(
        coalition=members,
        graphs={agent: graphs[agent] for agent in members},
        vertices=vertices,
        edges=edges,
        initial=tuple(g.initial for g in components),
        finals=finals,
    )


def _hold(graph: AbstractGraph, vertex: Vertex) -> Predicate:
    if vertex in graph.final_safe:
        return graph.final_safe[vertex]
    parts = [first(graph.edges[(vertex, target)]).predicate for target in graph.outgoing(vertex)]
    return reduce(conjoin, parts, TRUE)


def hold_predicate(graph: ProductGraph, agent: int, vertex: Vertex) -> Predicate:
    """智能体停留在顶点上时必须保持的谓词"""
    return _hold(graph.graphs[agent], vertex)


def _edge_holds(states: Sequence[State], edge: ProductEdge, graph: ProductGraph) -> bool:
    """按量词直接检查轨迹段 states 是否达成乘积边"""
    k = len(states) - 1
    for agent in graph.coalition:
        component = graph.graphs[agent]
        u = graph.component(edge.source, agent)
        if agent not in edge.progress:
            hold = _hold(component, u)
            if not all(hold.holds(s) for s in states):
                return False
            continue
        v = graph.component(edge.target, agent)
        safe = component.edges[(u, v)]
        subgoal = component.subgoal(v)
        hold = _hold(component, v)
        lowest = 0 if u == component.initial else 1
        if not any(
            subgoal.holds(states[ki])
            and safe.contains(states[: ki + 1])
            and all(hold.holds(s) for s in states[ki:])
            for ki in range(lowest, k + 1)
        ):
            return False
    return True


def achieves_edge(
    trajectory: Trajectory, edge: ProductEdge, graph: ProductGraph
) -> Tuple[bool, Optional[int]]:
    """
    轨迹是否达成乘积边

    Args:
        trajectory: 以源顶点达成时刻为起点的轨迹
        edge: 乘积边
        graph: 乘积图

    Returns:
        (是否存在前缀 ζ_{0:k} 达成该边, 最小的 k)
    """
    states = trajectory.states
    for k in range(len(states)):
        if _edge_holds(states[: k + 1], edge, graph):
            return True, k
    return False, None


def achieves_path(trajectory: Trajectory, path: Path, graph: ProductGraph) -> bool:
    """
    轨迹是否达成乘积图路径

    Raises:
        PathError: 路径为空、不连续或不以终点结束
    """
    if not path:
        raise PathError("路径不能为空")
    for before, after in zip(path, path[1:]):
        if before.target != after.source:
            raise PathError("路径不连续")
    if path[0].source != graph.initial:
        raise PathError("路径必须从初始顶点出发")
    if path[-1].target not in graph.finals:
        raise PathError(f"路径终点 {path[-1].target} 不是终止顶点")

    states = trajectory.states
    t = trajectory.length
    indices = {0}
    for edge in path:
        indices = {
            nxt
            for start in indices
            for nxt in range(start, t + 1)
            if _edge_holds(states[start:nxt + 1], edge, graph)
        }
        if not indices:
            return False

    final = path[-1].target
    return any(
        all(
            graph.graphs[agent].final_safe[graph.component(final, agent)].holds(s)
            for agent in graph.coalition
            for s in states[index:]
        )
        for index in indices
    )


def topological_order(graph: ProductGraph) -> List[ProductVertex]:
    """乘积图的拓扑序"""
    indegree = {v: 0 for v in graph.vertices}
    for edge in graph.edges:
        indegree[edge.target] += 1
    ready = [v for v in graph.vertices if indegree[v] == 0]
    order: List[ProductVertex] = []
    while ready:
        vertex = ready.pop(0)
        order.append(vertex)
        for edge in graph.outgoing(vertex):
            indegree[edge.target] -= 1
            if indegree[edge.target] == 0:
                ready.append(edge.target)
    if len(order) != len(graph.vertices):
        raise PathError("乘积图存在环")
    return order


def useful_subgraph(graph: ProductGraph) -> ProductGraph:
    """只保留从初始顶点可达且能到达终点的部分"""
    forward = {graph.initial}
    stack = [graph.initial]
    while stack:
        for edge in graph.outgoing(stack.pop()):
            if edge.target not in forward:
                forward.add(edge.target)
                stack.append(edge.target)

    backward = set(graph.finals)
    changed = True
    while changed:
        changed = False
        for edge in graph.edges:
            if edge.target in backward and edge.source not in backward:
                backward.add(edge.source)
                changed = True

    keep = forward & backward
    return ProductGraph(
        coalition=graph.coalition,
        graphs=graph.graphs,
        vertices=[v for v in graph.vertices if v in keep],
        edges=[e for e in graph.edges if e.source in keep and e.target in keep],
        initial=graph.initial,
        finals=frozenset(v for v in graph.finals if v in keep),
    )


def count_paths(graph: ProductGraph) -> int:
    """从初始顶点到终点的路径数"""
    counts: Dict[ProductVertex, int] = {}
    for vertex in reversed(topological_order(graph)):
        counts[vertex] = (1 if vertex in graph.finals else 0) + sum(
            counts[edge.target] for edge in graph.outgoing(vertex)
        )
    return counts[graph.initial]


def iter_paths(graph: ProductGraph) -> Iterator[Path]:
    """深度优先逐条产生路径"""
    adjacency: Dict[ProductVertex, List[ProductEdge]] = {}
    for edge in graph.edges:
        adjacency.setdefault(edge.source, []).append(edge)

    stack: List[Tuple[ProductVertex, Path]] = [(graph.initial, ())]
    while stack:
        vertex, prefix = stack.pop()
        if vertex in graph.finals and prefix:
            yield prefix
        for edge in reversed(adjacency.get(vertex, [])):
            stack.append((edge.target, prefix + (edge,)))


def enumerate_paths(graph: ProductGraph, max_paths: Optional[int] = None) -> List[Path]:
    """
    枚举所有从 ū0 到 F̄ 的路径

    Raises:
        PathBudgetError: 路径数超过上限
    """
    limit = max_paths or settings.max_paths
    paths: List[Path] = []
    for path in iter_paths(graph):
        if len(paths) >= limit:
            raise PathBudgetError(limit)
        paths.append(path)
    return paths


def _format_safe(safe: SafeSet) -> str:
    if isinstance(safe, ConcatSafe):
        return f"Z[{format_predicate(safe.first)}] . Z[{format_predicate(safe.second)}]"
    return f"Z[{format_predicate(safe.predicate)}]"


def render_graph(graph: AbstractGraph) -> str:
    """抽象图的文本转储"""
    lines = [f"initial: {graph.initial}"]
    for vertex in graph.vertices:
        line = f"vertex {vertex}: subgoal={format_predicate(graph.subgoal(vertex))}"
        if vertex in graph.final_safe:
            line += f" final_safe=Z[{format_predicate(graph.final_safe[vertex])}]"
        lines.append(line)
    for (source, target), safe in sorted(graph.edges.items()):
        lines.append(f"edge {source} -> {target}: safe={_format_safe(safe)}")
    return "\n".join(lines)


def render_product(graph: ProductGraph) -> str:
    """乘积图的文本转储"""
    lines = [f"coalition: {list(graph.coalition)}", f"initial: {graph.initial}"]
    lines.append(f"finals: {sorted(graph.finals)}")
    for edge in graph.edges:
        lines.append(f"edge {edge.source} -> {edge.target}: progress={sorted(edge.progress)}")
    return "\n".join(lines)


MonitorFlags = Tuple


class EdgeMonitor:
    """
    乘积边达成条件的在线形式

    前进的智能体记录 (前缀满足b1, 处于后缀且满足b2, 已命中子目标并保持)，
    不前进的智能体只记录保持谓词是否一直成立
    """

    def __init__(self, graph: ProductGraph, edge: ProductEdge):
        self.edge = edge
        self.entries = []
        for agent in graph.coalition:
            component = graph.graphs[agent]
            u = graph.component(edge.source, agent)
            if agent in edge.progress:
                v = graph.component(edge.target, agent)
                self.entries.append(
                    (
                        True,
                        component.edges[(u, v)],
                        component.subgoal(v),
                        _hold(component, v),
                        u == component.initial,
                    )
                )
            else:
                self.entries.append((False, None, None, _hold(component, u), True))

    def initial_flags(self) -> MonitorFlags:
        flags = [False]
        for progressing, *_ in self.entries:
            flags.append((True, False, False) if progressing else (True,))
        return tuple(flags)

    def advance(self, flags: MonitorFlags, state: State) -> MonitorFlags:
        """读入下一个状态"""
        started = flags[0]
        updated: List[Tuple] = [True]
        for (progressing, safe, subgoal, hold, at_start), flag in zip(self.entries, flags[1:]):
            keeps = hold.holds(state)
            if not progressing:
                updated.append((flag[0] and keeps,))
                continue
            in1, in2, reached = flag
            if isinstance(safe, ConcatSafe):
                in2 = (in2 or (in1 and started)) and safe.second.holds(state)
                in1 = in1 and safe.first.holds(state)
                prefix_ok = in2
            else:
                in1 = in1 and safe.predicate.holds(state)
                prefix_ok = in1
            hit = (at_start or started) and prefix_ok and subgoal.holds(state)
            updated.append((in1, in2, keeps and (reached or hit)))
        return tuple(updated)

    def achieved(self, flags: MonitorFlags) -> bool:
        if not flags[0]:
            return False
        for (progressing, *_), flag in zip(self.entries, flags[1:]):
            if not flag[-1]:
                return False
        return True

    def failed(self, flags: MonitorFlags) -> bool:
        """之后不可能再达成该边"""
        for (progressing, *_), flag in zip(self.entries, flags[1:]):
            if progressing:
                in1, in2, reached = flag
                if not (in1 or in2 or reached):
                    return True
            elif not flag[0]:
                return True
        return False
