"""
优先级枚举服务
为每个联盟的乘积图学习边策略，组合成路径策略，按估计福利从高到低给出候选
"""

import heapq
import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from ..envs.base import Distribution, GameModel
from ..models.automaton import RewardMachine
from ..models.errors import PathBudgetError, ReachabilityError
from ..models.graph import AbstractGraph, Path, ProductEdge, ProductGraph, ProductVertex
from ..models.policy import FiniteStatePolicy
from ..models.results import CandidateReport, Hyperparameters, ScoreReport
from ..models.spec import JointAction, Spec, State
from .abstract_graph import (
    EdgeMonitor,
    MonitorFlags,
    enumerate_paths,
    iter_paths,
    product,
    spec_to_abstract_graph,
    topological_order,
    useful_subgraph,
)
from .deadline import Deadline
from .simulation import compile_machines, estimate_scores

EdgeKey = Tuple[State, MonitorFlags]


@dataclass
class EdgePolicy:
    """
    单条乘积边的表格策略

    Q 表以 (环境状态, 监视器标志) 为键；未见过的键取第0个联合动作
    """

    edge: ProductEdge
    joint_actions: List[JointAction]
    q_values: Dict[EdgeKey, np.ndarray] = field(default_factory=dict)
    success_rate: float = 0.0
    training_steps: int = 0

    def action_index(self, state: State, flags: MonitorFlags) -> int:
        values = self.q_values.get((state, flags))
        if values is None:
            return 0
        return int(np.argmax(values))

    def greedy(self, state: State, flags: MonitorFlags) -> JointAction:
        return self.joint_actions[self.action_index(state, flags)]

    def greedy_table(self) -> Dict[EdgeKey, JointAction]:
        return {key: self.joint_actions[int(np.argmax(v))] for key, v in self.q_values.items()}

    @classmethod
    def from_table(
        cls, edge: ProductEdge, joint_actions: List[JointAction], table: Dict[EdgeKey, JointAction]
    ) -> "EdgePolicy":
        """由贪心动作表还原策略（用于读取保存的候选）"""
        lookup = {a: i for i, a in enumerate(joint_actions)}
        q_values = {}
        for key, action in table.items():
            values = np.zeros(len(joint_actions))
            values[lookup[tuple(action)]] = 1.0
            q_values[key] = values
        return cls(edge=edge, joint_actions=joint_actions, q_values=q_values)


def _sample_start(distribution: Distribution, rng: np.random.Generator) -> State:
    states = list(distribution)
    if len(states) == 1:
        return states[0]
    weights = np.array([distribution[s] for s in states], dtype=float)
    return states[int(rng.choice(len(states), p=weights / weights.sum()))]


def average_distributions(distributions: Sequence[Distribution]) -> Distribution:
    """η_ū：入边到达分布的均值"""
    total: Dict[State, float] = defaultdict(float)
    for distribution in distributions:
        for state, p in distribution.items():
            total[state] += p / len(distributions)
    return dict(total)


def learn_edge_policy(
    game: GameModel,
    graph: ProductGraph,
    edge: ProductEdge,
    start: Distribution,
    hyper: Hyperparameters,
    rng: np.random.Generator,
) -> EdgePolicy:
    """
    用 ε-greedy Q学习训练达成一条乘积边的联合策略

    每个回合从 start 中抽取起点；达成时奖励1并结束，监视器失败或到达时域时以0结束。
    训练在消耗 edge_budget 个采样步后停止。

    Args:
        game: 环境
        graph: 联盟乘积图
        edge: 目标边
        start: 起点状态分布 η_ū
        hyper: 超参数
        rng: 随机数生成器

    Returns:
        训练好的边策略
    """
    if not start:
        raise ReachabilityError(f"边 {edge.source}->{edge.target} 的起点分布为空", code="EMPTY_START")
    monitor = EdgeMonitor(graph, edge)
    joint_actions = game.joint_actions()
    size = len(joint_actions)
    q_values: Dict[EdgeKey, np.ndarray] = defaultdict(lambda: np.zeros(size))
    budget = hyper.edge_budget
    used = 0
    episodes = 0
    successes = 0

    while used < budget:
        episodes += 1
        state = _sample_start(start, rng)
        flags = monitor.advance(monitor.initial_flags(), state)
        if monitor.achieved(flags):
            successes += 1
            # 起点即达成也计入预算
            used += 1
            continue
        for _ in range(game.horizon):
            key = (state, flags)
            if rng.random() < hyper.q_epsilon:
                index = int(rng.integers(size))
            else:
                index = int(np.argmax(q_values[key]))
            next_state = game.sample_next(state, joint_actions[index], rng)
            used += 1
            next_flags = monitor.advance(flags, next_state)
            achieved = monitor.achieved(next_flags)
            done = achieved or monitor.failed(next_flags)
            target = 1.0 if achieved else 0.0
            if not done:
                target += hyper.q_discount * float(q_values[(next_state, next_flags)].max())
            q_values[key][index] += hyper.q_learning_rate * (target - q_values[key][index])
            state, flags = next_state, next_flags
            if achieved:
                successes += 1
            if done or used >= budget:
                break

    rate = successes / episodes if episodes else 0.0
    logger.debug(
        f"边 {edge.source}->{edge.target} 训练完成: {episodes} 个回合, "
        f"{len(q_values)} 个状态, 训练期达成率 {rate:.3f}"
    )
    return EdgePolicy(
        edge=edge,
        joint_actions=joint_actions,
        q_values=dict(q_values),
        success_rate=rate,
        training_steps=used,
    )


def reach_distribution(
    game: GameModel,
    graph: ProductGraph,
    policy: EdgePolicy,
    start: Distribution,
    num_samples: int,
    rng: np.random.Generator,
) -> Tuple[Distribution, float]:
    """
    执行贪心边策略，统计首次达成时状态的经验分布（只保留达成的回合）

    Returns:
        (到达分布, 达成比例)

    Raises:
        ReachabilityError: 所有回合都未达成
    """
    monitor = EdgeMonitor(graph, policy.edge)
    counts: Counter = Counter()
    for _ in range(num_samples):
        state = _sample_start(start, rng)
        flags = monitor.advance(monitor.initial_flags(), state)
        steps = 0
        while not monitor.achieved(flags) and not monitor.failed(flags) and steps < game.horizon:
            state = game.sample_next(state, policy.greedy(state, flags), rng)
            flags = monitor.advance(flags, state)
            steps += 1
        if monitor.achieved(flags):
            counts[state] += 1

    reached = sum(counts.values())
    if reached == 0:
        raise ReachabilityError(
            f"边 {policy.edge.source}->{policy.edge.target} 在 {num_samples} 次回合中从未达成",
            code="UNREACHABLE_EDGE",
        )
    return {s: n / reached for s, n in counts.items()}, reached / num_samples


class PathPolicy(FiniteStatePolicy):
    """
    由乘积路径上的边策略组合成的有限状态联合策略

    记忆为 (当前边序号 z, 监视器标志)，记忆 m 已读入到当前状态之前的全部状态。
    一条边达成后用同一状态开始下一条边；走完路径后继续执行最后一条边策略。
    """

    def __init__(self, graph: ProductGraph, path: Path, edge_policies: Sequence[EdgePolicy]):
        if len(path) != len(edge_policies) or not path:
            raise ValueError("路径与边策略数量必须一致且非空")
        self.graph = graph
        self.path = tuple(path)
        self.edge_policies = list(edge_policies)
        self.monitors = [EdgeMonitor(graph, edge) for edge in self.path]
        super().__init__(initial_memory=(0, self.monitors[0].initial_flags()))

    @property
    def num_stages(self) -> int:
        return len(self.path)

    @property
    def memory_bound(self) -> int:
        return self.num_stages + 1

    def _advance(self, memory: Hashable, state: State) -> Tuple[int, MonitorFlags]:
        stage, flags = memory
        last = self.num_stages - 1
        if stage > last:
            return stage, self.monitors[last].advance(flags, state)
        flags = self.monitors[stage].advance(flags, state)
        while self.monitors[stage].achieved(flags):
            if stage == last:
                return stage + 1, flags
            stage += 1
            flags = self.monitors[stage].advance(self.monitors[stage].initial_flags(), state)
        return stage, flags

    def output(self, state: State, memory: Hashable) -> JointAction:
        stage, flags = self._advance(memory, state)
        return self.edge_policies[min(stage, self.num_stages - 1)].greedy(state, flags)

    def update(self, state: State, action: JointAction, memory: Hashable) -> Hashable:
        return self._advance(memory, state)

    def completed(self, memory: Optional[Hashable] = None) -> bool:
        stage, _ = self._memory if memory is None else memory
        return stage >= self.num_stages


def path_to_policy(graph: ProductGraph, path: Path, edge_policies: Dict[ProductEdge, EdgePolicy]) -> PathPolicy:
    """按路径顺序取出边策略组合成路径策略"""
    return PathPolicy(graph, path, [edge_policies[edge] for edge in path])


@dataclass
class Candidate:
    """一个候选联合策略及其来源"""

    policy: PathPolicy
    coalition: Tuple[int, ...]
    path: Path
    report: ScoreReport

    @property
    def welfare(self) -> float:
        return self.report.welfare

    def describe_path(self) -> List[str]:
        return [f"{e.source}->{e.target}" for e in self.path]

    def to_report(self, rank: int) -> CandidateReport:
        return CandidateReport(
            rank=rank,
            coalition=list(self.coalition),
            path=self.describe_path(),
            welfare=self.welfare,
            scores=self.report.scores,
        )


class RankedCandidateList:
    """按 (福利降序, 联盟规模降序, 插入顺序) 出堆的候选列表"""

    def __init__(self):
        self._heap: List[Tuple[float, int, int, Candidate]] = []
        self._counter = itertools.count()

    def push(self, candidate: Candidate) -> None:
        heapq.heappush(
            self._heap, (-candidate.welfare, -len(candidate.coalition), next(self._counter), candidate)
        )

    def pop(self) -> Candidate:
        return heapq.heappop(self._heap)[-1]

    def peek(self) -> Optional[Candidate]:
        return self._heap[0][-1] if self._heap else None

    def ordered(self) -> List[Candidate]:
        """不出堆地按顺序列出全部候选"""
        return [entry[-1] for entry in sorted(self._heap)]

    def __len__(self) -> int:
        return len(self._heap)

    def __iter__(self) -> Iterator[Candidate]:
        while self._heap:
            yield self.pop()


def coalitions(num_agents: int) -> List[Tuple[int, ...]]:
    """全部非空联盟，规模大的在前"""
    agents = range(num_agents)
    return [c for size in range(num_agents, 0, -1) for c in itertools.combinations(agents, size)]


def _learn_coalition(
    game: GameModel,
    graph: ProductGraph,
    hyper: Hyperparameters,
    rng: np.random.Generator,
    deadline: Optional[Deadline] = None,
) -> Dict[ProductEdge, EdgePolicy]:
    """按拓扑序训练乘积图的全部边，跳过不可达的边"""
    arrivals: Dict[ProductVertex, List[Distribution]] = defaultdict(list)
    arrivals[graph.initial].append({game.initial_state: 1.0})
    policies: Dict[ProductEdge, EdgePolicy] = {}

    for vertex in topological_order(graph):
        if not arrivals.get(vertex):
            continue
        start = average_distributions(arrivals[vertex])
        for edge in graph.outgoing(vertex):
            if deadline is not None:
                deadline.check("边策略训练")
            try:
                policy = learn_edge_policy(game, graph, edge, start, hyper, rng)
                reached, rate = reach_distribution(game, graph, policy, start, hyper.reach_samples, rng)
            except ReachabilityError as e:
                logger.warning(f"[枚举] 跳过边: {e.message}")
                continue
            policy.success_rate = rate
            policies[edge] = policy
            arrivals[edge.target].append(reached)
    return policies


def prioritized_enumeration(
    game: GameModel,
    specs: Sequence[Spec],
    hyper: Hyperparameters,
    rng: np.random.Generator,
    machines: Optional[Sequence[RewardMachine]] = None,
    deadline: Optional[Deadline] = None,
) -> RankedCandidateList:
    """
    对全部联盟枚举路径策略并按估计福利排序

    Args:
        game: 环境
        specs: 各智能体规约
        hyper: 超参数
        rng: 随机数生成器
        machines: 预先编译的奖励机，用于福利估计
        deadline: 超时检查点

    Returns:
        候选列表
    """
    machines = list(machines) if machines is not None else compile_machines(specs)
    graphs: Dict[int, AbstractGraph] = {i: spec_to_abstract_graph(spec) for i, spec in enumerate(specs)}
    candidates = RankedCandidateList()
    remaining = hyper.max_paths

    for coalition in coalitions(len(specs)):
        if deadline is not None:
            deadline.check("枚举")
        if remaining <= 0:
            logger.warning(f"[枚举] 已达到路径数上限 {hyper.max_paths}，停止枚举")
            break
        graph = useful_subgraph(product(graphs, coalition))
        if graph.initial not in graph.vertices or not graph.edges:
            logger.debug(f"[枚举] 联盟 {coalition} 的乘积图没有可用路径")
            continue
        logger.info(f"[枚举] 联盟 {coalition}: {len(graph.vertices)} 个顶点, {len(graph.edges)} 条边")

        policies = _learn_coalition(game, graph, hyper, rng, deadline)
        try:
            paths = enumerate_paths(graph, max_paths=remaining)
        except PathBudgetError:
            logger.warning(f"[枚举] 联盟 {coalition} 的路径数超过剩余上限 {remaining}，只取前 {remaining} 条")
            paths = list(itertools.islice(iter_paths(graph), remaining))

        for path in paths:
            if deadline is not None:
                deadline.check("福利估计")
            if any(edge not in policies for edge in path):
                continue
            remaining -= 1
            policy = path_to_policy(graph, path, policies)
            report = estimate_scores(game, policy, specs, hyper.welfare_samples, rng, machines=machines)
            candidates.push(Candidate(policy=policy, coalition=coalition, path=path, report=report))

    best = candidates.peek()
    logger.info(
        f"[枚举] 共 {len(candidates)} 个候选"
        + (f"，最高福利 {best.welfare:.3f}（联盟 {best.coalition}）" if best else "")
    )
    return candidates
