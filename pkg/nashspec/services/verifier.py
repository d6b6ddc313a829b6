"""
Nash 验证服务
为每个智能体构造惩罚博弈并求解，判断候选策略能否补充惩罚策略成为 ε-Nash 均衡
"""

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from config.settings import settings

from ..envs.base import GameModel
from ..models.automaton import RewardMachine
from ..models.errors import StateBudgetError, VerificationError
from ..models.game import EstimatedModel, MinMaxSolution, PunishmentGame, ZeroSumGame
from ..models.policy import FiniteStatePolicy
from ..models.results import Hyperparameters, VerificationRow
from ..models.spec import JointAction, Spec, State
from .deadline import Deadline
from .enumerator import Candidate, prioritized_enumeration
from .model_estimator import estimate_model, resolve_samples
from .simulation import compile_machines, estimate_scores
from .zero_sum import minmax_value_iteration

ProductState = Tuple[State, Hashable, int, bool]


def _merge(action: JointAction, agent: int, own: int) -> JointAction:
    merged = list(action)
    merged[agent] = own
    return tuple(merged)


def _join(own: int, others: JointAction, agent: int) -> JointAction:
    merged = list(others)
    merged.insert(agent, own)
    return tuple(merged)


def construct_game(
    model: EstimatedModel,
    agent: int,
    machine: RewardMachine,
    policy: FiniteStatePolicy,
    max_states: Optional[int] = None,
) -> PunishmentGame:
    """
    构造智能体 agent 的惩罚博弈 M̃_j^π

    状态为 (s, m, q, 是否已偏离)，共 H+1 个阶段，只物化从初始状态可达的部分。
    未偏离时 min 方的动作被忽略，其余智能体执行 σ(s, m)；偏离之后双方自由行动。
    阶段奖励为 δ_r^j(s, q)。

    Args:
        model: 估计模型
        agent: 偏离者 j
        machine: 智能体 j 的奖励机
        policy: 有限状态确定性联合策略
        max_states: 乘积状态数上限

    Returns:
        惩罚博弈

    Raises:
        StateBudgetError: 乘积状态数超过上限
    """
    limit = max_states or settings.max_game_states
    max_actions = list(model.action_sets[agent])
    min_actions = [
        tuple(c) for c in itertools.product(*(a for i, a in enumerate(model.action_sets) if i != agent))
    ]
    stages = model.horizon + 1

    states: List[ProductState] = []
    index: Dict[Tuple[int, ProductState], int] = {}
    stage_states: List[set] = [set() for _ in range(stages)]
    transitions: Dict[Tuple[int, int, int], Dict[int, float]] = {}
    rewards: List[float] = []

    def visit(stage: int, product_state: ProductState) -> int:
        key = (stage, product_state)
        if key not in index:
            if len(states) >= limit:
                raise StateBudgetError("惩罚博弈", limit)
            index[key] = len(states)
            states.append(product_state)
            stage_states[stage].add(index[key])
            state, _, q, _ = product_state
            rewards.append(float(machine.reward(state, q)))
            queue.append(key)
        return index[key]

    queue: deque = deque()
    visit(0, (model.initial_state, policy.initial_memory, machine.initial, False))
    while queue:
        stage, (state, memory, q, deviated) = queue.popleft()
        if stage + 1 >= stages:
            continue
        x = index[(stage, (state, memory, q, deviated))]
        q_next = machine.update(state, None, q)
        planned = policy.output(state, memory) if not deviated else None

        for a1, own in enumerate(max_actions):
            if not deviated:
                action = _merge(planned, agent, own)
                flag = own != planned[agent]
                memory_next = policy.update(state, action, memory)
                distribution = {
                    visit(stage + 1, (s, memory_next, q_next, flag)): p
                    for s, p in model.successors(state, action).items()
                }
                for a2 in range(len(min_actions)):
                    transitions[(x, a1, a2)] = distribution
                continue
            for a2, others in enumerate(min_actions):
                action = _join(own, others, agent)
                memory_next = policy.update(state, action, memory)
                transitions[(x, a1, a2)] = {
                    visit(stage + 1, (s, memory_next, q_next, True)): p
                    for s, p in model.successors(state, action).items()
                }

    reward_tensor = np.broadcast_to(
        np.asarray(rewards, dtype=float)[:, None, None],
        (len(states), len(max_actions), len(min_actions)),
    ).copy()
    game = ZeroSumGame(
        num_states=len(states),
        num_max_actions=len(max_actions),
        num_min_actions=len(min_actions),
        transitions=transitions,
        rewards=reward_tensor,
        horizon=stages,
        initial=0,
        stage_states=stage_states,
    )
    logger.debug(f"智能体 {agent} 的惩罚博弈: {len(states)} 个乘积状态, {stages} 个阶段")
    return PunishmentGame(
        agent=agent,
        game=game,
        states=states,
        index=index,
        max_actions=max_actions,
        min_actions=min_actions,
    )


def punishment_value(game: PunishmentGame) -> Tuple[float, MinMaxSolution]:
    """极小极大值迭代求 deṽ_j 与 min 方最优策略"""
    solution = minmax_value_iteration(game.game)
    return solution.value, solution


@dataclass
class PunishmentStrategy:
    """
    针对偏离者 j 的惩罚策略 τ[j]

    各惩罚者共用同一个随机数流抽取 min 方联合动作，再各取自己的分量
    """

    game: PunishmentGame
    solution: MinMaxSolution

    @property
    def agent(self) -> int:
        return self.game.agent

    def joint_action(
        self,
        stage: int,
        state: State,
        memory: Hashable,
        q: int,
        rng: np.random.Generator,
    ) -> Optional[JointAction]:
        """惩罚者的联合动作（不含 j）；未跟踪到的乘积状态返回 None"""
        x = self.game.lookup(stage, state, memory, q, True)
        if x is None or (stage, x) not in self.solution.min_policy:
            return None
        strategy = self.solution.min_policy[(stage, x)]
        choice = int(rng.choice(len(strategy), p=strategy / strategy.sum()))
        return self.game.min_actions[choice]

    def component(self, others: JointAction, punisher: int) -> int:
        """τ_ij：从 min 方联合动作中取出智能体 i 的分量"""
        position = punisher if punisher < self.agent else punisher - 1
        return others[position]


PunishmentStrategySet = Dict[int, PunishmentStrategy]


def pun_strat(game: PunishmentGame, solution: MinMaxSolution) -> PunishmentStrategy:
    return PunishmentStrategy(game=game, solution=solution)


class JoinedPolicy:
    """
    π⋈τ：无人偏离时执行 π；最早偏离者 j 出现后（同时偏离取最小编号），
    从下一步起其余智能体执行 τ[j]
    """

    def __init__(
        self,
        base: FiniteStatePolicy,
        machines: Sequence[RewardMachine],
        punishments: PunishmentStrategySet,
        action_sets: Sequence[Sequence[int]],
    ):
        self.base = base
        self.machines = list(machines)
        self.punishments = dict(punishments)
        self.action_sets = [tuple(a) for a in action_sets]
        self.reset()

    def reset(self) -> None:
        self._memory = self.base.initial_memory
        self._rm_states = [m.initial for m in self.machines]
        self._step = 0
        self.deviator: Optional[int] = None
        self.detected_at: Optional[int] = None

    def _uniform(self, rng: np.random.Generator) -> JointAction:
        return tuple(int(rng.choice(actions)) for actions in self.action_sets)

    def act(self, state: State, step: int, rng: np.random.Generator) -> JointAction:
        planned = self.base.output(state, self._memory)
        if self.deviator is None:
            return planned
        j = self.deviator
        strategy = self.punishments.get(j)
        others = None
        if strategy is not None:
            others = strategy.joint_action(step, state, self._memory, self._rm_states[j], rng)
        if others is None:
            logger.warning(f"惩罚策略未跟踪到状态 {state}（第 {step} 步），惩罚者改为均匀随机")
            fallback = self._uniform(rng)
            return _merge(fallback, j, planned[j])
        return tuple(
            planned[j] if i == j else strategy.component(others, i) for i in range(len(planned))
        )

    def observe(self, state: State, action: JointAction, next_state: State) -> None:
        if self.deviator is None:
            planned = self.base.output(state, self._memory)
            deviators = [i for i, (a, b) in enumerate(zip(action, planned)) if a != b]
            if deviators:
                self.deviator = deviators[0]
                self.detected_at = self._step
        self._memory = self.base.update(state, action, self._memory)
        self._rm_states = [m.update(state, action, q) for m, q in zip(self.machines, self._rm_states)]
        self._step += 1

    def memory(self) -> Hashable:
        return (self._memory, tuple(self._rm_states), self.deviator)


@dataclass
class VerificationResult:
    """验证结果"""

    is_nash: bool
    punishments: PunishmentStrategySet
    rows: List[VerificationRow]
    sample_steps: int = 0


def verify_nash(
    game: GameModel,
    policy: FiniteStatePolicy,
    specs: Sequence[Spec],
    hyper: Hyperparameters,
    rng: np.random.Generator,
    model: Optional[EstimatedModel] = None,
    machines: Optional[Sequence[RewardMachine]] = None,
    seed: int = 0,
) -> VerificationResult:
    """
    判断有限状态确定性联合策略能否补充惩罚策略成为 ε-Nash 均衡

    对每个 j：deṽ_j ≤ J_j(π) + ε - δ 时通过。J_j 在真实环境中用蒙特卡洛估计，
    deṽ_j 在估计模型上求解

    Args:
        game: 环境
        policy: 候选策略
        specs: 各智能体规约
        hyper: 超参数
        rng: 随机数生成器
        model: 已估计的模型；缺省时按 (环境, K, seed) 从缓存取得或估计
        machines: 预先编译的奖励机
        seed: 模型估计的种子

    Returns:
        验证结果

    Raises:
        VerificationError: ε 与 δ 不满足 0 < δ < ε
    """
    epsilon, delta = hyper.nash_epsilon, hyper.precision_delta
    if not 0 < delta < epsilon:
        raise VerificationError(f"精度必须满足 0 < δ < ε，收到 ε={epsilon}, δ={delta}", code="BAD_EPSILON")
    machines = list(machines) if machines is not None else compile_machines(specs)
    start_steps = game.sample_steps

    if model is None:
        samples = resolve_samples(
            game, hyper, policy.memory_bound, max(m.num_states for m in machines)
        )
        model = estimate_model(game, samples, seed, hyper.max_model_states)
    report = estimate_scores(game, policy, specs, hyper.score_samples, rng, machines=machines)

    rows: List[VerificationRow] = []
    punishments: PunishmentStrategySet = {}
    for j, machine in enumerate(machines):
        punishment_game = construct_game(model, j, machine, policy, hyper.max_game_states)
        deviation, solution = punishment_value(punishment_game)
        punishments[j] = pun_strat(punishment_game, solution)
        score = report.scores[j]
        margin = score + epsilon - delta - deviation
        rows.append(
            VerificationRow(agent=j, score=score, deviation=deviation, margin=margin, passed=margin >= 0)
        )

    is_nash = all(row.passed for row in rows)
    summary = ", ".join(f"j={r.agent}: J={r.score:.3f} dev={r.deviation:.3f}" for r in rows)
    logger.info(f"[验证] {'通过' if is_nash else '拒绝'} ({summary})")
    return VerificationResult(
        is_nash=is_nash,
        punishments=punishments,
        rows=rows,
        sample_steps=game.sample_steps - start_steps,
    )


@dataclass
class SearchResult:
    """高福利 Nash 搜索结果；未找到时 policy 为 None"""

    found: bool
    policy: Optional[JoinedPolicy] = None
    candidate: Optional[Candidate] = None
    verification: Optional[VerificationResult] = None
    candidates_checked: int = 0
    enumeration_steps: int = 0
    verification_steps: int = 0
    candidates: List[Candidate] = field(default_factory=list)


def high_nash_search(
    game: GameModel,
    specs: Sequence[Spec],
    hyper: Hyperparameters,
    seed: int = 0,
    deadline: Optional[Deadline] = None,
) -> SearchResult:
    """
    先按福利排序枚举候选，再依次验证，返回第一个通过验证的 π⋈τ

    模型只估计一次，所有候选共用

    Args:
        game: 环境
        specs: 各智能体规约
        hyper: 超参数
        seed: 随机种子
        deadline: 超时检查点

    Returns:
        搜索结果；未找到不视为错误
    """
    rng = np.random.default_rng(seed)
    machines = compile_machines(specs)
    start_steps = game.sample_steps

    ranked = prioritized_enumeration(game, specs, hyper, rng, machines=machines, deadline=deadline)
    enumeration_steps = game.sample_steps - start_steps
    ordered = ranked.ordered()
    result = SearchResult(found=False, enumeration_steps=enumeration_steps, candidates=ordered)
    if not ordered:
        logger.warning("没有可验证的候选策略")
        return result

    memory_bound = max(c.policy.memory_bound for c in ordered)
    samples = resolve_samples(game, hyper, memory_bound, max(m.num_states for m in machines))
    model = estimate_model(game, samples, seed, hyper.max_model_states)

    for candidate in ordered:
        if deadline is not None:
            deadline.check("验证")
        result.candidates_checked += 1
        logger.info(
            f"[验证] 第 {result.candidates_checked} 个候选: 联盟 {candidate.coalition}, "
            f"福利 {candidate.welfare:.3f}"
        )
        verification = verify_nash(
            game, candidate.policy, specs, hyper, rng, model=model, machines=machines, seed=seed
        )
        if verification.is_nash:
            result.found = True
            result.candidate = candidate
            result.verification = verification
            result.policy = JoinedPolicy(candidate.policy, machines, verification.punishments, game.action_sets)
            break

    result.verification_steps = game.sample_steps - start_steps - enumeration_steps
    logger.info(
        f"[搜索] {'找到' if result.found else '未找到'}均衡，检查了 {result.candidates_checked} 个候选，"
        f"采样 {result.enumeration_steps} + {result.verification_steps} 步"
    )
    return result
