"""
对比基线与 ε_min 指标
NVI（逐阶段一般和Nash值迭代）、MAQRM（多智能体奖励机Q学习）以及最优响应偏离收益
"""

import itertools
import time
from collections import defaultdict, deque
from typing import Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from ..envs.base import GameModel
from ..models.automaton import RewardMachine
from ..models.errors import NoEquilibriumError
from ..models.game import EstimatedModel
from ..models.policy import JointPolicy
from ..models.results import Hyperparameters, RunResult
from ..models.spec import JointAction, Spec, State
from .deadline import Deadline
from .matrix_solver import NashProfile, best_nash_general_sum, expected_payoffs
from .model_estimator import estimate_model, resolve_samples
from .simulation import compile_machines, estimate_scores

RMStates = Tuple[int, ...]
NVIKey = Tuple[State, RMStates]


def _advance_machines(machines: Sequence[RewardMachine], state: State, qs: RMStates) -> Tuple[RMStates, List[int]]:
    """所有奖励机读入 state，返回新状态与各自奖励"""
    stepped = [m.step(state, q) for m, q in zip(machines, qs)]
    return tuple(q for q, _ in stepped), [r for _, r in stepped]


class NVIPolicy:
    """逐阶段混合策略；跟踪各奖励机状态在线执行，各智能体独立抽样"""

    def __init__(
        self,
        strategies: Dict[Tuple[int, NVIKey], List[np.ndarray]],
        machines: Sequence[RewardMachine],
        action_sets: Sequence[Sequence[int]],
    ):
        self.strategies = strategies
        self.machines = list(machines)
        self.action_sets = [tuple(a) for a in action_sets]
        self.reset()

    def reset(self) -> None:
        self._qs: RMStates = tuple(m.initial for m in self.machines)
        self._step = 0

    def act(self, state: State, step: int, rng: np.random.Generator) -> JointAction:
        strategies = self.strategies.get((self._step, (state, self._qs)))
        if strategies is None:
            return tuple(int(rng.choice(actions)) for actions in self.action_sets)
        return tuple(
            actions[int(rng.choice(len(actions), p=strategy / strategy.sum()))]
            for actions, strategy in zip(self.action_sets, strategies)
        )

    def observe(self, state: State, action: JointAction, next_state: State) -> None:
        self._qs, _ = _advance_machines(self.machines, state, self._qs)
        self._step += 1

    def memory(self) -> Hashable:
        return (self._step, self._qs)


def _pure_fallback(payoffs: List[np.ndarray]) -> NashProfile:
    """求解失败时取福利最高的纯策略组合"""
    welfare = sum(payoffs)
    profile = np.unravel_index(int(np.argmax(welfare)), welfare.shape)
    strategies = [np.eye(n)[a] for n, a in zip(welfare.shape, profile)]
    return NashProfile(strategies, expected_payoffs(payoffs, strategies))


def nash_value_iteration(
    model: EstimatedModel,
    machines: Sequence[RewardMachine],
    deadline: Optional[Deadline] = None,
) -> Tuple[NVIPolicy, int]:
    """
    在 M̃ × R_1 × ... × R_n 上做逐阶段一般和 Nash 值迭代

    H+1 个阶段；阶段博弈收益为 δ_r^i(s, q_i) + E[V_i(·, t+1)]

    Returns:
        (策略, 阶段求解失败次数)
    """
    joint_actions = [tuple(a) for a in itertools.product(*model.action_sets)]
    shape = tuple(len(a) for a in model.action_sets)
    stages = model.horizon + 1

    layers: List[set] = [set() for _ in range(stages)]
    initial = (model.initial_state, tuple(m.initial for m in machines))
    layers[0].add(initial)
    queue = deque([(0, initial)])
    while queue:
        stage, (state, qs) = queue.popleft()
        if stage + 1 >= stages:
            continue
        qs_next, _ = _advance_machines(machines, state, qs)
        for action in joint_actions:
            for successor in model.successors(state, action):
                key = (successor, qs_next)
                if key not in layers[stage + 1]:
                    layers[stage + 1].add(key)
                    queue.append((stage + 1, key))

    values: Dict[NVIKey, np.ndarray] = {}
    strategies: Dict[Tuple[int, NVIKey], List[np.ndarray]] = {}
    failures = 0
    for stage in reversed(range(stages)):
        if deadline is not None:
            deadline.check("NVI")
        layer_values: Dict[NVIKey, np.ndarray] = {}
        for key in layers[stage]:
            state, qs = key
            qs_next, rewards = _advance_machines(machines, state, qs)
            if stage == stages - 1:
                layer_values[key] = np.asarray(rewards, dtype=float)
                continue
            payoffs = [np.full(shape, float(r)) for r in rewards]
            for action in joint_actions:
                for successor, p in model.successors(state, action).items():
                    future = values.get((successor, qs_next))
                    if future is None:
                        continue
                    for i in range(len(machines)):
                        payoffs[i][action] += p * future[i]
            try:
                profile = best_nash_general_sum(payoffs)
            except NoEquilibriumError:
                failures += 1
                profile = _pure_fallback(payoffs)
            strategies[(stage, key)] = profile.strategies
            layer_values[key] = profile.values
        values = layer_values

    logger.debug(f"NVI 完成: {sum(len(layer) for layer in layers)} 个乘积状态, 求解失败 {failures} 次")
    return NVIPolicy(strategies, machines, model.action_sets), failures


class MAQRMPolicy:
    """各智能体按自己的 Q 表贪心选择动作"""

    def __init__(
        self,
        q_tables: List[Dict[NVIKey, np.ndarray]],
        machines: Sequence[RewardMachine],
        action_sets: Sequence[Sequence[int]],
    ):
        self.q_tables = q_tables
        self.machines = list(machines)
        self.action_sets = [tuple(a) for a in action_sets]
        self.reset()

    def reset(self) -> None:
        self._qs: RMStates = tuple(m.initial for m in self.machines)

    def act(self, state: State, step: int, rng: np.random.Generator) -> JointAction:
        key = (state, self._qs)
        action = []
        for table, actions in zip(self.q_tables, self.action_sets):
            values = table.get(key)
            action.append(actions[int(np.argmax(values))] if values is not None else actions[0])
        return tuple(action)

    def observe(self, state: State, action: JointAction, next_state: State) -> None:
        self._qs, _ = _advance_machines(self.machines, state, self._qs)

    def memory(self) -> Hashable:
        return self._qs


def train_maqrm(
    game: GameModel,
    machines: Sequence[RewardMachine],
    hyper: Hyperparameters,
    rng: np.random.Generator,
    deadline: Optional[Deadline] = None,
) -> MAQRMPolicy:
    """
    独立 ε-greedy Q学习，状态为 (s, q_1..q_n)，奖励为 δ_r^i(s, q_i)

    终止：时域用完或所有奖励机都已进入接受吸收态或死状态；终止转移的目标值加上 δ_r^i(s', q'_i)
    """
    sizes = [len(a) for a in game.action_sets]
    q_tables: List[Dict[NVIKey, np.ndarray]] = [
        defaultdict(lambda n=n: np.zeros(n)) for n in sizes
    ]
    used = 0
    episodes = 0
    while used < hyper.maqrm_steps:
        if deadline is not None and episodes % 100 == 0:
            deadline.check("MAQRM")
        episodes += 1
        state = game.initial_state
        qs: RMStates = tuple(m.initial for m in machines)
        for step in range(game.horizon):
            key = (state, qs)
            indices = [
                int(rng.integers(n)) if rng.random() < hyper.q_epsilon else int(np.argmax(table[key]))
                for n, table in zip(sizes, q_tables)
            ]
            action = tuple(actions[k] for actions, k in zip(game.action_sets, indices))
            next_state = game.sample_next(state, action, rng)
            used += 1
            qs_next, rewards = _advance_machines(machines, state, qs)
            terminal = step + 1 == game.horizon or all(
                m.is_settled(q) for m, q in zip(machines, qs_next)
            )
            if terminal:
                _, final_rewards = _advance_machines(machines, next_state, qs_next)
            next_key = (next_state, qs_next)
            for i, table in enumerate(q_tables):
                target = float(rewards[i])
                if terminal:
                    target += final_rewards[i]
                else:
                    target += hyper.q_discount * float(table[next_key].max())
                table[key][indices[i]] += hyper.q_learning_rate * (target - table[key][indices[i]])
            state, qs = next_state, qs_next
            if terminal or used >= hyper.maqrm_steps:
                break

    logger.debug(f"MAQRM 训练完成: {episodes} 个回合, {used} 步")
    return MAQRMPolicy([dict(t) for t in q_tables], machines, game.action_sets)


class DeviationPolicy:
    """智能体 agent 按自己的 Q 表行动，其余智能体照常执行基础策略（基础策略能观察到偏离）"""

    def __init__(
        self,
        base: JointPolicy,
        agent: int,
        machine: RewardMachine,
        q_table: Dict[Hashable, np.ndarray],
        actions: Sequence[int],
    ):
        self.base = base
        self.agent = agent
        self.machine = machine
        self.q_table = q_table
        self.actions = tuple(actions)
        self.reset()

    def reset(self) -> None:
        self.base.reset()
        self._q = self.machine.initial

    @property
    def rm_state(self) -> int:
        return self._q

    def key(self, state: State) -> Hashable:
        return (state, self.base.memory(), self._q)

    def act(self, state: State, step: int, rng: np.random.Generator) -> JointAction:
        action = list(self.base.act(state, step, rng))
        values = self.q_table.get(self.key(state))
        if values is not None:
            action[self.agent] = self.actions[int(np.argmax(values))]
        return tuple(action)

    def observe(self, state: State, action: JointAction, next_state: State) -> None:
        self.base.observe(state, action, next_state)
        self._q = self.machine.update(state, action, self._q)

    def memory(self) -> Hashable:
        return (self.base.memory(), self._q)


def best_response(
    game: GameModel,
    policy: JointPolicy,
    agent: int,
    machine: RewardMachine,
    hyper: Hyperparameters,
    rng: np.random.Generator,
) -> DeviationPolicy:
    """对冻结的 π_{-agent} 做最优响应 Q学习，状态为 (s, π 的记忆, q_agent)"""
    actions = game.action_sets[agent]
    q_table: Dict[Hashable, np.ndarray] = defaultdict(lambda: np.zeros(len(actions)))
    deviation = DeviationPolicy(policy, agent, machine, q_table, actions)
    used = 0
    while used < hyper.best_response_steps:
        deviation.reset()
        state = game.initial_state
        for step in range(game.horizon):
            key = deviation.key(state)
            action = list(policy.act(state, step, rng))
            if rng.random() < hyper.q_epsilon:
                index = int(rng.integers(len(actions)))
            else:
                index = int(np.argmax(q_table[key]))
            action[agent] = actions[index]
            action = tuple(action)
            next_state = game.sample_next(state, action, rng)
            used += 1
            q_before = deviation.rm_state
            deviation.observe(state, action, next_state)
            reward = machine.reward_for(q_before, deviation.rm_state)
            terminal = step + 1 == game.horizon or machine.is_settled(deviation.rm_state)
            target = float(reward)
            if terminal:
                target += machine.reward(next_state, deviation.rm_state)
            else:
                target += hyper.q_discount * float(q_table[deviation.key(next_state)].max())
            q_table[key][index] += hyper.q_learning_rate * (target - q_table[key][index])
            state = next_state
            if terminal or used >= hyper.best_response_steps:
                break
    deviation.q_table = dict(q_table)
    return deviation


def epsilon_min(
    game: GameModel,
    policy: JointPolicy,
    specs: Sequence[Spec],
    hyper: Hyperparameters,
    rng: np.random.Generator,
    machines: Optional[Sequence[RewardMachine]] = None,
) -> Tuple[float, List[float]]:
    """
    估计 ε_min(π) = max_i max(0, J_i(π_{-i}, br_i) - J_i(π))

    Returns:
        (ε_min, 各智能体的偏离收益)
    """
    machines = list(machines) if machines is not None else compile_machines(specs)
    samples = hyper.epsilon_min_samples
    base = estimate_scores(game, policy, specs, samples, rng, machines=machines)
    gains: List[float] = []
    for i, machine in enumerate(machines):
        deviation = best_response(game, policy, i, machine, hyper, rng)
        report = estimate_scores(game, deviation, specs, samples, rng, machines=machines)
        gains.append(max(0.0, report.scores[i] - base.scores[i]))
    policy.reset()
    value = max(gains) if gains else 0.0
    logger.info(f"ε_min = {value:.3f} (各智能体偏离收益 {np.round(gains, 3).tolist()})")
    return value, gains


def _evaluate(
    name: str,
    game: GameModel,
    policy: JointPolicy,
    specs: Sequence[Spec],
    machines: Sequence[RewardMachine],
    hyper: Hyperparameters,
    rng: np.random.Generator,
    seed: int,
    training_steps: int,
    started: float,
    note: str = "",
) -> RunResult:
    report = estimate_scores(game, policy, specs, hyper.welfare_samples, rng, machines=machines)
    eps, _ = epsilon_min(game, policy, specs, hyper, rng, machines=machines)
    return RunResult(
        spec="",
        algorithm=name,
        seed=seed,
        welfare=report.welfare,
        epsilon_min=eps,
        scores=report.scores,
        enumeration_steps=training_steps,
        wall_time=time.monotonic() - started,
        note=note,
    )


def run_nvi(
    game: GameModel,
    specs: Sequence[Spec],
    hyper: Hyperparameters,
    seed: int = 0,
    deadline: Optional[Deadline] = None,
) -> RunResult:
    """在估计模型上运行 NVI，并评估福利与 ε_min"""
    started = time.monotonic()
    rng = np.random.default_rng(seed)
    machines = compile_machines(specs)
    steps_before = game.sample_steps
    model = estimate_model(game, resolve_samples(game, hyper), seed, hyper.max_model_states)
    policy, failures = nash_value_iteration(model, machines, deadline)
    notes = []
    if len(specs) >= 3:
        notes.append("scoped solver")
    if failures:
        notes.append(f"{failures} 次阶段求解失败")
    return _evaluate(
        "nvi",
        game,
        policy,
        specs,
        machines,
        hyper,
        rng,
        seed,
        training_steps=game.sample_steps - steps_before,
        started=started,
        note="; ".join(notes),
    )


def run_maqrm(
    game: GameModel,
    specs: Sequence[Spec],
    hyper: Hyperparameters,
    seed: int = 0,
    deadline: Optional[Deadline] = None,
) -> RunResult:
    """训练 MAQRM，并评估福利与 ε_min"""
    started = time.monotonic()
    rng = np.random.default_rng(seed)
    machines = compile_machines(specs)
    steps_before = game.sample_steps
    policy = train_maqrm(game, machines, hyper, rng, deadline)
    return _evaluate(
        "maqrm",
        game,
        policy,
        specs,
        machines,
        hyper,
        rng,
        seed,
        training_steps=game.sample_steps - steps_before,
        started=started,
    )
