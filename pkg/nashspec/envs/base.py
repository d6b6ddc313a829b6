"""
有限时域多智能体马尔可夫博弈接口
"""

import bisect
import hashlib
import itertools
import json
from abc import ABC, abstractmethod
from collections import Counter
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..models.spec import AtomicPredicate, JointAction, State

Distribution = Dict[State, float]


class GameModel(ABC):
    """
    n 智能体马尔可夫博弈 M = (S, A, P, H, s0)

    采样接口显式接收当前状态，任何观察过的状态都可以直接作为起点继续采样
    """

    name = "game"

    def __init__(self, action_sets: Sequence[Sequence[int]], horizon: int, initial_state: State):
        """
        初始化博弈

        Args:
            action_sets: 每个智能体的动作集合
            horizon: 时域 H
            initial_state: 初始状态 s0
        """
        if horizon < 0:
            raise ValueError("时域不能为负")
        self.action_sets: Tuple[Tuple[int, ...], ...] = tuple(tuple(a) for a in action_sets)
        self.horizon = horizon
        self.initial_state = initial_state
        self.sample_steps = 0
        self._table: Dict[Tuple[State, JointAction], Tuple[List[State], List[float]]] = {}

    @property
    def num_agents(self) -> int:
        return len(self.action_sets)

    def joint_actions(self) -> List[JointAction]:
        """全部联合动作"""
        return [tuple(a) for a in itertools.product(*self.action_sets)]

    @abstractmethod
    def _transitions(self, state: State, action: JointAction) -> Distribution:
        """精确转移分布"""

    @abstractmethod
    def predicate_table(self) -> Dict[str, AtomicPredicate]:
        """环境提供的原子谓词"""

    @abstractmethod
    def params(self) -> Dict[str, Any]:
        """构造参数，用于指纹与序列化"""

    def state_space_size(self) -> Optional[int]:
        """|S| 的上界；未知时返回 None"""
        return None

    def transition_probabilities(self, state: State, action: JointAction) -> Distribution:
        """P(·|s, a)，只用于测试与预言机"""
        outcomes, cumulative = self._lookup(state, action)
        probabilities = np.diff([0.0] + cumulative)
        return {s: float(p) for s, p in zip(outcomes, probabilities)}

    def _lookup(self, state: State, action: JointAction) -> Tuple[List[State], List[float]]:
        key = (state, tuple(action))
        if key not in self._table:
            distribution = self._transitions(state, tuple(action))
            outcomes = [s for s, p in distribution.items() if p > 0]
            cumulative = list(np.cumsum([distribution[s] for s in outcomes]))
            cumulative[-1] = 1.0
            self._table[key] = (outcomes, cumulative)
        return self._table[key]

    def sample_next(self, state: State, action: JointAction, rng: np.random.Generator) -> State:
        """从 P(·|s, a) 采样一个后继状态"""
        outcomes, cumulative = self._lookup(state, action)
        self.sample_steps += 1
        if len(outcomes) == 1:
            return outcomes[0]
        return outcomes[bisect.bisect_right(cumulative, rng.random())]

    def sample_batch(
        self, state: State, action: JointAction, count: int, rng: np.random.Generator
    ) -> Counter:
        """一次多项分布抽样得到 count 个独立后继状态的计数"""
        outcomes, cumulative = self._lookup(state, action)
        self.sample_steps += count
        probabilities = np.diff([0.0] + cumulative)
        draws = rng.multinomial(count, probabilities)
        return Counter({s: int(n) for s, n in zip(outcomes, draws) if n > 0})

    def fingerprint(self) -> str:
        """环境参数的摘要，作为模型缓存键的一部分"""
        payload = json.dumps(
            {"env": self.name, "horizon": self.horizon, "params": self.params()},
            sort_keys=True,
            default=str,
        )
        return hashlib.md5(payload.encode("utf-8")).hexdigest()

    def reset_counter(self) -> int:
        """清零采样计数，返回清零前的值"""
        steps, self.sample_steps = self.sample_steps, 0
        return steps

    def __repr__(self) -> str:
        return f"{type(self).__name__}(agents={self.num_agents}, horizon={self.horizon})"


class TableGame(GameModel):
    """由显式转移表定义的博弈；缺失的 (状态, 动作) 视为自环"""

    name = "table"

    def __init__(
        self,
        action_sets: Sequence[Sequence[int]],
        horizon: int,
        initial_state: State,
        transitions: Mapping[Tuple[State, JointAction], Distribution],
        predicates: Optional[Mapping[str, Callable[[State], bool]]] = None,
    ):
        super().__init__(action_sets, horizon, initial_state)
        self.table = {(s, tuple(a)): dict(d) for (s, a), d in transitions.items()}
        self.predicates = dict(predicates or {})
        for (state, action), distribution in self.table.items():
            total = sum(distribution.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"转移概率之和必须为1: {state}, {action} -> {total}")

    def _transitions(self, state: State, action: JointAction) -> Distribution:
        return self.table.get((state, action), {state: 1.0})

    def predicate_table(self) -> Dict[str, AtomicPredicate]:
        return {name: AtomicPredicate(name, fn) for name, fn in self.predicates.items()}

    def state_space_size(self) -> Optional[int]:
        states = {self.initial_state}
        for (state, _), distribution in self.table.items():
            states.add(state)
            states.update(distribution)
        return len(states)

    def params(self) -> Dict[str, Any]:
        return {
            "actions": [list(a) for a in self.action_sets],
            "initial": repr(self.initial_state),
            "table": sorted(
                (repr(s), list(a), sorted((repr(t), p) for t, p in d.items()))
                for (s, a), d in self.table.items()
            ),
        }


def independent_moves(
    per_agent: Sequence[Distribution],
) -> Dict[Tuple, float]:
    """各分量独立时的联合分布（键为分量元组）"""
    joint: Dict[Tuple, float] = {(): 1.0}
    for distribution in per_agent:
        step: Dict[Tuple, float] = {}
        for prefix, p in joint.items():
            for value, q in distribution.items():
                key = prefix + (value,)
                step[key] = step.get(key, 0.0) + p * q
        joint = step
    return joint
