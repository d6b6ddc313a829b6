"""
博弈求解相关数据模型
"""

from dataclasses import dataclass
from typing import Dict, Hashable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .spec import JointAction, State


@dataclass
class StageOutcome:
    """矩阵博弈的解：值与双方混合策略（行玩家最大化）"""

    value: float
    row_strategy: np.ndarray
    col_strategy: np.ndarray


@dataclass
class ZeroSumGame:
    """
    两人零和有限时域博弈

    transitions 缺失的 (状态, 最大方动作, 最小方动作) 视为终止；
    rewards[x, a1, a2] 是阶段奖励，horizon 是阶段数
    """

    num_states: int
    num_max_actions: int
    num_min_actions: int
    transitions: Dict[Tuple[int, int, int], Dict[int, float]]
    rewards: np.ndarray
    horizon: int
    initial: int = 0
    stage_states: Optional[List[Set[int]]] = None

    def __post_init__(self):
        expected = (self.num_states, self.num_max_actions, self.num_min_actions)
        if self.rewards.shape != expected:
            raise ValueError(f"奖励张量形状应为 {expected}，实际为 {self.rewards.shape}")
        for key, distribution in self.transitions.items():
            total = sum(distribution.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"转移概率之和必须为1: {key} -> {total}")

    def states_at(self, stage: int) -> Sequence[int]:
        if self.stage_states is None:
            return range(self.num_states)
        return sorted(self.stage_states[stage])


@dataclass
class MinMaxSolution:
    """极小极大值迭代结果；策略按 (阶段, 状态) 索引"""

    value: float
    values: List[Dict[int, float]]
    max_policy: Dict[Tuple[int, int], np.ndarray]
    min_policy: Dict[Tuple[int, int], np.ndarray]


@dataclass
class EstimatedModel:
    """
    广度优先估计得到的模型 M̃

    未发现的后继概率视为 0；depth 记录每个状态首次被发现的步数
    """

    initial_state: State
    action_sets: Tuple[Tuple[int, ...], ...]
    horizon: int
    probabilities: Dict[State, Dict[JointAction, Dict[State, float]]]
    depth: Dict[State, int]
    samples_per_pair: int
    sample_steps: int = 0
    fingerprint: str = ""

    @property
    def states(self) -> List[State]:
        return list(self.depth)

    @property
    def num_agents(self) -> int:
        return len(self.action_sets)

    def successors(self, state: State, action: JointAction) -> Dict[State, float]:
        """P̃(·|s, a)；未展开的状态保持不动"""
        return self.probabilities.get(state, {}).get(tuple(action), {state: 1.0})


@dataclass
class PunishmentGame:
    """
    智能体 j 的惩罚博弈：环境 × 策略记忆 × 奖励机 × 偏离标志 的乘积

    max 方为偏离者 j，min 方为其余智能体的联合动作
    """

    agent: int
    game: ZeroSumGame
    states: List[Tuple[State, Hashable, int, bool]]
    index: Dict[Tuple[int, Tuple[State, Hashable, int, bool]], int]
    max_actions: List[int]
    min_actions: List[JointAction]

    def lookup(self, stage: int, state: State, memory: Hashable, q: int, deviated: bool) -> Optional[int]:
        return self.index.get((stage, (state, memory, q, deviated)))

