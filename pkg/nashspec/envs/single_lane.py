"""
单车道环境
k 个智能体从位置 0 出发沿长度为 l 的直线前进，终点 l 为吸收状态
"""

from typing import Any, Dict, Optional

from ..models.spec import AtomicPredicate, JointAction, State
from .base import Distribution, GameModel, independent_moves

STAY, MOVE = 0, 1


class SingleLaneGame(GameModel):
    """单车道竞速博弈"""

    name = "single_lane"

    def __init__(
        self,
        agents: int = 3,
        length: int = 4,
        mid: int = 2,
        horizon: int = 14,
        success_prob: float = 0.95,
    ):
        """
        初始化单车道环境

        Args:
            agents: 智能体数 k
            length: 车道长度 l
            mid: 中点位置
            horizon: 时域
            success_prob: MOVE 成功前进的概率
        """
        if agents < 1 or length < 1:
            raise ValueError("智能体数与车道长度至少为1")
        if not 0 <= mid <= length:
            raise ValueError("中点必须位于车道之内")
        self.length = length
        self.mid = mid
        self.success_prob = success_prob
        super().__init__(
            action_sets=[(STAY, MOVE)] * agents,
            horizon=horizon,
            initial_state=tuple([0] * agents),
        )

    def _move(self, position: int, action: int) -> Distribution:
        if action == STAY or position >= self.length:
            return {position: 1.0}
        return {position + 1: self.success_prob, position: 1.0 - self.success_prob}

    def _transitions(self, state: State, action: JointAction) -> Distribution:
        return independent_moves([self._move(p, a) for p, a in zip(state, action)])

    def predicate_table(self) -> Dict[str, AtomicPredicate]:
        """end_i / short_i / mid_i / below_mid_i"""
        table: Dict[str, AtomicPredicate] = {}
        length, mid = self.length, self.mid
        for i in range(self.num_agents):
            table[f"end_{i}"] = AtomicPredicate(f"end_{i}", lambda s, i=i: s[i] == length)
            table[f"short_{i}"] = AtomicPredicate(f"short_{i}", lambda s, i=i: s[i] < length)
            table[f"mid_{i}"] = AtomicPredicate(f"mid_{i}", lambda s, i=i: s[i] >= mid)
            table[f"below_mid_{i}"] = AtomicPredicate(f"below_mid_{i}", lambda s, i=i: s[i] < mid)
        return table

    def state_space_size(self) -> Optional[int]:
        return (self.length + 1) ** self.num_agents

    def params(self) -> Dict[str, Any]:
        return {
            "agents": self.num_agents,
            "length": self.length,
            "mid": self.mid,
            "success_prob": self.success_prob,
        }
