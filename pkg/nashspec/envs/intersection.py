"""
十字路口环境

每辆车沿自己的车道向路口行驶，位置为非负整数：1 是路口，0 是路口另一侧，
大于1 在路口之前。MOVE 以 0.95 的概率把位置减一，0 是吸收状态。
两辆及以上的车同时处于位置 1 即为碰撞，其他位置不会碰撞。
"""

import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..models.spec import AtomicPredicate, JointAction, State
from .base import Distribution, GameModel, independent_moves

STAY, MOVE = 0, 1
AXES = ("ns", "ew")


class IntersectionGame(GameModel):
    """十字路口多车博弈"""

    name = "intersection"

    def __init__(
        self,
        cars: Sequence[Tuple[str, int]],
        horizon: int = 12,
        success_prob: float = 0.95,
    ):
        """
        初始化十字路口环境

        Args:
            cars: 每辆车的 (方向, 初始位置)，方向为 "ns" 或 "ew"
            horizon: 时域
            success_prob: MOVE 成功前进的概率
        """
        if not cars:
            raise ValueError("至少需要一辆车")
        for axis, start in cars:
            if axis not in AXES:
                raise ValueError(f"未知方向: {axis}")
            if start < 0:
                raise ValueError(f"初始位置不能为负: {start}")
        if not 0 <= success_prob <= 1:
            raise ValueError("前进概率必须在0-1之间")
        self.cars = [(axis, int(start)) for axis, start in cars]
        self.success_prob = success_prob
        super().__init__(
            action_sets=[(STAY, MOVE)] * len(self.cars),
            horizon=horizon,
            initial_state=tuple(start for _, start in self.cars),
        )

    def _move(self, position: int, action: int) -> Distribution:
        if action == STAY or position == 0:
            return {position: 1.0}
        return {position - 1: self.success_prob, position: 1.0 - self.success_prob}

    def _transitions(self, state: State, action: JointAction) -> Distribution:
        return independent_moves([self._move(p, a) for p, a in zip(state, action)])

    @staticmethod
    def collided(state: State, car: int) -> bool:
        """车辆 car 是否处于碰撞中"""
        return state[car] == 1 and sum(1 for p in state if p == 1) >= 2

    def predicate_table(self) -> Dict[str, AtomicPredicate]:
        """
        原子谓词

        crossed_i: 已通过路口; waiting_i: 尚未通过;
        safe_i: 未发生碰撞; ahead_i_j: 已通过或领先 j 至少一个车身
        """
        table: Dict[str, AtomicPredicate] = {}
        count = len(self.cars)
        for i in range(count):
            table[f"crossed_{i}"] = AtomicPredicate(f"crossed_{i}", lambda s, i=i: s[i] == 0)
            table[f"waiting_{i}"] = AtomicPredicate(f"waiting_{i}", lambda s, i=i: s[i] > 0)
            table[f"safe_{i}"] = AtomicPredicate(
                f"safe_{i}", lambda s, i=i: not IntersectionGame.collided(s, i)
            )
            for j in range(count):
                if i != j:
                    table[f"ahead_{i}_{j}"] = AtomicPredicate(
                        f"ahead_{i}_{j}", lambda s, i=i, j=j: s[i] == 0 or s[j] - s[i] >= 2
                    )
        table["no_collision"] = AtomicPredicate(
            "no_collision", lambda s: sum(1 for p in s if p == 1) < 2
        )
        return table

    def state_space_size(self) -> Optional[int]:
        return math.prod(start + 1 for _, start in self.cars)

    def params(self) -> Dict[str, Any]:
        return {"cars": [list(c) for c in self.cars], "success_prob": self.success_prob}

    def describe(self) -> List[str]:
        return [f"car {i}: {axis} @ {start}" for i, (axis, start) in enumerate(self.cars)]
