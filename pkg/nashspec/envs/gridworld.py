"""
网格世界环境
两个智能体位于 4×4 网格的对角，每步可停留或向四个方向移动，越界的移动被截断
"""

from typing import Any, Dict, Optional, Sequence, Tuple

from ..models.spec import AtomicPredicate, JointAction, State
from .base import Distribution, GameModel, independent_moves

STAY, UP, DOWN, LEFT, RIGHT = range(5)
OFFSETS = {STAY: (0, 0), UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}

Cell = Tuple[int, int]


class GridworldGame(GameModel):
    """网格世界多智能体博弈"""

    name = "gridworld"

    def __init__(
        self,
        size: int = 4,
        starts: Sequence[Cell] = ((0, 0), (3, 3)),
        horizon: int = 10,
        fail_prob: float = 0.05,
    ):
        """
        初始化网格世界

        Args:
            size: 网格边长
            starts: 各智能体的初始格子
            horizon: 时域
            fail_prob: 移动失败（原地不动）的概率
        """
        if size < 2:
            raise ValueError("网格边长至少为2")
        for row, col in starts:
            if not (0 <= row < size and 0 <= col < size):
                raise ValueError(f"初始格子越界: {(row, col)}")
        self.size = size
        self.fail_prob = fail_prob
        super().__init__(
            action_sets=[tuple(OFFSETS)] * len(starts),
            horizon=horizon,
            initial_state=tuple(tuple(cell) for cell in starts),
        )

    def _clip(self, value: int) -> int:
        return min(max(value, 0), self.size - 1)

    def _move(self, cell: Cell, action: int) -> Distribution:
        dr, dc = OFFSETS[action]
        target = (self._clip(cell[0] + dr), self._clip(cell[1] + dc))
        if target == cell:
            return {cell: 1.0}
        return {target: 1.0 - self.fail_prob, cell: self.fail_prob}

    def _transitions(self, state: State, action: JointAction) -> Distribution:
        return independent_moves([self._move(c, a) for c, a in zip(state, action)])

    def corners(self) -> Dict[str, Cell]:
        last = self.size - 1
        return {f"{r}{c}": (r, c) for r in (0, last) for c in (0, last)}

    def predicate_table(self) -> Dict[str, AtomicPredicate]:
        """at_i_rc 表示智能体 i 位于角落 (r, c)；safe 表示两两不同格"""
        table: Dict[str, AtomicPredicate] = {}
        for i in range(self.num_agents):
            for label, cell in self.corners().items():
                name = f"at_{i}_{label}"
                table[name] = AtomicPredicate(name, lambda s, i=i, cell=cell: s[i] == cell)
        table["safe"] = AtomicPredicate("safe", lambda s: len(set(s)) == len(s))
        return table

    def state_space_size(self) -> Optional[int]:
        return (self.size * self.size) ** self.num_agents

    def params(self) -> Dict[str, Any]:
        return {
            "size": self.size,
            "starts": [list(c) for c in self.initial_state],
            "fail_prob": self.fail_prob,
        }
