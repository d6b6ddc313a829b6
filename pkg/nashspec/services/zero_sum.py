"""
有限时域零和博弈的极小极大值迭代
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from ..models.game import MinMaxSolution, ZeroSumGame
from .matrix_solver import solve_matrix_game


def stage_matrix(game: ZeroSumGame, state: int, next_values: Dict[int, float]) -> np.ndarray:
    """Q(x, t)[a1, a2] = r(x, a1, a2) + E[V(x', t+1)]"""
    matrix = np.array(game.rewards[state], dtype=float)
    for a1 in range(game.num_max_actions):
        for a2 in range(game.num_min_actions):
            distribution = game.transitions.get((state, a1, a2))
            if distribution:
                matrix[a1, a2] += sum(p * next_values.get(x, 0.0) for x, p in distribution.items())
    return matrix


def minmax_value_iteration(game: ZeroSumGame, tolerance: Optional[float] = None) -> MinMaxSolution:
    """
    逆向归纳求解有限时域零和博弈

    V(·, horizon) = 0；每个 (阶段, 状态) 求解一个阶段矩阵博弈

    Args:
        game: 零和博弈
        tolerance: 矩阵博弈求解容差

    Returns:
        初始状态在第0阶段的值以及双方逐阶段混合策略
    """
    values: List[Dict[int, float]] = [dict() for _ in range(game.horizon + 1)]
    max_policy: Dict[Tuple[int, int], np.ndarray] = {}
    min_policy: Dict[Tuple[int, int], np.ndarray] = {}

    for stage in reversed(range(game.horizon)):
        for state in game.states_at(stage):
            outcome = solve_matrix_game(stage_matrix(game, state, values[stage + 1]), tolerance)
            values[stage][state] = outcome.value
            max_policy[(stage, state)] = outcome.row_strategy
            min_policy[(stage, state)] = outcome.col_strategy

    value = values[0].get(game.initial, 0.0) if game.horizon > 0 else 0.0
    logger.debug(f"值迭代完成: {game.num_states} 个状态, {game.horizon} 个阶段, 初始值 {value:.6f}")
    return MinMaxSolution(value=value, values=values, max_policy=max_policy, min_policy=min_policy)
