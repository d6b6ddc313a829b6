"""
阶段博弈求解服务
零和矩阵博弈的单纯形法求解，以及一般和阶段博弈的最高福利Nash均衡
"""

import itertools
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import nashpy as nash
import numpy as np
from loguru import logger

from config.settings import settings

from ..models.errors import NoEquilibriumError, SolverError
from ..models.game import StageOutcome

_PIVOT_EPS = 1e-12


def _simplex_max(constraints: np.ndarray, max_iterations: int = 10000) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    稠密表格单纯形法求 max 1ᵀw s.t. A w ≤ 1, w ≥ 0（Bland规则）

    Returns:
        (原问题解 w, 对偶解 u, 最优值)
    """
    rows, cols = constraints.shape
    tableau = np.hstack([constraints, np.eye(rows), np.ones((rows, 1))]).astype(float)
    objective = np.concatenate([-np.ones(cols), np.zeros(rows + 1)])
    basis = list(range(cols, cols + rows))

    for _ in range(max_iterations):
        candidates = np.where(objective[:-1] < -_PIVOT_EPS)[0]
        if candidates.size == 0:
            break
        entering = int(candidates[0])
        column = tableau[:, entering]
        positive = np.where(column > _PIVOT_EPS)[0]
        if positive.size == 0:
            raise SolverError("线性规划无界", code="LP_UNBOUNDED")
        ratios = tableau[positive, -1] / column[positive]
        best = ratios.min()
        ties = [int(r) for r in positive[np.isclose(ratios, best, rtol=0, atol=1e-12)]]
        leaving = min(ties, key=lambda r: basis[r])

        tableau[leaving] /= tableau[leaving, entering]
        for r in range(rows):
            if r != leaving and tableau[r, entering] != 0:
                tableau[r] -= tableau[r, entering] * tableau[leaving]
        objective -= objective[entering] * tableau[leaving]
        basis[leaving] = entering
    else:
        raise SolverError("单纯形法迭代次数超限", code="LP_ITERATIONS")

    primal = np.zeros(cols + rows)
    for r, variable in enumerate(basis):
        primal[variable] = tableau[r, -1]
    dual = objective[cols:cols + rows].copy()
    return primal[:cols], dual, float(objective[-1])


def _pure_saddle(payoff: np.ndarray, tolerance: float) -> Optional[Tuple[int, int]]:
    row_floor = payoff.min(axis=1)
    col_ceiling = payoff.max(axis=0)
    if abs(row_floor.max() - col_ceiling.min()) <= tolerance:
        return int(row_floor.argmax()), int(col_ceiling.argmin())
    return None


def solve_matrix_game(payoff: np.ndarray, tolerance: Optional[float] = None) -> StageOutcome:
    """
    求解零和矩阵博弈（行玩家最大化，列玩家最小化）

    先检查纯策略鞍点；否则把收益平移为正数，
    解列玩家的线性规划并从最终表格读出行玩家的对偶策略

    Args:
        payoff: m×n 收益矩阵
        tolerance: 数值容差

    Returns:
        极小极大值与双方最优混合策略

    Raises:
        SolverError: 矩阵非法或单纯形失败
    """
    tolerance = settings.solver_tolerance if tolerance is None else tolerance
    matrix = np.atleast_2d(np.asarray(payoff, dtype=float))
    if matrix.size == 0 or not np.all(np.isfinite(matrix)):
        raise SolverError("收益矩阵必须非空且有限", code="BAD_MATRIX")
    rows, cols = matrix.shape

    saddle = _pure_saddle(matrix, tolerance)
    if saddle is not None:
        i, j = saddle
        return StageOutcome(float(matrix[i, j]), np.eye(rows)[i], np.eye(cols)[j])

    shift = 1.0 - matrix.min()
    weights, dual, total = _simplex_max(matrix + shift)
    if total <= 0:
        raise SolverError("线性规划最优值非正", code="LP_DEGENERATE")
    col_strategy = np.clip(weights / total, 0.0, None)
    row_strategy = np.clip(dual / dual.sum(), 0.0, None)
    value = 1.0 / total - shift
    return StageOutcome(
        value=float(value),
        row_strategy=row_strategy / row_strategy.sum(),
        col_strategy=col_strategy / col_strategy.sum(),
    )


@dataclass
class NashProfile:
    """一般和阶段博弈的均衡：各玩家混合策略与期望收益"""

    strategies: List[np.ndarray]
    values: np.ndarray

    @property
    def welfare(self) -> float:
        return float(self.values.sum())


def expected_payoffs(payoffs: Sequence[np.ndarray], strategies: Sequence[np.ndarray]) -> np.ndarray:
    """各玩家在混合策略组合下的期望收益"""
    values = []
    for tensor in payoffs:
        value = np.asarray(tensor, dtype=float)
        for strategy in strategies:
            value = np.tensordot(strategy, value, axes=(0, 0))
        values.append(float(value))
    return np.array(values)


def deviation_payoffs(payoffs: Sequence[np.ndarray], strategies: Sequence[np.ndarray], player: int) -> np.ndarray:
    """玩家 player 在其他玩家策略固定时每个纯动作的收益"""
    value = np.moveaxis(np.asarray(payoffs[player], dtype=float), player, -1)
    for k, strategy in enumerate(strategies):
        if k != player:
            value = np.tensordot(strategy, value, axes=(0, 0))
    return value


def max_regret(payoffs: Sequence[np.ndarray], strategies: Sequence[np.ndarray]) -> float:
    """最大单方偏离收益"""
    values = expected_payoffs(payoffs, strategies)
    return max(
        float(deviation_payoffs(payoffs, strategies, i).max() - values[i])
        for i in range(len(payoffs))
    )


def pure_equilibria(payoffs: Sequence[np.ndarray], tolerance: float) -> List[Tuple[int, ...]]:
    """按字典序列出全部纯策略Nash均衡"""
    shape = np.asarray(payoffs[0]).shape
    found = []
    for profile in itertools.product(*(range(n) for n in shape)):
        stable = True
        for i, tensor in enumerate(payoffs):
            index = list(profile)
            index[i] = slice(None)
            if np.asarray(tensor)[tuple(index)].max() > tensor[profile] + tolerance:
                stable = False
                break
        if stable:
            found.append(profile)
    return found


def _fictitious_play(payoffs: Sequence[np.ndarray], iterations: int = 2000) -> List[np.ndarray]:
    shape = np.asarray(payoffs[0]).shape
    counts = [np.ones(n) for n in shape]
    for _ in range(iterations):
        strategies = [c / c.sum() for c in counts]
        for i in range(len(payoffs)):
            counts[i][int(deviation_payoffs(payoffs, strategies, i).argmax())] += 1
    return [c / c.sum() for c in counts]


def best_nash_general_sum(payoffs: Sequence[np.ndarray], tolerance: float = 1e-6) -> NashProfile:
    """
    求一般和阶段博弈中社会福利最高的Nash均衡

    一人时取最优动作；两人时枚举纯策略均衡并用支撑枚举补充混合均衡；
    三人及以上只搜索纯策略均衡、均匀混合与虚拟博弈得到的近似均衡。
    福利相同的均衡取先找到的（字典序）。

    Args:
        payoffs: 每个玩家的收益张量，形状相同
        tolerance: 判定均衡的容差

    Returns:
        最高福利的均衡

    Raises:
        NoEquilibriumError: 三人及以上时受限搜索未找到均衡
    """
    tensors = [np.asarray(p, dtype=float) for p in payoffs]
    shape = tensors[0].shape
    if len(tensors) == 1:
        best = int(np.argmax(tensors[0]))
        strategy = np.eye(shape[0])[best]
        return NashProfile([strategy], np.array([tensors[0][best]]))

    candidates: List[List[np.ndarray]] = [
        [np.eye(n)[a] for n, a in zip(shape, profile)]
        for profile in pure_equilibria(tensors, tolerance)
    ]

    if len(tensors) == 2:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            game = nash.Game(tensors[0], tensors[1])
            for row, col in game.support_enumeration():
                candidates.append([np.asarray(row, dtype=float), np.asarray(col, dtype=float)])
    else:
        uniform = [np.full(n, 1.0 / n) for n in shape]
        if max_regret(tensors, uniform) <= tolerance:
            candidates.append(uniform)
        if not candidates:
            played = _fictitious_play(tensors)
            if max_regret(tensors, played) <= 1e-3:
                candidates.append(played)

    if not candidates:
        raise NoEquilibriumError(f"受限搜索未找到 {len(tensors)} 人阶段博弈的均衡")

    best_profile: Optional[NashProfile] = None
    for strategies in candidates:
        profile = NashProfile(strategies, expected_payoffs(tensors, strategies))
        if best_profile is None or profile.welfare > best_profile.welfare + tolerance:
            best_profile = profile
    logger.debug(f"阶段博弈均衡数 {len(candidates)}，最高福利 {best_profile.welfare:.4f}")
    return best_profile
