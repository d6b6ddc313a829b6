"""
阶段博弈求解测试
"""

import numpy as np
import pytest

from nashspec.models.errors import SolverError
from nashspec.services.matrix_solver import (
    _simplex_max,
    best_nash_general_sum,
    max_regret,
    pure_equilibria,
    solve_matrix_game,
)


def assert_optimal(payoff, outcome, tolerance=1e-7):
    """行策略保证不低于值，列策略保证不高于值"""
    payoff = np.asarray(payoff, dtype=float)
    assert outcome.row_strategy.sum() == pytest.approx(1.0)
    assert outcome.col_strategy.sum() == pytest.approx(1.0)
    assert (outcome.row_strategy >= 0).all() and (outcome.col_strategy >= 0).all()
    assert (outcome.row_strategy @ payoff).min() >= outcome.value - tolerance
    assert (payoff @ outcome.col_strategy).max() <= outcome.value + tolerance


class TestZeroSumMatrix:
    """零和矩阵博弈测试"""

    def test_matching_pennies(self):
        """测试猜硬币的值为0且双方均匀混合"""
        payoff = np.array([[1.0, -1.0], [-1.0, 1.0]])
        outcome = solve_matrix_game(payoff)
        assert outcome.value == pytest.approx(0.0, abs=1e-9)
        assert outcome.row_strategy == pytest.approx([0.5, 0.5])
        assert outcome.col_strategy == pytest.approx([0.5, 0.5])

    def test_pure_saddle(self):
        """测试纯策略鞍点直接返回"""
        outcome = solve_matrix_game(np.array([[3.0, 1.0], [4.0, 2.0]]))
        assert outcome.value == pytest.approx(2.0)
        assert outcome.row_strategy.tolist() == [0.0, 1.0]
        assert outcome.col_strategy.tolist() == [0.0, 1.0]

    def test_rock_paper_scissors(self):
        """测试石头剪刀布"""
        payoff = np.array([[0, -1, 1], [1, 0, -1], [-1, 1, 0]], dtype=float)
        outcome = solve_matrix_game(payoff)
        assert outcome.value == pytest.approx(0.0, abs=1e-9)
        assert outcome.row_strategy == pytest.approx([1 / 3] * 3)

    def test_rectangular(self):
        """测试非方阵"""
        payoff = np.array([[2.0, -1.0, 0.5], [-1.0, 1.0, 3.0]])
        outcome = solve_matrix_game(payoff)
        assert_optimal(payoff, outcome)

    def test_random_matrices(self):
        """测试100个随机矩阵上双方的可利用度不超过1e-8"""
        rng = np.random.default_rng(23)
        for _ in range(100):
            rows, cols = rng.integers(1, 9, size=2)
            payoff = rng.uniform(-1, 1, size=(rows, cols))
            outcome = solve_matrix_game(payoff)
            assert_optimal(payoff, outcome, tolerance=1e-8)
            assert outcome.value - (outcome.row_strategy @ payoff).min() <= 1e-8
            assert (payoff @ outcome.col_strategy).max() - outcome.value <= 1e-8
            expected = outcome.row_strategy @ payoff @ outcome.col_strategy
            assert outcome.value == pytest.approx(expected, abs=1e-9)

    def test_primal_dual_objectives_agree(self):
        """测试单纯形最终表格中原问题与对偶问题的目标值相等"""
        rng = np.random.default_rng(37)
        for _ in range(100):
            rows, cols = rng.integers(1, 9, size=2)
            shifted = rng.uniform(1, 3, size=(rows, cols))
            weights, dual, total = _simplex_max(shifted)
            assert weights.sum() == pytest.approx(total, abs=1e-9)
            assert dual.sum() == pytest.approx(total, abs=1e-9)
            assert (shifted @ weights <= 1 + 1e-9).all()
            assert (dual @ shifted >= 1 - 1e-9).all()

    def test_single_entry(self):
        """测试 1×1 矩阵"""
        assert solve_matrix_game(np.array([[0.3]])).value == pytest.approx(0.3)

    @pytest.mark.parametrize("payoff", [np.zeros((0, 2)), np.array([[np.nan, 1.0]])])
    def test_bad_matrix(self, payoff):
        """测试空矩阵与非有限值"""
        with pytest.raises(SolverError) as info:
            solve_matrix_game(payoff)
        assert info.value.code == "BAD_MATRIX"


class TestGeneralSum:
    """一般和阶段博弈测试"""

    def test_single_player(self):
        """测试一人时取最优动作"""
        profile = best_nash_general_sum([np.array([0.2, 0.9, 0.5])])
        assert profile.strategies[0].tolist() == [0.0, 1.0, 0.0]
        assert profile.welfare == pytest.approx(0.9)

    def test_coordination_picks_best(self):
        """测试协调博弈选福利最高的均衡"""
        payoff = np.array([[1.0, 0.0], [0.0, 2.0]])
        profile = best_nash_general_sum([payoff, payoff])
        assert profile.welfare == pytest.approx(4.0)
        assert profile.strategies[0].tolist() == [0.0, 1.0]

    def test_prisoners_dilemma(self):
        """测试囚徒困境只有背叛均衡"""
        row = np.array([[3.0, 0.0], [5.0, 1.0]])
        profile = best_nash_general_sum([row, row.T])
        assert pure_equilibria([row, row.T], 1e-9) == [(1, 1)]
        assert profile.welfare == pytest.approx(2.0)

    def test_mixed_equilibrium(self):
        """测试没有纯均衡时由支撑枚举给出混合均衡"""
        payoff = np.array([[1.0, -1.0], [-1.0, 1.0]])
        profile = best_nash_general_sum([payoff, -payoff])
        assert profile.strategies[0] == pytest.approx([0.5, 0.5])
        assert profile.welfare == pytest.approx(0.0, abs=1e-9)

    def test_ties_prefer_first(self):
        """测试福利相同的均衡取字典序第一个"""
        payoff = np.eye(2)
        profile = best_nash_general_sum([payoff, payoff])
        assert profile.strategies[0].tolist() == [1.0, 0.0]
        assert profile.strategies[1].tolist() == [1.0, 0.0]

    def test_three_players(self):
        """测试三人博弈在纯策略均衡中选最高福利"""
        tensor = np.zeros((2, 2, 2))
        tensor[1, 1, 1] = 1.0
        profile = best_nash_general_sum([tensor, tensor, tensor])
        assert profile.welfare == pytest.approx(3.0)
        assert max_regret([tensor] * 3, profile.strategies) <= 1e-9
