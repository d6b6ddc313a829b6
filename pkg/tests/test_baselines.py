"""
对比基线与 ε_min 测试
"""

import numpy as np
import pytest

from nashspec.models.policy import ConstantPolicy
from nashspec.services.baselines import (
    epsilon_min,
    nash_value_iteration,
    run_maqrm,
    run_nvi,
    train_maqrm,
)
from nashspec.services.model_estimator import bfs_estimate
from nashspec.services.simulation import compile_machines, estimate_scores
from nashspec.services.spec_parser import parse_spec


def parse_all(game, *texts):
    table = game.predicate_table()
    return [parse_spec(text, table) for text in texts]


class TestNashValueIteration:
    """NVI 测试"""

    def test_coordination_game(self, coordination_game, rng):
        """测试阶段博弈选福利最高的均衡 (1, 1)"""
        specs = parse_all(coordination_game, "achieve goal_0", "achieve goal_1")
        model = bfs_estimate(coordination_game, 5, rng)
        policy, failures = nash_value_iteration(model, compile_machines(specs))
        assert failures == 0
        policy.reset()
        assert policy.act("s0", 0, rng) == (1, 1)
        report = estimate_scores(coordination_game, policy, specs, 20, rng)
        assert report.welfare == pytest.approx(1.0)

    def test_memory_tracks_machines(self, coordination_game, rng):
        """测试策略记忆包含阶段与奖励机状态"""
        specs = parse_all(coordination_game, "achieve goal_0", "achieve goal_1")
        machines = compile_machines(specs)
        policy, _ = nash_value_iteration(bfs_estimate(coordination_game, 5, rng), machines)
        policy.reset()
        policy.observe("s0", (1, 1), "both")
        step, _ = policy.memory()
        assert step == 1

    def test_run_nvi(self, coordination_game, fast_hyper):
        """测试 NVI 运行结果"""
        specs = parse_all(coordination_game, "achieve goal_0", "achieve goal_1")
        result = run_nvi(coordination_game, specs, fast_hyper, seed=0)
        assert result.algorithm == "nvi"
        assert result.welfare == pytest.approx(1.0)
        assert result.epsilon_min == pytest.approx(0.0, abs=1e-9)
        assert result.enumeration_steps > 0
        assert result.note == ""


class TestMAQRM:
    """MAQRM 测试"""

    def test_learns_better_action(self, coin_game, fast_hyper, rng):
        """测试单智能体时学到成功率更高的动作"""
        specs = parse_all(coin_game, "achieve win")
        policy = train_maqrm(coin_game, compile_machines(specs), fast_hyper, rng)
        policy.reset()
        assert policy.act("s0", 0, rng) == (1,)

    def test_run_maqrm(self, coordination_game, fast_hyper):
        """测试 MAQRM 运行结果字段"""
        specs = parse_all(coordination_game, "achieve goal_0", "achieve goal_1")
        result = run_maqrm(coordination_game, specs, fast_hyper, seed=1)
        assert result.algorithm == "maqrm"
        assert 0.0 <= result.welfare <= 1.0
        assert result.epsilon_min >= 0.0
        assert result.enumeration_steps >= fast_hyper.maqrm_steps


class TestEpsilonMin:
    """ε_min 测试"""

    def test_profitable_deviation(self, coordination_game, fast_hyper, rng):
        """测试每个智能体都能单独获利时 ε_min 为1"""
        specs = parse_all(coordination_game, "achieve goal_0", "achieve goal_1")
        value, gains = epsilon_min(coordination_game, ConstantPolicy((0, 0)), specs, fast_hyper, rng)
        assert value == pytest.approx(1.0)
        assert gains == pytest.approx([1.0, 1.0])

    def test_equilibrium_has_no_gain(self, coordination_game, fast_hyper):
        """测试双方都已满足时没有偏离收益"""
        specs = parse_all(coordination_game, "achieve goal_0", "achieve goal_1")
        value, _ = epsilon_min(
            coordination_game, ConstantPolicy((1, 1)), specs, fast_hyper, np.random.default_rng(4)
        )
        assert value == 0.0
