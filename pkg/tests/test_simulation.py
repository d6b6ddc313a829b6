"""
仿真与超时测试
"""

import time

import pytest

from nashspec.models.errors import RunTimeoutError
from nashspec.models.policy import ConstantPolicy, StationaryPolicy
from nashspec.services.deadline import Deadline
from nashspec.services.simulation import estimate_scores, sample_trajectory
from nashspec.services.spec_parser import parse_spec


class TestSimulation:
    """轨迹采样与满足概率估计测试"""

    def test_trajectory_length(self, punishment_game, rng):
        """测试轨迹包含 H+1 个状态"""
        trajectory = sample_trajectory(punishment_game, ConstantPolicy((1, 0)), rng)
        assert trajectory.states == ("s0", "mid", "g0")
        assert trajectory.actions == ((1, 0), (1, 0))

    def test_custom_start(self, punishment_game, rng):
        """测试从任意观察过的状态继续采样"""
        trajectory = sample_trajectory(punishment_game, ConstantPolicy((0, 0)), rng, start="mid", steps=1)
        assert trajectory.states == ("mid", "g0")

    def test_stationary_policy(self, coordination_game, rng):
        """测试查表策略与默认动作"""
        policy = StationaryPolicy({"s0": (1, 1)}, default=(0, 0))
        assert sample_trajectory(coordination_game, policy, rng).states[-1] == "both"
        assert policy.act("g0", 0, rng) == (0, 0)

    def test_estimate_scores(self, coin_game, rng):
        """测试满足概率估计"""
        spec = parse_spec("achieve win", coin_game.predicate_table())
        report = estimate_scores(coin_game, ConstantPolicy((1,)), [spec], 4000, rng)
        assert report.scores[0] == pytest.approx(0.7, abs=0.03)
        assert report.std_errors[0] > 0
        assert report.welfare == report.scores[0]

    def test_welfare_is_mean(self, coordination_game, rng):
        """测试社会福利是各智能体满足概率的均值"""
        table = coordination_game.predicate_table()
        specs = [parse_spec("achieve goal_0", table), parse_spec("achieve goal_1", table)]
        report = estimate_scores(coordination_game, ConstantPolicy((1, 0)), specs, 10, rng)
        assert report.scores == [1.0, 0.0]
        assert report.welfare == 0.5

    def test_bad_sample_count(self, coin_game, rng):
        """测试轨迹数至少为1"""
        spec = parse_spec("achieve win", coin_game.predicate_table())
        with pytest.raises(ValueError):
            estimate_scores(coin_game, ConstantPolicy((1,)), [spec], 0, rng)


class TestDeadline:
    """超时测试"""

    def test_no_limit(self):
        """测试未设置时限时不会超时"""
        Deadline(None).check("枚举")

    def test_expired(self):
        """测试超时抛出带阶段名的错误"""
        deadline = Deadline(0.0)
        time.sleep(0.01)
        with pytest.raises(RunTimeoutError) as info:
            deadline.check("验证")
        assert info.value.code == "TIMEOUT"
        assert "验证" in str(info.value)
