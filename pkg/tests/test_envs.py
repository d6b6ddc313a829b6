"""
基准环境测试
"""

import pytest

from nashspec.envs import GridworldGame, IntersectionGame, SingleLaneGame, TableGame, make_env


def all_distributions(game, states):
    for state in states:
        for action in game.joint_actions():
            yield state, action, game.transition_probabilities(state, action)


class TestIntersection:
    """十字路口环境测试"""

    def test_probabilities_sum_to_one(self):
        """测试每个转移分布的概率之和为1"""
        game = IntersectionGame(cars=[("ns", 2), ("ew", 3)])
        for _, _, distribution in all_distributions(game, [(2, 3), (1, 1), (0, 2)]):
            assert sum(distribution.values()) == pytest.approx(1.0)

    def test_move_and_stay(self):
        """测试 MOVE 以 0.95 前进，STAY 不动"""
        game = IntersectionGame(cars=[("ns", 2), ("ew", 3)])
        distribution = game.transition_probabilities((2, 3), (1, 0))
        assert distribution[(1, 3)] == pytest.approx(0.95)
        assert distribution[(2, 3)] == pytest.approx(0.05)

    def test_far_side_is_absorbing(self):
        """测试已通过路口的车辆停在 0"""
        game = IntersectionGame(cars=[("ns", 1)])
        assert game.transition_probabilities((0,), (1,)) == {(0,): 1.0}

    def test_collision_only_at_crossing(self):
        """测试只有同时位于位置1才算碰撞"""
        table = IntersectionGame(cars=[("ns", 2), ("ew", 2)]).predicate_table()
        assert not table["safe_0"].holds((1, 1))
        assert table["safe_0"].holds((0, 0))
        assert table["safe_0"].holds((2, 2))
        assert not table["no_collision"].holds((1, 1))

    def test_predicates(self):
        """测试通过与领先谓词"""
        table = IntersectionGame(cars=[("ns", 2), ("ew", 4)]).predicate_table()
        assert table["crossed_0"].holds((0, 4))
        assert table["waiting_1"].holds((0, 4))
        assert table["ahead_0_1"].holds((2, 4))
        assert not table["ahead_0_1"].holds((2, 3))

    def test_state_space_size(self):
        """测试状态空间大小"""
        game = IntersectionGame(cars=[("ns", 2), ("ew", 3)])
        assert game.state_space_size() == 12

    def test_invalid_cars(self):
        """测试非法参数"""
        with pytest.raises(ValueError):
            IntersectionGame(cars=[])
        with pytest.raises(ValueError):
            IntersectionGame(cars=[("up", 2)])


class TestSingleLane:
    """单车道环境测试"""

    def test_end_is_absorbing(self):
        """测试终点是吸收状态"""
        game = SingleLaneGame(agents=2, length=3)
        assert game.transition_probabilities((3, 0), (1, 0)) == {(3, 0): 1.0}

    def test_predicates(self):
        """测试中点与终点谓词"""
        table = SingleLaneGame(agents=2, length=4, mid=2).predicate_table()
        assert table["mid_0"].holds((2, 0))
        assert table["below_mid_1"].holds((2, 0))
        assert table["end_0"].holds((4, 1))
        assert table["short_1"].holds((4, 1))

    def test_state_space_size(self):
        """测试状态空间大小"""
        assert SingleLaneGame(agents=3, length=4).state_space_size() == 125


class TestGridworld:
    """网格世界测试"""

    def test_moves_clipped_at_edge(self):
        """测试越界移动被截断为停留"""
        game = GridworldGame()
        distribution = game.transition_probabilities(((0, 0), (3, 3)), (1, 2))
        assert distribution == {((0, 0), (3, 3)): 1.0}

    def test_move_can_fail(self):
        """测试移动以 fail_prob 的概率失败"""
        game = GridworldGame(fail_prob=0.05)
        distribution = game.transition_probabilities(((0, 0), (3, 3)), (2, 0))
        assert distribution[((1, 0), (3, 3))] == pytest.approx(0.95)
        assert distribution[((0, 0), (3, 3))] == pytest.approx(0.05)

    def test_corner_predicates(self):
        """测试角落与安全谓词"""
        table = GridworldGame().predicate_table()
        assert table["at_0_33"].holds(((3, 3), (0, 0)))
        assert table["at_1_00"].holds(((3, 3), (0, 0)))
        assert not table["safe"].holds(((1, 1), (1, 1)))

    def test_action_sets(self):
        """测试每个智能体有5个动作"""
        game = GridworldGame()
        assert len(game.joint_actions()) == 25


class TestSampling:
    """采样接口测试"""

    def test_sample_steps_counted(self, coin_game, rng):
        """测试单步与批量采样都计入采样步数"""
        coin_game.sample_next("s0", (1,), rng)
        counts = coin_game.sample_batch("s0", (1,), 50, rng)
        assert sum(counts.values()) == 50
        assert set(counts) <= {"win", "lose"}
        assert coin_game.reset_counter() == 51
        assert coin_game.sample_steps == 0

    def test_batch_frequencies(self, coin_game, rng):
        """测试批量采样频率接近真实概率"""
        counts = coin_game.sample_batch("s0", (1,), 20000, rng)
        assert counts["win"] / 20000 == pytest.approx(0.7, abs=0.02)

    def test_missing_entries_self_loop(self, coordination_game):
        """测试转移表缺失的条目视为自环"""
        assert coordination_game.transition_probabilities("both", (1, 1)) == {"both": 1.0}

    def test_table_validation(self):
        """测试概率之和不为1时报错"""
        with pytest.raises(ValueError):
            TableGame([(0, 1)], 1, "s0", {("s0", (0,)): {"a": 0.5}})

    def test_fingerprint(self):
        """测试指纹只取决于参数"""
        first = IntersectionGame(cars=[("ns", 2)])
        second = IntersectionGame(cars=[("ns", 2)])
        third = IntersectionGame(cars=[("ns", 3)])
        assert first.fingerprint() == second.fingerprint()
        assert first.fingerprint() != third.fingerprint()
        assert first.fingerprint() != IntersectionGame(cars=[("ns", 2)], horizon=5).fingerprint()


class TestMakeEnv:
    """环境工厂测试"""

    def test_make_env(self):
        """测试按编号构造并覆盖时域"""
        game = make_env("single_lane", {"agents": 2}, horizon=6)
        assert isinstance(game, SingleLaneGame)
        assert game.horizon == 6
        assert game.num_agents == 2

    def test_unknown_env(self):
        """测试未知环境"""
        with pytest.raises(ValueError):
            make_env("ocean")
