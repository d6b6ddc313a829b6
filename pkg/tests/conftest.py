"""
测试共享夹具
小型确定性表格博弈、快速超参数与隔离的模型缓存
"""

import itertools

import numpy as np
import pytest

from nashspec.data.loader import ExperimentLoader
from nashspec.envs import TableGame
from nashspec.models.results import Hyperparameters, HyperOverrides
from nashspec.models.spec import Achieve, And, Atom, AtomicPredicate, Choice, Ensuring, Or, Seq, Trajectory
from nashspec.services.cache_manager import init_cache_manager
from nashspec.services.spec_parser import spec_size


def predicate_table(**fns):
    """按关键字参数构造谓词表"""
    return {name: AtomicPredicate(name, fn) for name, fn in fns.items()}


@pytest.fixture(autouse=True)
def isolated_cache():
    """每个测试使用独立的内存缓存"""
    return init_cache_manager("memory")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def fast_hyper():
    """缩小各采样预算的超参数"""
    return Hyperparameters.resolve(
        HyperOverrides(
            nash_epsilon=0.06,
            precision_delta=0.01,
            k_mode="fixed",
            k_samples=20,
            score_samples=200,
            edge_budget=3000,
            reach_samples=100,
            welfare_samples=100,
            max_paths=200,
            maqrm_steps=4000,
            best_response_steps=3000,
            epsilon_min_samples=200,
            run_timeout_seconds=600,
        )
    )


@pytest.fixture
def letters():
    """状态为单个字母，原子 a/b/c/d 表示当前字母"""
    return predicate_table(**{name: (lambda s, name=name: s == name) for name in "abcd"})


@pytest.fixture
def coordination_game():
    """
    一步协调博弈：两个智能体同时选择 1 时双方目标都达成

    s0 -(1,1)-> both, -(1,0)-> g0, -(0,1)-> g1, -(0,0)-> s0
    """
    transitions = {
        ("s0", (1, 1)): {"both": 1.0},
        ("s0", (1, 0)): {"g0": 1.0},
        ("s0", (0, 1)): {"g1": 1.0},
    }
    return TableGame(
        action_sets=[(0, 1), (0, 1)],
        horizon=1,
        initial_state="s0",
        transitions=transitions,
        predicates={
            "goal_0": lambda s: s in ("both", "g0"),
            "goal_1": lambda s: s in ("both", "g1"),
        },
    )


@pytest.fixture
def punishment_game():
    """
    两步博弈：智能体0在 s0 选 1 进入 mid；在 mid 只有智能体1选 0 时才进入 g0

    智能体0的目标是 g0，智能体1的目标 done_1 永不成立。
    智能体1可以在 mid 一直选 1 来惩罚偏离者
    """
    transitions = {
        ("s0", (1, 0)): {"mid": 1.0},
        ("s0", (1, 1)): {"mid": 1.0},
        ("mid", (0, 0)): {"g0": 1.0},
        ("mid", (1, 0)): {"g0": 1.0},
    }
    return TableGame(
        action_sets=[(0, 1), (0, 1)],
        horizon=2,
        initial_state="s0",
        transitions=transitions,
        predicates={
            "goal_0": lambda s: s == "g0",
            "done_1": lambda s: False,
        },
    )


@pytest.fixture
def coin_game():
    """单智能体一步博弈：动作1以 0.7 的概率到达 win"""
    transitions = {
        ("s0", (1,)): {"win": 0.7, "lose": 0.3},
        ("s0", (0,)): {"lose": 1.0},
    }
    return TableGame(
        action_sets=[(0, 1)],
        horizon=1,
        initial_state="s0",
        transitions=transitions,
        predicates={"win": lambda s: s == "win"},
    )


@pytest.fixture(scope="session")
def benchmark_suite():
    """内置基准目录中的全部 (编号, 环境, 规约)，规约按各自环境的谓词表解析"""
    loader = ExperimentLoader()
    suite = []
    for key, entry in loader.load_benchmarks().items():
        config = entry.to_experiment(key, "highnashsearch", 0, HyperOverrides())
        game, specs = loader.build(config)
        suite.append((key, game, specs))
    return suite


@pytest.fixture
def env_rollout():
    """在环境中均匀随机地选择联合动作，返回长度随机的轨迹"""

    def rollout(game, rng):
        actions = game.joint_actions()
        state = game.initial_state
        states = [state]
        for _ in range(int(rng.integers(0, game.horizon + 1))):
            state = game.sample_next(state, actions[int(rng.integers(len(actions)))], rng)
            states.append(state)
        return Trajectory(tuple(states))

    return rollout


BIT_ATOMS = ("p0", "p1", "p2")


def _random_predicate(rng, table, depth):
    if depth == 0 or rng.random() < 0.6:
        return Atom(table[BIT_ATOMS[int(rng.integers(len(BIT_ATOMS)))]])
    node = And if rng.random() < 0.5 else Or
    return node(_random_predicate(rng, table, depth - 1), _random_predicate(rng, table, depth - 1))


def _random_spec(rng, table, depth):
    kind = int(rng.integers(4)) if depth > 0 else 0
    if kind == 0:
        return Achieve(_random_predicate(rng, table, 1))
    if kind == 1:
        return Ensuring(_random_spec(rng, table, depth - 1), _random_predicate(rng, table, 1))
    node = Seq if kind == 2 else Choice
    return node(_random_spec(rng, table, depth - 1), _random_spec(rng, table, depth - 1))


@pytest.fixture(scope="session")
def bit_atoms():
    """状态为 0..7 的整数，原子 p_i 表示第 i 位为1"""
    return predicate_table(**{name: (lambda s, i=i: bool(s >> i & 1)) for i, name in enumerate(BIT_ATOMS)})


@pytest.fixture(scope="session")
def small_specs(bit_atoms):
    """20个互不相同、大小不超过6的随机规约"""
    rng = np.random.default_rng(41)
    specs = []
    while len(specs) < 20:
        spec = _random_spec(rng, bit_atoms, 3)
        if spec_size(spec) <= 6 and spec not in specs:
            specs.append(spec)
    return specs


@pytest.fixture(scope="session")
def short_trajectories():
    """8个状态上长度（状态数）为1到5的全部轨迹"""
    return [
        Trajectory(states)
        for length in range(1, 6)
        for states in itertools.product(range(8), repeat=length)
    ]
