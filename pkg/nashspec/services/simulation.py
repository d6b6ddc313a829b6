"""
仿真服务
按联合策略采样轨迹，并用蒙特卡洛估计各智能体的满足概率
"""

from typing import List, Optional, Sequence

import numpy as np
from loguru import logger

from ..envs.base import GameModel
from ..models.automaton import RewardMachine
from ..models.policy import JointPolicy
from ..models.results import ScoreReport
from ..models.spec import Spec, State, Trajectory
from .automata import spec_to_rm


def sample_trajectory(
    game: GameModel,
    policy: JointPolicy,
    rng: np.random.Generator,
    start: Optional[State] = None,
    steps: Optional[int] = None,
) -> Trajectory:
    """
    在环境中执行联合策略

    Args:
        game: 环境
        policy: 联合策略，每次调用前重置
        rng: 随机数生成器
        start: 起始状态，缺省为 s0
        steps: 步数，缺省为时域 H

    Returns:
        长度为 steps 的轨迹
    """
    state = game.initial_state if start is None else start
    steps = game.horizon if steps is None else steps
    policy.reset()
    states: List[State] = [state]
    actions = []
    for step in range(steps):
        action = tuple(policy.act(state, step, rng))
        next_state = game.sample_next(state, action, rng)
        policy.observe(state, action, next_state)
        actions.append(action)
        states.append(next_state)
        state = next_state
    return Trajectory(tuple(states), tuple(actions))


def compile_machines(specs: Sequence[Spec]) -> List[RewardMachine]:
    return [spec_to_rm(spec) for spec in specs]


def estimate_scores(
    game: GameModel,
    policy: JointPolicy,
    specs: Sequence[Spec],
    num_samples: int,
    rng: np.random.Generator,
    machines: Optional[Sequence[RewardMachine]] = None,
) -> ScoreReport:
    """
    蒙特卡洛估计 J_i(π) 与社会福利

    Args:
        game: 环境
        policy: 联合策略
        specs: 各智能体规约
        num_samples: 轨迹数
        rng: 随机数生成器
        machines: 预先编译的奖励机，缺省时由规约编译

    Returns:
        各智能体满足概率及标准误
    """
    if num_samples < 1:
        raise ValueError("轨迹数至少为1")
    machines = list(machines) if machines is not None else compile_machines(specs)
    successes = np.zeros(len(machines))
    for _ in range(num_samples):
        trajectory = sample_trajectory(game, policy, rng)
        for i, machine in enumerate(machines):
            q = machine.initial
            total = 0
            for state in trajectory.states:
                q, reward = machine.step(state, q)
                total += reward
            successes[i] += total
    scores = successes / num_samples
    errors = np.sqrt(scores * (1 - scores) / num_samples)
    logger.debug(f"满足概率估计: {np.round(scores, 3).tolist()} ({num_samples} 条轨迹)")
    return ScoreReport(
        scores=[float(s) for s in scores],
        std_errors=[float(e) for e in errors],
        num_samples=num_samples,
    )
