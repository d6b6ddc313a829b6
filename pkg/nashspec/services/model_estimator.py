"""
模型估计服务
从初始状态广度优先探索，对每个 (状态, 联合动作) 采样 K 次得到 P̃
"""

import math
from collections import deque
from typing import Dict, Optional

import numpy as np
from loguru import logger

from config.settings import settings

from ..envs.base import GameModel
from ..models.errors import EstimationError, StateBudgetError
from ..models.game import EstimatedModel
from ..models.results import Hyperparameters
from ..models.spec import JointAction, State
from .cache_manager import CacheManager, get_cache_manager, model_cache_key


def required_samples(
    num_states: int,
    memory_size: int,
    rm_states: int,
    horizon: int,
    num_joint_actions: int,
    precision: float,
    failure_prob: float,
) -> int:
    """
    保证 |P̃ - P| ≤ δ / (2|S||M||Q|H²) 以概率 ≥ 1-p 成立的每对采样数

    K = ⌈(2|S|²|M|²|Q|²H⁴ / δ²) · ln(2|S|²|A| / p)⌉
    """
    if precision <= 0 or not 0 < failure_prob < 1:
        raise EstimationError("精度必须为正，失败概率必须在 (0, 1) 之间", code="BAD_PRECISION")
    scale = 2 * num_states**2 * memory_size**2 * rm_states**2 * horizon**4 / precision**2
    return math.ceil(scale * math.log(2 * num_states**2 * num_joint_actions / failure_prob))


def resolve_samples(
    game: GameModel, hyper: Hyperparameters, memory_size: int = 1, rm_states: int = 1
) -> int:
    """按 k_mode 取固定 K 或公式 K"""
    if hyper.k_mode == "fixed":
        return hyper.k_samples
    num_states = game.state_space_size() or hyper.max_model_states
    return required_samples(
        num_states=num_states,
        memory_size=memory_size,
        rm_states=rm_states,
        horizon=game.horizon,
        num_joint_actions=len(game.joint_actions()),
        precision=hyper.precision_delta,
        failure_prob=hyper.failure_prob,
    )


def bfs_estimate(
    game: GameModel,
    samples_per_pair: int,
    rng: np.random.Generator,
    max_states: Optional[int] = None,
) -> EstimatedModel:
    """
    广度优先估计转移概率

    只展开深度小于 H 的状态；每个 (s, a) 恰好采样 K 次，未观察到的后继概率为0

    Args:
        game: 环境
        samples_per_pair: K
        rng: 随机数生成器
        max_states: 发现状态数上限

    Returns:
        估计模型

    Raises:
        EstimationError: K < 1
        StateBudgetError: 发现的状态数超过上限
    """
    if samples_per_pair < 1:
        raise EstimationError(f"每对采样数至少为1，收到 {samples_per_pair}", code="BAD_K")
    limit = max_states or settings.max_model_states
    start_steps = game.sample_steps
    joint_actions = game.joint_actions()

    depth: Dict[State, int] = {game.initial_state: 0}
    probabilities: Dict[State, Dict[JointAction, Dict[State, float]]] = {}
    queue = deque([game.initial_state])
    while queue:
        state = queue.popleft()
        if depth[state] >= game.horizon:
            continue
        row: Dict[JointAction, Dict[State, float]] = {}
        for action in joint_actions:
            counts = game.sample_batch(state, action, samples_per_pair, rng)
            row[action] = {s: n / samples_per_pair for s, n in counts.items()}
            for successor in counts:
                if successor not in depth:
                    depth[successor] = depth[state] + 1
                    if len(depth) > limit:
                        raise StateBudgetError("估计模型", limit)
                    queue.append(successor)
        probabilities[state] = row

    steps = game.sample_steps - start_steps
    logger.info(f"模型估计完成: {len(depth)} 个状态, K={samples_per_pair}, 采样 {steps} 步")
    return EstimatedModel(
        initial_state=game.initial_state,
        action_sets=game.action_sets,
        horizon=game.horizon,
        probabilities=probabilities,
        depth=depth,
        samples_per_pair=samples_per_pair,
        sample_steps=steps,
        fingerprint=game.fingerprint(),
    )


def estimate_model(
    game: GameModel,
    samples_per_pair: int,
    seed: int,
    max_states: Optional[int] = None,
    cache: Optional[CacheManager] = None,
) -> EstimatedModel:
    """
    带缓存的模型估计；同一 (环境指纹, K, 种子) 只估计一次

    命中缓存时不消耗采样步，返回模型的 sample_steps 仍为首次估计的值
    """
    cache = cache or get_cache_manager()
    key = model_cache_key(game.fingerprint(), samples_per_pair, seed)
    return cache.get_or_set(
        key,
        lambda: bfs_estimate(game, samples_per_pair, np.random.default_rng(seed), max_states),
    )
