"""
基准环境
"""

from typing import Any, Dict, Optional

from .base import GameModel, TableGame
from .gridworld import GridworldGame
from .intersection import IntersectionGame
from .single_lane import SingleLaneGame

ENVIRONMENTS = {
    "intersection": IntersectionGame,
    "single_lane": SingleLaneGame,
    "gridworld": GridworldGame,
}


def make_env(env_id: str, params: Optional[Dict[str, Any]] = None, horizon: Optional[int] = None) -> GameModel:
    """
    按编号构造环境

    Args:
        env_id: intersection / single_lane / gridworld
        params: 构造参数
        horizon: 时域，未给出时使用环境默认值

    Returns:
        环境实例
    """
    if env_id not in ENVIRONMENTS:
        raise ValueError(f"未知环境: {env_id}，可选: {sorted(ENVIRONMENTS)}")
    kwargs = dict(params or {})
    if horizon is not None:
        kwargs["horizon"] = horizon
    return ENVIRONMENTS[env_id](**kwargs)


__all__ = [
    "GameModel",
    "TableGame",
    "IntersectionGame",
    "SingleLaneGame",
    "GridworldGame",
    "ENVIRONMENTS",
    "make_env",
]
