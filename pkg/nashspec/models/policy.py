"""
联合策略数据模型
"""

from abc import ABC, abstractmethod
from typing import Dict, Hashable, Mapping, Protocol, runtime_checkable

import numpy as np

from .spec import JointAction, State


@runtime_checkable
class JointPolicy(Protocol):
    """在线执行的联合策略"""

    def reset(self) -> None:
        ...

    def act(self, state: State, step: int, rng: np.random.Generator) -> JointAction:
        ...

    def observe(self, state: State, action: JointAction, next_state: State) -> None:
        ...

    def memory(self) -> Hashable:
        ...


class FiniteStatePolicy(ABC):
    """
    确定性有限状态联合策略 π = (M, α, σ, m0)

    σ(s, m) 给出联合动作，α(s, a, m) 给出下一记忆
    """

    def __init__(self, initial_memory: Hashable):
        self.initial_memory = initial_memory
        self._memory = initial_memory

    @abstractmethod
    def output(self, state: State, memory: Hashable) -> JointAction:
        """σ(s, m)"""

    @abstractmethod
    def update(self, state: State, action: JointAction, memory: Hashable) -> Hashable:
        """α(s, a, m)"""

    def reset(self) -> None:
        self._memory = self.initial_memory

    def act(self, state: State, step: int, rng: np.random.Generator) -> JointAction:
        return self.output(state, self._memory)

    def observe(self, state: State, action: JointAction, next_state: State) -> None:
        self._memory = self.update(state, action, self._memory)

    def memory(self) -> Hashable:
        return self._memory

    @property
    def memory_bound(self) -> int:
        """|M| 的上界"""
        return 1


class StationaryPolicy(FiniteStatePolicy):
    """无记忆的确定性联合策略，查表缺失时使用默认动作"""

    def __init__(self, table: Mapping[State, JointAction], default: JointAction):
        super().__init__(initial_memory=0)
        self.table: Dict[State, JointAction] = {s: tuple(a) for s, a in table.items()}
        self.default = tuple(default)

    def output(self, state: State, memory: Hashable) -> JointAction:
        return self.table.get(state, self.default)

    def update(self, state: State, action: JointAction, memory: Hashable) -> Hashable:
        return memory


class ConstantPolicy(FiniteStatePolicy):
    """始终输出同一联合动作"""

    def __init__(self, action: JointAction):
        super().__init__(initial_memory=0)
        self.action = tuple(action)

    def output(self, state: State, memory: Hashable) -> JointAction:
        return self.action

    def update(self, state: State, action: JointAction, memory: Hashable) -> Hashable:
        return memory

