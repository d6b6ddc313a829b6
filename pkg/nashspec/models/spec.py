"""
规约语言数据模型
谓词、规约抽象语法树与轨迹
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable, Iterator, Mapping, Tuple, Union

State = Hashable
JointAction = Tuple[int, ...]


@dataclass(frozen=True)
class AtomicPredicate:
    """原子谓词：名称加上定义在环境状态上的布尔函数"""

    name: str
    fn: Callable[[Any], bool] = field(compare=False, hash=False, repr=False)

    @property
    def is_constant(self) -> bool:
        return self.name in ("true", "false")

    def __call__(self, state: State) -> bool:
        return bool(self.fn(state))


TRUE_PREDICATE = AtomicPredicate("true", lambda _state: True)
FALSE_PREDICATE = AtomicPredicate("false", lambda _state: False)


@dataclass(frozen=True)
class Atom:
    """原子谓词节点"""

    predicate: AtomicPredicate

    def holds(self, state: State) -> bool:
        return self.predicate(state)

    def evaluate(self, valuation: Mapping[str, bool]) -> bool:
        if self.predicate.name == "true":
            return True
        if self.predicate.name == "false":
            return False
        return valuation[self.predicate.name]


@dataclass(frozen=True)
class And:
    """合取"""

    left: "Predicate"
    right: "Predicate"

    def holds(self, state: State) -> bool:
        return self.left.holds(state) and self.right.holds(state)

    def evaluate(self, valuation: Mapping[str, bool]) -> bool:
        return self.left.evaluate(valuation) and self.right.evaluate(valuation)


@dataclass(frozen=True)
class Or:
    """析取"""

    left: "Predicate"
    right: "Predicate"

    def holds(self, state: State) -> bool:
        return self.left.holds(state) or self.right.holds(state)

    def evaluate(self, valuation: Mapping[str, bool]) -> bool:
        return self.left.evaluate(valuation) or self.right.evaluate(valuation)


Predicate = Union[Atom, And, Or]

TRUE = Atom(TRUE_PREDICATE)
FALSE = Atom(FALSE_PREDICATE)


def conjoin(left: Predicate, right: Predicate) -> Predicate:
    """合取两个谓词，吸收常量true"""
    if left == TRUE:
        return right
    if right == TRUE or left == right:
        return left
    return And(left, right)


def predicate_atoms(predicate: Predicate) -> Dict[str, AtomicPredicate]:
    """收集谓词中出现的非常量原子"""
    if isinstance(predicate, Atom):
        if predicate.predicate.is_constant:
            return {}
        return {predicate.predicate.name: predicate.predicate}
    atoms = predicate_atoms(predicate.left)
    atoms.update(predicate_atoms(predicate.right))
    return atoms


@dataclass(frozen=True)
class Achieve:
    """最终到达满足谓词的状态"""

    predicate: Predicate


@dataclass(frozen=True)
class Ensuring:
    """在满足子规约的同时所有状态保持谓词成立"""

    spec: "Spec"
    predicate: Predicate


@dataclass(frozen=True)
class Seq:
    """顺序组合"""

    first: "Spec"
    second: "Spec"


@dataclass(frozen=True)
class Choice:
    """选择组合"""

    left: "Spec"
    right: "Spec"


Spec = Union[Achieve, Ensuring, Seq, Choice]


def spec_atoms(spec: Spec) -> Dict[str, AtomicPredicate]:
    """收集规约中出现的非常量原子，按名称排序"""
    if isinstance(spec, Achieve):
        atoms = predicate_atoms(spec.predicate)
    elif isinstance(spec, Ensuring):
        atoms = spec_atoms(spec.spec)
        atoms.update(predicate_atoms(spec.predicate))
    elif isinstance(spec, Seq):
        atoms = spec_atoms(spec.first)
        atoms.update(spec_atoms(spec.second))
    else:
        atoms = spec_atoms(spec.left)
        atoms.update(spec_atoms(spec.right))
    return dict(sorted(atoms.items()))


@dataclass(frozen=True)
class Trajectory:
    """有限轨迹 s_0 -a_0-> s_1 ... -a_{t-1}-> s_t"""

    states: Tuple[State, ...]
    actions: Tuple[JointAction, ...] = ()

    def __post_init__(self):
        if not self.states:
            raise ValueError("轨迹至少包含一个状态")
        if self.actions and len(self.actions) != len(self.states) - 1:
            raise ValueError("动作数必须等于状态数减一")

    @property
    def length(self) -> int:
        """转移步数 t"""
        return len(self.states) - 1

    def slice(self, start: int, end: int) -> "Trajectory":
        """子轨迹 ζ_{start:end}，两端均包含"""
        if not 0 <= start <= end <= self.length:
            raise IndexError(f"非法切片 [{start}:{end}]")
        actions = self.actions[start:end] if self.actions else ()
        return Trajectory(self.states[start:end + 1], actions)

    def __iter__(self) -> Iterator[State]:
        return iter(self.states)

    @classmethod
    def of(cls, *states: State) -> "Trajectory":
        return cls(tuple(states))
