"""
自动机与奖励机数据模型
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .spec import AtomicPredicate, JointAction, State

Guard = FrozenSet[int]


def all_masks(num_atoms: int) -> Guard:
    """全部原子赋值（位掩码）构成的守卫，即 true"""
    return frozenset(range(1 << num_atoms))


def label_state(state: State, predicates: Sequence[AtomicPredicate]) -> int:
    """按原子顺序把环境状态编码为赋值位掩码"""
    mask = 0
    for index, predicate in enumerate(predicates):
        if predicate(state):
            mask |= 1 << index
    return mask


@dataclass(frozen=True)
class Transition:
    """带守卫的迁移；守卫是满足它的赋值集合"""

    source: int
    guard: Guard
    target: int


@dataclass(frozen=True)
class FiniteAutomaton:
    """
    有限自动机 (Q, δ, q_init, F)

    守卫在规约出现的原子上按赋值语义解释，atoms 给出位掩码的位序
    """

    atoms: Tuple[str, ...]
    states: Tuple[int, ...]
    transitions: Tuple[Transition, ...]
    initial: int
    accepting: FrozenSet[int]
    deterministic: bool = False

    @property
    def num_masks(self) -> int:
        return 1 << len(self.atoms)

    def outgoing(self, state: int) -> List[Transition]:
        return [t for t in self.transitions if t.source == state]

    def successors(self, state: int, mask: int) -> Set[int]:
        """读入一个赋值后的后继状态集合"""
        return {t.target for t in self.transitions if t.source == state and mask in t.guard}

    def run(self, masks: Iterable[int]) -> Set[int]:
        """从初始状态读入赋值序列，返回可能到达的状态集合"""
        current = {self.initial}
        for mask in masks:
            current = {target for state in current for target in self.successors(state, mask)}
            if not current:
                break
        return current

    def accepts(self, masks: Iterable[int]) -> bool:
        return bool(self.run(masks) & self.accepting)

    def is_complete(self) -> bool:
        """每个状态、每个赋值恰有一个后继"""
        for state in self.states:
            for mask in range(self.num_masks):
                if len(self.successors(state, mask)) != 1:
                    return False
        return True


@dataclass
class RewardMachine:
    """
    奖励机 R = (Q, δ_u, δ_r, q0)

    table[q][mask] 给出读入赋值后的下一状态；奖励由是否进入或离开接受集决定
    """

    predicates: Tuple[AtomicPredicate, ...]
    num_states: int
    initial: int
    accepting: FrozenSet[int]
    dead: int
    table: Dict[int, Tuple[int, ...]] = field(default_factory=dict)

    def label(self, state: State) -> int:
        return label_state(state, self.predicates)

    def next_state(self, q: int, mask: int) -> int:
        return self.table[q][mask]

    def update(self, state: State, action: Optional[JointAction], q: int) -> int:
        """δ_u：只读取状态标签，忽略联合动作"""
        return self.table[q][self.label(state)]

    def reward_for(self, q: int, q_next: int) -> int:
        if q not in self.accepting and q_next in self.accepting:
            return 1
        if q in self.accepting and q_next not in self.accepting:
            return -1
        return 0

    def reward(self, state: State, q: int) -> int:
        """δ_r(s, q) ∈ {-1, 0, 1}"""
        return self.reward_for(q, self.update(state, None, q))

    def step(self, state: State, q: int) -> Tuple[int, int]:
        """同时返回 (下一状态, 奖励)"""
        q_next = self.update(state, None, q)
        return q_next, self.reward_for(q, q_next)

    def is_dead(self, q: int) -> bool:
        return q == self.dead

    def is_accepting_sink(self, q: int) -> bool:
        return q in self.accepting and all(target == q for target in self.table[q])

    def is_settled(self, q: int) -> bool:
        """之后的奖励恒为0"""
        return self.is_dead(q) or self.is_accepting_sink(q)

    @property
    def states(self) -> range:
        return range(self.num_states)


def guard_to_dnf(guard: Guard, atoms: Sequence[str]) -> str:
    """把守卫渲染为赋值上的析取范式"""
    if len(guard) == 1 << len(atoms):
        return "true"
    if not guard:
        return "false"
    terms = []
    for mask in sorted(guard):
        literals = [name if mask >> i & 1 else f"!{name}" for i, name in enumerate(atoms)]
        terms.append(" & ".join(literals))
    return " | ".join(f"({term})" for term in terms)


def automaton_to_dict(automaton: FiniteAutomaton) -> Dict:
    """compile-spec 输出的JSON结构"""
    return {
        "atoms": list(automaton.atoms),
        "states": list(automaton.states),
        "initial": automaton.initial,
        "accepting": sorted(automaton.accepting),
        "deterministic": automaton.deterministic,
        "transitions": [
            {
                "source": t.source,
                "target": t.target,
                "guard": guard_to_dnf(t.guard, automaton.atoms),
                "assignments": sorted(t.guard),
            }
            for t in automaton.transitions
        ],
    }


def automaton_from_dict(data: Mapping) -> FiniteAutomaton:
    """automaton_to_dict 的逆过程"""
    return FiniteAutomaton(
        atoms=tuple(data["atoms"]),
        states=tuple(data["states"]),
        transitions=tuple(
            Transition(t["source"], frozenset(t["assignments"]), t["target"])
            for t in data["transitions"]
        ),
        initial=data["initial"],
        accepting=frozenset(data["accepting"]),
        deterministic=data.get("deterministic", False),
    )
