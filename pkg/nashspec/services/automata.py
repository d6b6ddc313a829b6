"""
规约编译服务
把规约按结构归纳编译为NFA，再确定化、补全，最后转换为奖励机
"""

from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Set, Tuple

from loguru import logger

from config.settings import settings

from ..models.automaton import (
    FiniteAutomaton,
    Guard,
    RewardMachine,
    Transition,
    all_masks,
    label_state,
)
from ..models.errors import StateBudgetError
from ..models.spec import (
    Achieve,
    AtomicPredicate,
    Choice,
    Ensuring,
    Predicate,
    Seq,
    Spec,
    Trajectory,
    spec_atoms,
)


def predicate_guard(predicate: Predicate, atoms: Sequence[str]) -> Guard:
    """谓词在原子赋值上的真值集合"""
    guard = set()
    for mask in range(1 << len(atoms)):
        valuation = {name: bool(mask >> i & 1) for i, name in enumerate(atoms)}
        if predicate.evaluate(valuation):
            guard.add(mask)
    return frozenset(guard)


class _NFABuilder:
    """结构归纳构造NFA，状态编号全局递增"""

    def __init__(self, atoms: Sequence[str]):
        self.atoms = tuple(atoms)
        self.everything = all_masks(len(atoms))
        self.counter = 0

    def _fresh(self) -> int:
        self.counter += 1
        return self.counter - 1

    def build(self, spec: Spec) -> Tuple[Set[int], List[Transition], int, FrozenSet[int]]:
        if isinstance(spec, Achieve):
            guard = predicate_guard(spec.predicate, self.atoms)
            start, goal = self._fresh(), self._fresh()
            transitions = [
                Transition(start, self.everything - guard, start),
                Transition(start, guard, goal),
                Transition(goal, self.everything, goal),
            ]
            return {start, goal}, [t for t in transitions if t.guard], start, frozenset({goal})

        if isinstance(spec, Ensuring):
            states, transitions, initial, accepting = self.build(spec.spec)
            guard = predicate_guard(spec.predicate, self.atoms)
            restricted = [Transition(t.source, t.guard & guard, t.target) for t in transitions]
            return states, [t for t in restricted if t.guard], initial, accepting

        if isinstance(spec, Seq):
            states1, transitions1, initial1, accepting1 = self.build(spec.first)
            states2, transitions2, initial2, accepting2 = self.build(spec.second)
            # 进入φ1接受状态的边复制一份转向φ2的初始状态
            diverted = [
                Transition(t.source, t.guard, initial2) for t in transitions1 if t.target in accepting1
            ]
            return states1 | states2, transitions1 + diverted + transitions2, initial1, accepting2

        states1, transitions1, initial1, accepting1 = self.build(spec.left)
        states2, transitions2, initial2, accepting2 = self.build(spec.right)
        start = self._fresh()
        merged = [
            Transition(start, t.guard, t.target)
            for t in transitions1 + transitions2
            if t.source in (initial1, initial2)
        ]
        return (
            states1 | states2 | {start},
            transitions1 + transitions2 + merged,
            start,
            accepting1 | accepting2,
        )


def spec_to_nfa(spec: Spec) -> FiniteAutomaton:
    """按结构归纳得到（非确定）自动机"""
    atoms = tuple(spec_atoms(spec))
    builder = _NFABuilder(atoms)
    states, transitions, initial, accepting = builder.build(spec)
    return FiniteAutomaton(
        atoms=atoms,
        states=tuple(sorted(states)),
        transitions=tuple(transitions),
        initial=initial,
        accepting=frozenset(accepting),
        deterministic=False,
    )


def determinize(nfa: FiniteAutomaton, max_states: Optional[int] = None) -> FiniteAutomaton:
    """
    子集构造确定化，只保留可达子集

    Args:
        nfa: 输入自动机
        max_states: 状态数上限，默认取配置 max_dfa_states

    Returns:
        语言等价的确定自动机

    Raises:
        StateBudgetError: 子集数超过上限
    """
    limit = max_states or settings.max_dfa_states
    by_source: Dict[int, List[Transition]] = {}
    for transition in nfa.transitions:
        by_source.setdefault(transition.source, []).append(transition)

    start = frozenset({nfa.initial})
    index: Dict[FrozenSet[int], int] = {start: 0}
    queue = [start]
    transitions: List[Transition] = []
    while queue:
        subset = queue.pop(0)
        targets: Dict[FrozenSet[int], Set[int]] = {}
        for mask in range(nfa.num_masks):
            successor = frozenset(
                t.target for s in subset for t in by_source.get(s, []) if mask in t.guard
            )
            if successor:
                targets.setdefault(successor, set()).add(mask)
        for successor, masks in targets.items():
            if successor not in index:
                if len(index) >= limit:
                    raise StateBudgetError("确定化自动机", limit)
                index[successor] = len(index)
                queue.append(successor)
            transitions.append(Transition(index[subset], frozenset(masks), index[successor]))

    accepting = frozenset(i for subset, i in index.items() if subset & nfa.accepting)
    logger.debug(f"确定化完成: NFA {len(nfa.states)} 个状态 -> DFA {len(index)} 个状态")
    return FiniteAutomaton(
        atoms=nfa.atoms,
        states=tuple(range(len(index))),
        transitions=tuple(transitions),
        initial=0,
        accepting=accepting,
        deterministic=True,
    )


def complete(dfa: FiniteAutomaton) -> FiniteAutomaton:
    """
    补全确定自动机：缺失的赋值统一转入一个带 true 自环的汇点

    Args:
        dfa: 确定自动机

    Returns:
        每个 (状态, 赋值) 恰有一个后继的自动机；已完备时原样返回
    """
    everything = all_masks(len(dfa.atoms))
    missing: Dict[int, FrozenSet[int]] = {}
    for state in dfa.states:
        covered = frozenset().union(*(t.guard for t in dfa.outgoing(state)))
        if covered != everything:
            missing[state] = everything - covered
    if not missing:
        return dfa

    sink = max(dfa.states) + 1
    extra = [Transition(state, guard, sink) for state, guard in missing.items()]
    extra.append(Transition(sink, everything, sink))
    return FiniteAutomaton(
        atoms=dfa.atoms,
        states=dfa.states + (sink,),
        transitions=dfa.transitions + tuple(extra),
        initial=dfa.initial,
        accepting=dfa.accepting,
        deterministic=True,
    )


def spec_to_dfa(spec: Spec, max_states: Optional[int] = None) -> FiniteAutomaton:
    """
    把规约编译为确定、完备的自动机 D_φ

    Args:
        spec: 规约
        max_states: 确定化状态上限

    Returns:
        接受 L(ζ) 当且仅当 ζ ⊨ φ 的自动机
    """
    dfa = complete(determinize(spec_to_nfa(spec), max_states))
    logger.debug(f"规约编译完成: {len(dfa.states)} 个状态, 原子 {list(dfa.atoms)}")
    return dfa


def dfa_to_rm(
    dfa: FiniteAutomaton, predicates: Mapping[str, AtomicPredicate]
) -> RewardMachine:
    """
    由完备DFA构造奖励机

    不接受的陷阱状态统一合并为 dead；进入接受集奖励 +1，离开奖励 -1

    Args:
        dfa: 确定且完备的自动机
        predicates: 原子名到谓词的映射，用于给环境状态打标签

    Returns:
        奖励机
    """
    successor: Dict[int, List[int]] = {}
    for state in dfa.states:
        row = [state] * dfa.num_masks
        for transition in dfa.outgoing(state):
            for mask in transition.guard:
                row[mask] = transition.target
        successor[state] = row

    traps = {
        state
        for state in dfa.states
        if state not in dfa.accepting and all(target == state for target in successor[state])
    }
    kept = [state for state in dfa.states if state not in traps]
    renumber = {state: i for i, state in enumerate(kept)}
    dead = len(kept)
    for state in traps:
        renumber[state] = dead

    table = {renumber[state]: tuple(renumber[t] for t in successor[state]) for state in kept}
    table[dead] = tuple([dead] * dfa.num_masks)
    return RewardMachine(
        predicates=tuple(predicates[name] for name in dfa.atoms),
        num_states=dead + 1,
        initial=renumber[dfa.initial],
        accepting=frozenset(renumber[state] for state in dfa.accepting),
        dead=dead,
        table=table,
    )


def spec_to_rm(spec: Spec, max_states: Optional[int] = None) -> RewardMachine:
    """规约直接编译为奖励机"""
    return dfa_to_rm(spec_to_dfa(spec, max_states), spec_atoms(spec))


def rm_total_reward(machine: RewardMachine, trajectory: Trajectory) -> int:
    """
    奖励机在轨迹上的累计奖励；每个状态（含末状态）都计入

    Returns:
        等于 1(ζ_{0:t} ⊨ φ)
    """
    q = machine.initial
    total = 0
    for state in trajectory.states:
        q, reward = machine.step(state, q)
        total += reward
    return total


def dfa_accepts(dfa: FiniteAutomaton, trajectory: Trajectory, predicates: Mapping[str, AtomicPredicate]) -> bool:
    """自动机是否接受轨迹的标签序列"""
    ordered = [predicates[name] for name in dfa.atoms]
    return dfa.accepts(label_state(state, ordered) for state in trajectory.states)
