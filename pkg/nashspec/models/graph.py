"""
抽象图与乘积图数据模型
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Sequence, Tuple, Union

from .spec import TRUE, Predicate, State


@dataclass(frozen=True)
class AlwaysSafe:
    """Z_b：每个状态都满足 b 的轨迹集合"""

    predicate: Predicate

    def contains(self, states: Sequence[State]) -> bool:
        return all(self.predicate.holds(s) for s in states)


@dataclass(frozen=True)
class ConcatSafe:
    """Z_{b1} ∘ Z_{b2}：可切分为非空前缀（满足b1）与非空后缀（满足b2）"""

    first: Predicate
    second: Predicate

    def contains(self, states: Sequence[State]) -> bool:
        for split in range(1, len(states)):
            if all(self.first.holds(s) for s in states[:split]) and all(
                self.second.holds(s) for s in states[split:]
            ):
                return True
        return False


SafeSet = Union[AlwaysSafe, ConcatSafe]

Vertex = int
ProductVertex = Tuple[int, ...]


@dataclass
class AbstractGraph:
    """
    抽象图 G = (U, E, u0, F, β, Z_safe)

    β 与安全集合都以谓词表示；终点的安全集合总是 Z_b 形式，这里只存 b
    """

    vertices: List[Vertex]
    edges: Dict[Tuple[Vertex, Vertex], SafeSet]
    initial: Vertex
    final_safe: Dict[Vertex, Predicate]
    subgoals: Dict[Vertex, Predicate] = field(default_factory=dict)

    @property
    def finals(self) -> FrozenSet[Vertex]:
        return frozenset(self.final_safe)

    def subgoal(self, vertex: Vertex) -> Predicate:
        return self.subgoals.get(vertex, TRUE)

    def outgoing(self, vertex: Vertex) -> List[Vertex]:
        return [target for (source, target) in self.edges if source == vertex]

    def incoming(self, vertex: Vertex) -> List[Vertex]:
        return [source for (source, target) in self.edges if target == vertex]

    @property
    def num_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class ProductEdge:
    """乘积图的边；progress 是真正沿边前进的智能体"""

    source: ProductVertex
    target: ProductVertex
    progress: FrozenSet[int]


@dataclass
class ProductGraph:
    """
    联盟 B 上各智能体抽象图的异步乘积

    顶点分量按 coalition 的顺序排列
    """

    coalition: Tuple[int, ...]
    graphs: Dict[int, AbstractGraph]
    vertices: List[ProductVertex]
    edges: List[ProductEdge]
    initial: ProductVertex
    finals: FrozenSet[ProductVertex]

    def position(self, agent: int) -> int:
        return self.coalition.index(agent)

    def component(self, vertex: ProductVertex, agent: int) -> Vertex:
        return vertex[self.position(agent)]

    def outgoing(self, vertex: ProductVertex) -> List[ProductEdge]:
        return [edge for edge in self.edges if edge.source == vertex]


Path = Tuple[ProductEdge, ...]
