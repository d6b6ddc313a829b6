"""
规约解析与语义服务
提供规约文本解析、规范化打印、轨迹满足判定与规约大小计算
"""

import re
from typing import Callable, Dict, List, Mapping, NamedTuple, Tuple

from loguru import logger

from ..models.errors import SpecSyntaxError, UnknownPredicateError
from ..models.spec import (
    FALSE_PREDICATE,
    TRUE_PREDICATE,
    Achieve,
    And,
    Atom,
    AtomicPredicate,
    Choice,
    Ensuring,
    Or,
    Predicate,
    Seq,
    Spec,
    State,
    Trajectory,
)

KEYWORDS = {"achieve", "ensuring", "or", "and", "true", "false"}

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)|(?P<comment>#[^\n]*)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[;()])"
)


class Token(NamedTuple):
    """词法单元"""

    kind: str
    text: str
    position: int


def tokenize(text: str) -> List[Token]:
    """
    将规约文本切分为词法单元

    Args:
        text: 规约源文本

    Returns:
        词法单元列表，末尾附加EOF

    Raises:
        SpecSyntaxError: 出现非法字符
    """
    tokens: List[Token] = []
    position = 0
    while position < len(text):
        match = _TOKEN_RE.match(text, position)
        if match is None:
            raise SpecSyntaxError(f"非法字符 {text[position]!r}", position)
        kind = match.lastgroup
        if kind == "name":
            word = match.group()
            tokens.append(Token("keyword" if word in KEYWORDS else "name", word, position))
        elif kind == "punct":
            tokens.append(Token(match.group(), match.group(), position))
        position = match.end()
    tokens.append(Token("eof", "", len(text)))
    return tokens


def scan_atom_names(text: str) -> List[str]:
    """列出文本中出现的原子谓词名（按首次出现顺序）"""
    names: List[str] = []
    for token in tokenize(text):
        if token.kind == "name" and token.text not in names:
            names.append(token.text)
    return names


def symbolic_predicate_table(names: List[str]) -> Dict[str, AtomicPredicate]:
    """为仅需编译的场景构造符号谓词表，求值时报错"""

    def unbound(name: str) -> Callable[[State], bool]:
        def _fail(_state: State) -> bool:
            raise UnknownPredicateError(name)

        return _fail

    return {name: AtomicPredicate(name, unbound(name)) for name in names}


class _Parser:
    """递归下降解析器

    优先级：ensuring 高于 ;，; 高于 or；谓词中的 or 必须加括号
    """

    def __init__(self, text: str, table: Mapping[str, AtomicPredicate]):
        self.tokens = tokenize(text)
        self.index = 0
        self.table = table

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _advance(self) -> Token:
        token = self.current
        self.index += 1
        return token

    def _accept(self, text: str) -> bool:
        if self.current.text == text and self.current.kind in ("keyword", text):
            self.index += 1
            return True
        return False

    def _expect(self, text: str) -> None:
        if not self._accept(text):
            found = self.current.text or "文本结尾"
            raise SpecSyntaxError(f"期望 {text!r}，实际为 {found!r}", self.current.position)

    def parse(self) -> Spec:
        spec = self._choice()
        if self.current.kind != "eof":
            raise SpecSyntaxError(f"多余的内容 {self.current.text!r}", self.current.position)
        return spec

    def _choice(self) -> Spec:
        spec = self._seq()
        while self._accept("or"):
            spec = Choice(spec, self._seq())
        return spec

    def _seq(self) -> Spec:
        spec = self._ensuring()
        while self._accept(";"):
            spec = Seq(spec, self._ensuring())
        return spec

    def _ensuring(self) -> Spec:
        spec = self._primary()
        while self._accept("ensuring"):
            spec = Ensuring(spec, self._conjunction())
        return spec

    def _primary(self) -> Spec:
        if self._accept("achieve"):
            return Achieve(self._conjunction())
        if self._accept("("):
            spec = self._choice()
            self._expect(")")
            return spec
        found = self.current.text or "文本结尾"
        raise SpecSyntaxError(f"期望 'achieve' 或 '('，实际为 {found!r}", self.current.position)

    def _disjunction(self) -> Predicate:
        predicate = self._conjunction()
        while self._accept("or"):
            predicate = Or(predicate, self._conjunction())
        return predicate

    def _conjunction(self) -> Predicate:
        predicate = self._predicate_primary()
        while self._accept("and"):
            predicate = And(predicate, self._predicate_primary())
        return predicate

    def _predicate_primary(self) -> Predicate:
        token = self.current
        if self._accept("("):
            predicate = self._disjunction()
            self._expect(")")
            return predicate
        if self._accept("true"):
            return Atom(TRUE_PREDICATE)
        if self._accept("false"):
            return Atom(FALSE_PREDICATE)
        if token.kind == "name":
            self._advance()
            if token.text not in self.table:
                raise UnknownPredicateError(token.text)
            return Atom(self.table[token.text])
        found = token.text or "文本结尾"
        raise SpecSyntaxError(f"期望谓词，实际为 {found!r}", token.position)


def parse_spec(text: str, predicate_table: Mapping[str, AtomicPredicate]) -> Spec:
    """
    解析规约文本

    Args:
        text: 规约源文本，例如 "achieve a ; achieve b ensuring c"
        predicate_table: 原子谓词名到谓词的映射

    Returns:
        规约抽象语法树

    Raises:
        SpecSyntaxError: 语法错误（带位置）
        UnknownPredicateError: 谓词表中不存在的原子
    """
    spec = _Parser(text, predicate_table).parse()
    logger.debug(f"规约解析完成: {format_spec(spec)}")
    return spec


def format_predicate(predicate: Predicate, nested: bool = False) -> str:
    """规范化打印谓词；析取始终加括号"""
    if isinstance(predicate, Atom):
        return predicate.predicate.name
    if isinstance(predicate, Or):
        return f"({format_predicate(predicate.left)} or {format_predicate(predicate.right)})"
    text = f"{format_predicate(predicate.left)} and {_conjunct(predicate.right)}"
    return f"({text})" if nested else text


def _conjunct(predicate: Predicate) -> str:
    if isinstance(predicate, And):
        return format_predicate(predicate, nested=True)
    return format_predicate(predicate)


def format_spec(spec: Spec) -> str:
    """
    规范化打印规约，满足 parse(format(φ)) == φ

    Args:
        spec: 规约

    Returns:
        规范文本
    """
    if isinstance(spec, Achieve):
        return f"achieve {format_predicate(spec.predicate)}"
    if isinstance(spec, Ensuring):
        inner = format_spec(spec.spec)
        if isinstance(spec.spec, (Seq, Choice)):
            inner = f"({inner})"
        return f"{inner} ensuring {format_predicate(spec.predicate)}"
    if isinstance(spec, Seq):
        left = format_spec(spec.first)
        if isinstance(spec.first, Choice):
            left = f"({left})"
        right = format_spec(spec.second)
        if isinstance(spec.second, (Seq, Choice)):
            right = f"({right})"
        return f"{left} ; {right}"
    right = format_spec(spec.right)
    if isinstance(spec.right, Choice):
        right = f"({right})"
    return f"{format_spec(spec.left)} or {right}"


def spec_size(spec: Spec, count_predicates: bool = True) -> int:
    """
    规约大小 |φ|

    Args:
        spec: 规约
        count_predicates: 为True时原子与谓词连接词各计1；否则只计规约算子

    Returns:
        节点数
    """

    def predicate_size(predicate: Predicate) -> int:
        if not count_predicates:
            return 0
        if isinstance(predicate, Atom):
            return 1
        return 1 + predicate_size(predicate.left) + predicate_size(predicate.right)

    if isinstance(spec, Achieve):
        return 1 + predicate_size(spec.predicate)
    if isinstance(spec, Ensuring):
        return 1 + spec_size(spec.spec, count_predicates) + predicate_size(spec.predicate)
    if isinstance(spec, Seq):
        return 1 + spec_size(spec.first, count_predicates) + spec_size(spec.second, count_predicates)
    return 1 + spec_size(spec.left, count_predicates) + spec_size(spec.right, count_predicates)


def satisfies(trajectory: Trajectory, spec: Spec) -> bool:
    """
    判定轨迹是否满足规约

    Args:
        trajectory: 非空轨迹
        spec: 规约

    Returns:
        是否满足
    """
    states = trajectory.states
    memo: Dict[Tuple[int, int, int], bool] = {}

    def sat(node: Spec, start: int, end: int) -> bool:
        key = (id(node), start, end)
        if key in memo:
            return memo[key]
        if isinstance(node, Achieve):
            result = any(node.predicate.holds(states[i]) for i in range(start, end + 1))
        elif isinstance(node, Ensuring):
            result = all(node.predicate.holds(states[i]) for i in range(start, end + 1)) and sat(
                node.spec, start, end
            )
        elif isinstance(node, Seq):
            result = any(
                sat(node.first, start, split) and sat(node.second, split + 1, end)
                for split in range(start, end)
            )
        else:
            result = sat(node.left, start, end) or sat(node.right, start, end)
        memo[key] = result
        return result

    return sat(spec, 0, trajectory.length)
