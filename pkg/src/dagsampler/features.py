"""Structural features of DAGs: edges, paths, parent sets and boolean combinations.

Features are small immutable expression trees evaluated to 0/1 on a
:class:`~dagsampler.sampler.Dag`. Path queries use the DAG's memoised
descendant masks, so many features over the same DAG share one closure.

Grammar accepted by :func:`parse_feature`::

    expr   := term ('|' term)*
    term   := factor ('&' factor)*
    factor := '!' factor | '(' expr ')' | call
    call   := edge(a,b) | path(a,b) | pathlen(a,b,L) | parents(a,{b,c,...})

``edge(a,b)`` means ``a -> b``; ``path(a,b)`` a directed path of one or more
edges; ``pathlen(a,b,L)`` such a path with at most ``L`` edges.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence

from ._bits import members, to_mask
from .sampler import Dag


class Feature:
    def __call__(self, dag: Dag) -> int:
        return self.eval(dag)

    def eval(self, dag: Dag) -> int:
        raise NotImplementedError

    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)

    def max_node(self) -> int:
        return -1


def _check_pair(u, v, what):
    if u == v:
        raise ValueError(f"{what} needs two distinct nodes, got {u} twice")
    if u < 0 or v < 0:
        raise ValueError("node indices must be non-negative")


@dataclass(frozen=True)
class Edge(Feature):
    u: int
    v: int

    def __post_init__(self):
        _check_pair(self.u, self.v, "edge")

    def eval(self, dag):
        return dag.parents[self.v] >> self.u & 1

    def max_node(self):
        return max(self.u, self.v)


@dataclass(frozen=True)
class Path(Feature):
    u: int
    v: int

    def __post_init__(self):
        _check_pair(self.u, self.v, "path")

    def eval(self, dag):
        return dag.descendants[self.u] >> self.v & 1

    def max_node(self):
        return max(self.u, self.v)


@dataclass(frozen=True)
class PathLen(Feature):
    """Directed path from ``u`` to ``v`` with at most ``max_len`` edges."""

    u: int
    v: int
    max_len: int

    def __post_init__(self):
        _check_pair(self.u, self.v, "pathlen")
        if self.max_len < 1:
            raise ValueError("path length bound must be >= 1")

    def eval(self, dag):
        if not dag.descendants[self.u] >> self.v & 1:
            return 0
        # backward BFS from v over parent masks
        frontier = 1 << self.v
        seen = frontier
        for _ in range(self.max_len):
            nxt = 0
            for w in members(frontier):
                nxt |= dag.parents[w]
            if nxt >> self.u & 1:
                return 1
            frontier = nxt & ~seen
            seen |= nxt
            if not frontier:
                break
        return 0

    def max_node(self):
        return max(self.u, self.v)


@dataclass(frozen=True)
class ParentSetIs(Feature):
    node: int
    parents: int

    def __post_init__(self):
        if self.parents >> self.node & 1:
            raise ValueError("a node cannot be its own parent")

    def eval(self, dag):
        return int(dag.parents[self.node] == self.parents)

    def max_node(self):
        return max([self.node] + members(self.parents))


@dataclass(frozen=True)
class ModularPredicate(Feature):
    """Product of per-node indicators ``f_i(Pa_i)``; ``None`` means constant 1."""

    indicators: tuple[Callable[[int], bool] | None, ...]

    def eval(self, dag):
        for f, pa in zip(self.indicators, dag.parents):
            if f is not None and not f(pa):
                return 0
        return 1

    def max_node(self):
        return len(self.indicators) - 1

    @classmethod
    def edge(cls, j: int, i: int, n: int) -> "ModularPredicate":
        ind = [None] * n
        ind[i] = lambda pa: bool(pa >> j & 1)
        return cls(tuple(ind))


@dataclass(frozen=True)
class And(Feature):
    left: Feature
    right: Feature

    def eval(self, dag):
        return self.left.eval(dag) & self.right.eval(dag)

    def max_node(self):
        return max(self.left.max_node(), self.right.max_node())


@dataclass(frozen=True)
class Or(Feature):
    left: Feature
    right: Feature

    def eval(self, dag):
        return self.left.eval(dag) | self.right.eval(dag)

    def max_node(self):
        return max(self.left.max_node(), self.right.max_node())


@dataclass(frozen=True)
class Not(Feature):
    inner: Feature

    def eval(self, dag):
        return 1 - self.inner.eval(dag)

    def max_node(self):
        return self.inner.max_node()


@dataclass(frozen=True)
class Const(Feature):
    value: int

    def eval(self, dag):
        return int(bool(self.value))


TRUE = Const(1)
FALSE = Const(0)


def evaluate(feature: Feature, dag: Dag) -> int:
    if feature.max_node() >= dag.n:
        raise ValueError(f"feature refers to node {feature.max_node()} but the DAG has {dag.n} nodes")
    return int(feature.eval(dag))


# The five non-modular features used for validation; x, y, z are node indices.
def f1(x, y):
    return Path(x, y)


def f2(x, y):
    return PathLen(x, y, 2)


def f3(x, y, z):
    return And(Path(x, y), Path(y, z))


def f4(x, y, z):
    if y == z:
        raise ValueError("f4 needs y != z")
    return And(Path(x, y), Path(x, z))


def f5(x, y, z):
    if x == z:
        raise ValueError("f5 needs x != z")
    return And(Path(x, y), Not(Path(x, z)))


class FeatureSyntaxError(ValueError):
    def __init__(self, msg, offset):
        super().__init__(f"{msg} at offset {offset}")
        self.offset = offset


_TOKEN = re.compile(r"\s*(?:([^\W\d][\w.\-]*)|(\d+)|(.))")


class _Parser:
    def __init__(self, text: str, names: Sequence[str] | None):
        self.text = text
        self.names = list(names) if names is not None else None
        self.toks = []
        pos = 0
        stripped = text.rstrip()
        while pos < len(stripped):
            m = _TOKEN.match(stripped, pos)
            start = m.start(m.lastindex)
            self.toks.append((m.lastindex, m.group(m.lastindex), len(text[:start].encode())))
            pos = m.end()
        self.toks.append((0, "", len(text.encode())))
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None):
        tok = self.toks[self.i]
        if value is not None and tok[1] != value:
            raise FeatureSyntaxError(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok[2])
        self.i += 1
        return tok

    def parse(self) -> Feature:
        e = self.expr()
        tok = self.peek()
        if tok[0] != 0:
            raise FeatureSyntaxError(f"unexpected {tok[1]!r}", tok[2])
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] == "|":
            self.take()
            e = Or(e, self.term())
        return e

    def term(self):
        e = self.factor()
        while self.peek()[1] == "&":
            self.take()
            e = And(e, self.factor())
        return e

    def factor(self):
        kind, val, off = self.peek()
        if val == "!":
            self.take()
            return Not(self.factor())
        if val == "(":
            self.take()
            e = self.expr()
            self.take(")")
            return e
        if kind == 1:
            return self.call()
        raise FeatureSyntaxError(f"unexpected {val or 'end of input'!r}", off)

    def node(self):
        kind, val, off = self.take()
        if kind == 1 and self.names is not None and val in self.names:
            return self.names.index(val)
        if kind == 2 and self.names is None:
            return int(val)
        if kind in (1, 2) and self.names is not None and val.isdigit() and int(val) < len(self.names):
            return int(val)
        if kind in (1, 2):
            raise FeatureSyntaxError(f"unknown variable {val!r}", off)
        raise FeatureSyntaxError(f"expected a variable, found {val or 'end of input'!r}", off)

    def call(self):
        _, name, off = self.take()
        fn = name.lower()
        arity = {"edge": 2, "path": 2, "pathlen": 3, "parents": 2}
        if fn not in arity:
            raise FeatureSyntaxError(f"unknown feature {name!r}", off)
        self.take("(")
        if fn == "parents":
            a = self.node()
            self.take(",")
            self.take("{")
            pa = []
            if self.peek()[1] != "}":
                pa.append(self.node())
                while self.peek()[1] == ",":
                    self.take()
                    pa.append(self.node())
            self.take("}")
            self.take(")")
            if a in pa:
                raise FeatureSyntaxError("a node cannot be its own parent", off)
            return ParentSetIs(a, to_mask(pa))
        args = [self.node()]
        while self.peek()[1] == ",":
            self.take()
            if fn == "pathlen" and len(args) == 2:
                kind, val, voff = self.take()
                if kind != 2:
                    raise FeatureSyntaxError("path length must be an integer", voff)
                args.append(int(val))
            else:
                args.append(self.node())
        if len(args) != arity[fn]:
            raise FeatureSyntaxError(f"{fn} takes {arity[fn]} arguments, got {len(args)}", off)
        self.take(")")
        try:
            if fn == "edge":
                return Edge(*args)
            if fn == "path":
                return Path(*args)
            return PathLen(*args)
        except ValueError as exc:
            raise FeatureSyntaxError(str(exc), off) from None


def parse_feature(text: str, names: Sequence[str] | None = None) -> Feature:
    """Parse a feature expression; names resolve against ``names`` (or are indices)."""
    return _Parser(text, names).parse()
