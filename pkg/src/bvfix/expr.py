"""Small arithmetic expression language used for maps, moduli and distances.

Grammar (lowest to highest precedence)::

    comparison  :=  sum (('<' | '<=' | '>' | '>=' | '==' | '!=') sum)?
    sum         :=  product (('+' | '-') product)*
    product     :=  unary (('*' | '/') unary)*
    unary       :=  ('-' | '+') unary | power
    power       :=  atom (('^' | '**') unary)?
    atom        :=  NUMBER | NAME | NAME '(' args ')' | '(' comparison ')'

Piecewise definitions use ``if(cond, then, else)``, e.g.
``if(x < 0.5, x/4, x/5)``.  Expressions compile to closures over numpy
ufuncs, so they evaluate elementwise on arrays as well as on scalars.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["Expression", "ExpressionSyntaxError", "compile_expression"]


class ExpressionSyntaxError(ValueError):
    def __init__(self, message: str, source: str, position: int):
        self.position = position
        self.source = source
        super().__init__(f"{message} at position {position} in {source!r}")


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|<=|>=|==|!=|[-+*/^(),<>])
    """,
    re.VERBOSE,
)

_CONSTANTS = {"pi": math.pi, "e": math.e}


def _if(cond, a, b):
    return np.where(cond, a, b)


# name -> (arity, implementation)
_FUNCTIONS: dict[str, tuple[int, Callable]] = {
    "abs": (1, np.abs),
    "sqrt": (1, np.sqrt),
    "exp": (1, np.exp),
    "log": (1, np.log),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
    "if": (3, _if),
}

_BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
    "**": np.power,
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
    "==": np.equal,
    "!=": np.not_equal,
}

_COMPARISONS = ("<", "<=", ">", ">=", "==", "!=")

Node = Callable[[dict], object]


@dataclass
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {source[pos]!r}", source, pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, variables: tuple[str, ...]):
        self.source = source
        self.variables = variables
        self.tokens = _tokenize(source)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: _Token | None = None):
        tok = tok or self.tok
        raise ExpressionSyntaxError(message, self.source, tok.pos)

    def accept(self, *texts: str) -> _Token | None:
        if self.tok.kind == "op" and self.tok.text in texts:
            tok = self.tok
            self.i += 1
            return tok
        return None

    def expect(self, text: str) -> None:
        if not self.accept(text):
            self.error(f"expected {text!r}")

    def parse(self) -> Node:
        if self.tok.kind == "end":
            self.error("empty expression")
        node = self.comparison()
        if self.tok.kind != "end":
            self.error(f"unexpected token {self.tok.text!r}")
        return node

    def comparison(self) -> Node:
        left = self.sum()
        tok = self.accept(*_COMPARISONS)
        if tok:
            left = _binary(tok.text, left, self.sum())
            if self.accept(*_COMPARISONS):
                self.error("chained comparisons are not supported", self.tokens[self.i - 1])
        return left

    def sum(self) -> Node:
        left = self.product()
        while tok := self.accept("+", "-"):
            left = _binary(tok.text, left, self.product())
        return left

    def product(self) -> Node:
        left = self.unary()
        while tok := self.accept("*", "/"):
            left = _binary(tok.text, left, self.unary())
        return left

    def unary(self) -> Node:
        if self.accept("-"):
            operand = self.unary()
            return lambda env: np.negative(operand(env))
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        tok = self.accept("^", "**")
        if tok:
            # right associative: 2^3^2 == 2^(3^2)
            return _binary(tok.text, base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            value = float(tok.text)
            return lambda env: value
        if tok.kind == "name":
            self.i += 1
            if self.accept("("):
                return self.call(tok)
            if tok.text in self.variables:
                name = tok.text
                return lambda env: env[name]
            if tok.text in _CONSTANTS:
                value = _CONSTANTS[tok.text]
                return lambda env: value
            self.error(f"unknown name {tok.text!r}", tok)
        if self.accept("("):
            node = self.comparison()
            self.expect(")")
            return node
        if tok.kind == "end":
            self.error("unexpected end of expression")
        self.error(f"unexpected token {tok.text!r}")

    def call(self, name_tok: _Token) -> Node:
        if name_tok.text not in _FUNCTIONS:
            self.error(f"unknown function {name_tok.text!r}", name_tok)
        arity, fn = _FUNCTIONS[name_tok.text]
        args = []
        if not self.accept(")"):
            args.append(self.comparison())
            while self.accept(","):
                args.append(self.comparison())
            self.expect(")")
        if len(args) != arity:
            self.error(f"{name_tok.text}() takes {arity} argument(s), got {len(args)}", name_tok)
        return lambda env: fn(*(a(env) for a in args))


def _binary(op: str, left: Node, right: Node) -> Node:
    fn = _BINARY[op]
    return lambda env: fn(left(env), right(env))


@dataclass(frozen=True)
class Expression:
    """A compiled expression over a fixed tuple of variable names."""

    source: str
    variables: tuple[str, ...]
    _node: Node = field(repr=False, compare=False)

    def __call__(self, *args, **kwargs):
        env = dict(zip(self.variables, args))
        env.update(kwargs)
        missing = [v for v in self.variables if v not in env]
        if missing:
            raise TypeError(f"missing value for {', '.join(missing)}")
        arrays = {k: np.asarray(v, dtype=float) for k, v in env.items()}
        scalar = all(a.ndim == 0 for a in arrays.values())
        with np.errstate(all="ignore"):
            out = np.asarray(self._node(arrays), dtype=float)
        if scalar:
            return float(out)
        shape = np.broadcast_shapes(*(a.shape for a in arrays.values()))
        return np.broadcast_to(out, shape).copy()

    def __str__(self) -> str:
        return self.source


def compile_expression(source: str, variables: tuple[str, ...] | str = ("x",)) -> Expression:
    if isinstance(variables, str):
        variables = (variables,)
    node = _Parser(source, tuple(variables)).parse()
    return Expression(source, tuple(variables), node)
