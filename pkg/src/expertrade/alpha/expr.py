"""Alpha expression AST, parser and canonical printer.

Grammar::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | primary
    primary := NUMBER | FIELD | NAME '(' args ')' | '(' expr ')'

Fields are ``open high low close volume vwap`` plus ``advN`` / ``adv(N)``.
A minus sign applied directly to a numeric literal is folded into the literal.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Union

BASE_FIELDS = ("open", "high", "low", "close", "volume", "vwap")
UNARY_FUNCS = ("abs", "log")
TS_KINDS = (
    "ts_min",
    "ts_max",
    "ts_rank",
    "ts_argmax",
    "ts_argmin",
    "stddev",
    "sum",
    "mean",
    "delta",
    "decay_linear",
)
FUNC_ALIASES = {"correlation": "corr"}
MIN_WINDOW = {"stddev": 2, "corr": 2}


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class Field:
    name: str
    window: int | None = None  # only for adv


@dataclass(frozen=True)
class Unary:
    op: str  # neg | abs | log
    arg: Expr


@dataclass(frozen=True)
class Binary:
    op: str  # + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Rank:
    arg: Expr


@dataclass(frozen=True)
class TsOp:
    kind: str
    arg: Expr
    window: int


@dataclass(frozen=True)
class Corr:
    left: Expr
    right: Expr
    window: int


Expr = Union[Literal, Field, Unary, Binary, Rank, TsOp, Corr]


class AlphaParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ExprSyntaxError(AlphaParseError):
    def __init__(self, message: str, position: int, expected: tuple[str, ...] = ()):
        if expected:
            message = f"{message}; expected one of: {', '.join(expected)}"
        super().__init__(message, position)
        self.expected = expected


class UnknownFunction(AlphaParseError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown function or field {name!r}", position)
        self.name = name


class ArityError(AlphaParseError):
    def __init__(self, name: str, expected: int, got: int, position: int):
        super().__init__(f"{name} takes {expected} argument(s), got {got}", position)
        self.name = name
        self.expected = expected
        self.got = got


class InvalidWindow(AlphaParseError):
    pass


def children(node: Expr) -> tuple[Expr, ...]:
    if isinstance(node, (Unary, Rank, TsOp)):
        return (node.arg,)
    if isinstance(node, (Binary, Corr)):
        return (node.left, node.right)
    return ()


def walk(node: Expr) -> Iterator[Expr]:
    """Pre-order traversal."""
    yield node
    for child in children(node):
        yield from walk(child)


def depth(node: Expr) -> int:
    kids = children(node)
    return 0 if not kids else 1 + max(depth(k) for k in kids)


def lookback(node: Expr) -> int:
    """Number of bars before the evaluation date the expression reads."""
    if isinstance(node, Literal):
        return 0
    if isinstance(node, Field):
        return node.window - 1 if node.window else 0
    if isinstance(node, (Unary, Rank)):
        return lookback(node.arg)
    if isinstance(node, Binary):
        return max(lookback(node.left), lookback(node.right))
    if isinstance(node, TsOp):
        extra = node.window if node.kind == "delta" else node.window - 1
        return lookback(node.arg) + extra
    if isinstance(node, Corr):
        return max(lookback(node.left), lookback(node.right)) + node.window - 1
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Tokenizer / parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/(),]))"
)
_ADV = re.compile(r"adv(\d+)$")


@dataclass(frozen=True)
class _Tok:
    kind: str  # num | name | op | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        assert kind is not None
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind != "op":
            raise ExprSyntaxError(f"unexpected {self._describe(self.tok)}", self.tok.pos, (repr(text),))
        return self.advance()

    @staticmethod
    def _describe(tok: _Tok) -> str:
        return "end of input" if tok.kind == "end" else repr(tok.text)

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(
                f"unexpected {self._describe(self.tok)}", self.tok.pos, ("operator", "end of input")
            )
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            arg = self.unary()
            if isinstance(arg, Literal):
                return Literal(-arg.value)
            return Unary("neg", arg)
        return self.primary()

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Literal(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "name":
            self.advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(tok)
            return self.field(tok)
        raise ExprSyntaxError(
            f"unexpected {self._describe(tok)}", tok.pos, ("number", "field", "function", "'('", "'-'")
        )

    def field(self, tok: _Tok) -> Field:
        name = tok.text
        if name in BASE_FIELDS:
            return Field(name)
        m = _ADV.match(name)
        if m:
            window = int(m.group(1))
            if window < 1:
                raise InvalidWindow("adv window must be >= 1", tok.pos)
            return Field("adv", window)
        raise UnknownFunction(name, tok.pos)

    def args(self) -> list[tuple[Expr, _Tok]]:
        self.expect("(")
        out: list[tuple[Expr, _Tok]] = []
        if self.tok.kind == "op" and self.tok.text == ")":
            self.advance()
            return out
        while True:
            start = self.tok
            out.append((self.expr(), start))
            if self.tok.kind == "op" and self.tok.text == ",":
                self.advance()
                continue
            self.expect(")")
            return out

    @staticmethod
    def window(arg: tuple[Expr, _Tok], func: str) -> int:
        node, tok = arg
        if not isinstance(node, Literal) or not float(node.value).is_integer():
            raise InvalidWindow(f"{func}: window must be an integer literal", tok.pos)
        w = int(node.value)
        if w < MIN_WINDOW.get(func, 1):
            raise InvalidWindow(f"{func}: window must be >= {MIN_WINDOW.get(func, 1)}, got {w}", tok.pos)
        return w

    def call(self, name_tok: _Tok) -> Expr:
        name = FUNC_ALIASES.get(name_tok.text, name_tok.text)
        if name == "adv":
            args = self.args()
            if len(args) != 1:
                raise ArityError(name, 1, len(args), name_tok.pos)
            return Field("adv", self.window(args[0], name))
        if name not in UNARY_FUNCS + TS_KINDS + ("rank", "corr"):
            raise UnknownFunction(name_tok.text, name_tok.pos)
        args = self.args()
        if name in UNARY_FUNCS or name == "rank":
            if len(args) != 1:
                raise ArityError(name, 1, len(args), name_tok.pos)
            return Rank(args[0][0]) if name == "rank" else Unary(name, args[0][0])
        if name == "corr":
            if len(args) != 3:
                raise ArityError(name, 3, len(args), name_tok.pos)
            return Corr(args[0][0], args[1][0], self.window(args[2], name))
        if len(args) != 2:
            raise ArityError(name, 2, len(args), name_tok.pos)
        return TsOp(name, args[0][0], self.window(args[1], name))


def parse(text: str) -> Expr:
    """Parse an alpha expression string into an AST."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_UNARY_PREC = 3
_ATOM_PREC = 4


def _prec(node: Expr) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary) and node.op == "neg":
        return _UNARY_PREC
    if isinstance(node, Literal) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        return _UNARY_PREC
    return _ATOM_PREC


def _fmt_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(float(value))


def to_string(node: Expr) -> str:
    """Canonical text with minimal parentheses; parse(to_string(e)) == e."""
    if isinstance(node, Literal):
        return _fmt_number(node.value)
    if isinstance(node, Field):
        return f"adv{node.window}" if node.name == "adv" else node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            inner = to_string(node.arg)
            if _prec(node.arg) < _UNARY_PREC:
                inner = f"({inner})"
            return f"-{inner}"
        return f"{node.op}({to_string(node.arg)})"
    if isinstance(node, Binary):
        p = _PREC[node.op]
        left = to_string(node.left)
        right = to_string(node.right)
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    if isinstance(node, Rank):
        return f"rank({to_string(node.arg)})"
    if isinstance(node, TsOp):
        return f"{node.kind}({to_string(node.arg)}, {node.window})"
    if isinstance(node, Corr):
        return f"corr({to_string(node.left)}, {to_string(node.right)}, {node.window})"
    raise TypeError(f"not an expression node: {node!r}")
