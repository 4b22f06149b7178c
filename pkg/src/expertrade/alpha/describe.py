"""Plain-language descriptions of alpha expressions.

A canned lookup table takes precedence; otherwise a description is rendered
from the AST, one phrase per operator node.
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import Mapping

from .expr import Binary, Corr, Expr, Field, Literal, Rank, TsOp, Unary, parse, to_string

FIELD_PHRASES = {
    "open": "the daily opening price",
    "high": "the daily high price",
    "low": "the daily low price",
    "close": "the daily closing price",
    "volume": "the daily trading volume",
    "vwap": "the typical price (high + low + close) / 3",
}

# Each phrase carries a keyword that no other phrase contains.
UNARY_PHRASES = {
    "neg": "the negation of {0}",
    "abs": "the absolute value of {0}",
    "log": "the natural logarithm of {0}",
}
BINARY_PHRASES = {
    "+": "the sum of {0} and {1}",
    "-": "the difference between {0} and {1}",
    "*": "the product of {0} and {1}",
    "/": "the ratio of {0} to {1}",
}
TS_PHRASES = {
    "ts_min": "the lowest value over the last {w} days of {0}",
    "ts_max": "the highest value over the last {w} days of {0}",
    "ts_rank": "the time-series percentile over the last {w} days of {0}",
    "ts_argmax": "the day index of the maximum over the last {w} days of {0}",
    "ts_argmin": "the day index of the minimum over the last {w} days of {0}",
    "stddev": "the standard deviation over the last {w} days of {0}",
    "sum": "the rolling total over the last {w} days of {0}",
    "mean": "the moving average over the last {w} days of {0}",
    "delta": "the change over {w} days in {0}",
    "decay_linear": "the linearly decayed average over the last {w} days of {0}",
}
RANK_PHRASE = "the cross-sectional rank of {0}"
CORR_PHRASE = "the correlation over the last {w} days between {0} and {1}"

# keyword that identifies each operator inside a rendered description
OPERATOR_KEYWORDS = {
    "unary:neg": "negation of",
    "unary:abs": "absolute value of",
    "unary:log": "natural logarithm of",
    "binary:+": "sum of",
    "binary:-": "difference between",
    "binary:*": "product of",
    "binary:/": "ratio of",
    "ts:ts_min": "lowest value",
    "ts:ts_max": "highest value",
    "ts:ts_rank": "time-series percentile",
    "ts:ts_argmax": "day index of the maximum",
    "ts:ts_argmin": "day index of the minimum",
    "ts:stddev": "standard deviation",
    "ts:sum": "rolling total",
    "ts:mean": "moving average",
    "ts:delta": "change over",
    "ts:decay_linear": "linearly decayed average",
    "rank": "cross-sectional rank",
    "corr": "correlation",
}


def operator_key(node: Expr) -> str | None:
    if isinstance(node, Unary):
        return f"unary:{node.op}"
    if isinstance(node, Binary):
        return f"binary:{node.op}"
    if isinstance(node, TsOp):
        return f"ts:{node.kind}"
    if isinstance(node, Rank):
        return "rank"
    if isinstance(node, Corr):
        return "corr"
    return None


def phrase(node: Expr) -> str:
    if isinstance(node, Literal):
        return f"the constant {to_string(node)}"
    if isinstance(node, Field):
        if node.name == "adv":
            return f"the {node.window}-day average daily volume"
        return FIELD_PHRASES[node.name]
    if isinstance(node, Unary):
        return UNARY_PHRASES[node.op].format(phrase(node.arg))
    if isinstance(node, Binary):
        return BINARY_PHRASES[node.op].format(phrase(node.left), phrase(node.right))
    if isinstance(node, Rank):
        return RANK_PHRASE.format(phrase(node.arg))
    if isinstance(node, TsOp):
        return TS_PHRASES[node.kind].format(phrase(node.arg), w=node.window)
    if isinstance(node, Corr):
        return CORR_PHRASE.format(phrase(node.left), phrase(node.right), w=node.window)
    raise TypeError(f"not an expression node: {node!r}")


def _strip_unit(node: Expr) -> Expr:
    if isinstance(node, Binary):
        left, right = _strip_unit(node.left), _strip_unit(node.right)
        if node.op == "*" and left == Literal(1.0):
            return right
        if node.op in "*/" and right == Literal(1.0):
            return left
        return Binary(node.op, left, right)
    if isinstance(node, Unary):
        return Unary(node.op, _strip_unit(node.arg))
    if isinstance(node, Rank):
        return Rank(_strip_unit(node.arg))
    if isinstance(node, TsOp):
        return TsOp(node.kind, _strip_unit(node.arg), node.window)
    if isinstance(node, Corr):
        return Corr(_strip_unit(node.left), _strip_unit(node.right), node.window)
    return node


def lookup_key(expr: Expr) -> str:
    """Canonical text used to match canned descriptions; unit factors (``1 * x``) are ignored."""
    return to_string(_strip_unit(expr))


def bundled_descriptions_path() -> Path:
    return Path(__file__).resolve().parent.parent / "data" / "descriptions.tsv"


def load_descriptions(path: str | Path) -> dict[str, str]:
    """``expression<TAB>description`` lines keyed by canonical expression."""
    table: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            expr_text, sep, desc = line.partition("\t")
            if not sep or not desc.strip():
                raise ValueError(f"{path}:{lineno}: expected expression<TAB>description")
            table[lookup_key(parse(expr_text))] = desc.strip()
    return table


@lru_cache(maxsize=1)
def bundled_descriptions() -> Mapping[str, str]:
    return load_descriptions(bundled_descriptions_path())


def describe_expr(expr: Expr, lookup: Mapping[str, str] | None = None) -> str:
    table = bundled_descriptions() if lookup is None else lookup
    canned = table.get(lookup_key(expr))
    if canned:
        return canned
    return phrase(expr)


def describe(record, lookup: Mapping[str, str] | None = None) -> str:
    """Description for an AlphaRecord (lookup table first, then the AST template)."""
    return describe_expr(record.expression, lookup)
