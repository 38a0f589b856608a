"""Action-block expression language.

The bracketed snippets in a program (`[robulab forward: f_vel]`) use a
small keyword-message language: number and boolean literals, variable
references, unary messages (`t_vel negated`), keyword messages
(`robulab isThereAnObstacle: min_distance`) and parenthesized
subexpressions. Unary messages bind tighter than keyword messages, so
`robulab turn: t_vel negated` negates `t_vel` first.

Evaluation runs against an :class:`Environment` of lexically chained
frames plus a root registry of host objects. Host objects receive
messages through a single `receive_message(selector, args)` hook, which
keeps the expression language ignorant of what the host actually is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

from .errors import EvalError, ParseError

__all__ = [
    "Expr",
    "NumberLiteral",
    "BooleanLiteral",
    "VarRef",
    "UnaryMessage",
    "KeywordMessage",
    "Parenthesized",
    "Environment",
    "SingletonFactory",
    "parse_expr",
    "eval_expr",
    "print_expr",
]


# ---------------------------------------------------------------------------
# Expression tree


@dataclass(frozen=True)
class NumberLiteral:
    value: Union[int, float]


@dataclass(frozen=True)
class BooleanLiteral:
    value: bool


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class UnaryMessage:
    receiver: "Expr"
    selector: str


@dataclass(frozen=True)
class KeywordMessage:
    receiver: "Expr"
    selector: str  # concatenated `part:` segments, e.g. "isThereAnObstacle:"
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class Parenthesized:
    inner: "Expr"


Expr = Union[NumberLiteral, BooleanLiteral, VarRef, UnaryMessage, KeywordMessage, Parenthesized]


# ---------------------------------------------------------------------------
# Lexer

_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789-")
_DIGITS = set("0123456789")


@dataclass(frozen=True)
class _Token:
    kind: str  # NUMBER | IDENT | KEYWORD | LPAREN | RPAREN | EOF
    value: object
    line: int
    col: int


def _lex_expr(text: str, line: int, col: int) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            col += 1
            i += 1
            continue
        start_line, start_col = line, col
        if c == "(":
            tokens.append(_Token("LPAREN", "(", start_line, start_col))
            i += 1
            col += 1
        elif c == ")":
            tokens.append(_Token("RPAREN", ")", start_line, start_col))
            i += 1
            col += 1
        elif c in _DIGITS:
            j = i
            while j < n and text[j] in _DIGITS:
                j += 1
            is_float = False
            if j < n and text[j] == "." and j + 1 < n and text[j + 1] in _DIGITS:
                is_float = True
                j += 1
                while j < n and text[j] in _DIGITS:
                    j += 1
            lexeme = text[i:j]
            value: Union[int, float] = float(lexeme) if is_float else int(lexeme)
            tokens.append(_Token("NUMBER", value, start_line, start_col))
            col += j - i
            i = j
        elif c in _IDENT_START:
            j = i
            while j < n and text[j] in _IDENT_CONT:
                # `-` only continues an identifier when not starting `->`
                if text[j] == "-" and j + 1 < n and text[j + 1] == ">":
                    break
                j += 1
            name = text[i:j]
            col += j - i
            i = j
            if i < n and text[i] == ":":
                tokens.append(_Token("KEYWORD", name + ":", start_line, start_col))
                i += 1
                col += 1
            else:
                tokens.append(_Token("IDENT", name, start_line, start_col))
        else:
            raise ParseError(f"unexpected character {c!r}", start_line, start_col)
    tokens.append(_Token("EOF", None, line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
#
#   expr    := unary (KEYWORD unary)*        -- parts form one keyword message
#   unary   := primary IDENT*
#   primary := NUMBER | true | false | IDENT | '(' expr ')'


class _ExprParser:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._pos = 0

    def _peek(self) -> _Token:
        return self._tokens[self._pos]

    def _next(self) -> _Token:
        tok = self._tokens[self._pos]
        if tok.kind != "EOF":
            self._pos += 1
        return tok

    def parse(self) -> Expr:
        expr = self._keyword()
        tok = self._peek()
        if tok.kind != "EOF":
            raise ParseError(f"unexpected {_describe(tok)} after expression", tok.line, tok.col)
        return expr

    def _keyword(self) -> Expr:
        receiver = self._unary()
        if self._peek().kind != "KEYWORD":
            return receiver
        parts: list[str] = []
        args: list[Expr] = []
        while self._peek().kind == "KEYWORD":
            parts.append(self._next().value)  # type: ignore[arg-type]
            args.append(self._unary())
        return KeywordMessage(receiver, "".join(parts), tuple(args))

    def _unary(self) -> Expr:
        expr = self._primary()
        while self._peek().kind == "IDENT":
            expr = UnaryMessage(expr, self._next().value)  # type: ignore[arg-type]
        return expr

    def _primary(self) -> Expr:
        tok = self._next()
        if tok.kind == "NUMBER":
            return NumberLiteral(tok.value)  # type: ignore[arg-type]
        if tok.kind == "IDENT":
            if tok.value == "true":
                return BooleanLiteral(True)
            if tok.value == "false":
                return BooleanLiteral(False)
            return VarRef(tok.value)  # type: ignore[arg-type]
        if tok.kind == "LPAREN":
            inner = self._keyword()
            closing = self._next()
            if closing.kind != "RPAREN":
                raise ParseError("expected ')'", closing.line, closing.col)
            return Parenthesized(inner)
        raise ParseError(f"expected an expression, found {_describe(tok)}", tok.line, tok.col)


def _describe(tok: _Token) -> str:
    if tok.kind == "EOF":
        return "end of input"
    return repr(tok.value)


def parse_expr(text: str, line: int = 1, col: int = 1) -> Expr:
    """Parse the interior of a bracketed action block.

    Raises :class:`ParseError` with a position relative to (line, col),
    which callers set to the block's location inside the enclosing file.
    """
    tokens = _lex_expr(text, line, col)
    if tokens[0].kind == "EOF":
        raise ParseError("empty action block", line, col)
    return _ExprParser(tokens).parse()


# ---------------------------------------------------------------------------
# Printer


def print_expr(expr: Expr) -> str:
    if isinstance(expr, NumberLiteral):
        return repr(expr.value)
    if isinstance(expr, BooleanLiteral):
        return "true" if expr.value else "false"
    if isinstance(expr, VarRef):
        return expr.name
    if isinstance(expr, Parenthesized):
        return f"({print_expr(expr.inner)})"
    if isinstance(expr, UnaryMessage):
        return f"{_printed_operand(expr.receiver)} {expr.selector}"
    if isinstance(expr, KeywordMessage):
        parts = expr.selector.split(":")[:-1]
        pieces = [_printed_operand(expr.receiver)]
        for part, arg in zip(parts, expr.args):
            pieces.append(f"{part}: {_printed_operand(arg)}")
        return " ".join(pieces)
    raise TypeError(f"not an expression: {expr!r}")


def _printed_operand(expr: Expr) -> str:
    # keyword messages are the loosest binders; parenthesize them in
    # operand position so the printed text re-parses to the same tree
    text = print_expr(expr)
    if isinstance(expr, KeywordMessage):
        return f"({text})"
    return text


# ---------------------------------------------------------------------------
# Environment


class Environment:
    """Lexically chained name->value frames.

    Lookup walks frames innermost-first and falls back to the root
    frame's host registry. Values are plain Python objects: numbers,
    booleans, ``None`` for nil, or host objects.
    """

    __slots__ = ("_vars", "_parent", "_host_registry")

    def __init__(self, parent: "Environment | None" = None, host_registry: dict | None = None):
        self._vars: dict[str, object] = {}
        self._parent = parent
        self._host_registry: dict[str, object] = dict(host_registry) if host_registry else {}

    def child(self) -> "Environment":
        return Environment(parent=self)

    def define(self, name: str, value: object) -> None:
        self._vars[name] = value

    def remove(self, name: str) -> None:
        self._vars.pop(name, None)

    def has_own(self, name: str) -> bool:
        return name in self._vars

    def register_host(self, name: str, obj: object) -> None:
        self._host_registry[name] = obj

    def lookup(self, name: str) -> object:
        env: Environment | None = self
        last = self
        while env is not None:
            if name in env._vars:
                return env._vars[name]
            last = env
            env = env._parent
        if name in last._host_registry:
            return last._host_registry[name]
        raise EvalError(f"unknown variable '{name}'")

    def own_bindings(self) -> dict[str, object]:
        return dict(self._vars)

    def visible_bindings(self) -> dict[str, object]:
        """All bindings reachable from this frame, inner shadowing outer."""
        chain: list[Environment] = []
        env: Environment | None = self
        while env is not None:
            chain.append(env)
            env = env._parent
        merged: dict[str, object] = {}
        for frame in reversed(chain):
            merged.update(frame._vars)
        return merged


class SingletonFactory:
    """Host-registry entry whose `uniqueInstance` message yields one shared object."""

    def __init__(self, create: Callable[[], object]):
        self._create = create
        self._instance: object | None = None

    def receive_message(self, selector: str, args: list) -> object:
        if selector == "uniqueInstance" and not args:
            if self._instance is None:
                self._instance = self._create()
            return self._instance
        raise EvalError(f"factory does not understand '{selector}'")


# ---------------------------------------------------------------------------
# Evaluation


def eval_expr(expr: Expr, env: Environment) -> object:
    """Evaluate an expression against an environment.

    Raises :class:`EvalError` for unknown variables or selectors, arity
    or type mismatches, and non-finite numeric results. Never raises
    anything else.
    """
    if isinstance(expr, NumberLiteral):
        return expr.value
    if isinstance(expr, BooleanLiteral):
        return expr.value
    if isinstance(expr, VarRef):
        return env.lookup(expr.name)
    if isinstance(expr, Parenthesized):
        return eval_expr(expr.inner, env)
    if isinstance(expr, UnaryMessage):
        receiver = eval_expr(expr.receiver, env)
        return _send(receiver, expr.selector, [])
    if isinstance(expr, KeywordMessage):
        receiver = eval_expr(expr.receiver, env)
        args = [eval_expr(a, env) for a in expr.args]
        return _send(receiver, expr.selector, args)
    raise EvalError(f"not an expression: {expr!r}")


def _send(receiver: object, selector: str, args: list) -> object:
    # bool first: bool is a subclass of int
    if isinstance(receiver, bool):
        if selector == "not":
            _require_arity(selector, args, 0)
            return not receiver
        raise EvalError(f"booleans do not understand '{selector}'")
    if isinstance(receiver, (int, float)):
        if selector == "negated":
            _require_arity(selector, args, 0)
            return -receiver
        raise EvalError(f"numbers do not understand '{selector}'")
    if receiver is None:
        raise EvalError(f"nil does not understand '{selector}'")
    hook = getattr(receiver, "receive_message", None)
    if hook is None:
        raise EvalError(f"object {type(receiver).__name__} cannot receive messages")
    return _checked(hook(selector, args), selector)


def _require_arity(selector: str, args: list, expected: int) -> None:
    if len(args) != expected:
        raise EvalError(f"'{selector}' takes {expected} argument(s), got {len(args)}")


def _checked(value: object, selector: str) -> object:
    if isinstance(value, float) and not math.isfinite(value):
        raise EvalError(f"'{selector}' produced a non-finite number")
    return value
