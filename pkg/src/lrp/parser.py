"""Recursive-descent parser for program source text.

The concrete syntax is parenthesized forms with bracketed action
blocks:

    (var f_vel := [0.25])
    (machine Tito
        (state forward
            (onentry [robulab forward: f_vel]))
        (state stop
            (onentry [robulab stop]))
        (on obstacle forward -> stop t-stop)
        (ontime 500 stop -> forward t-retry)
        (eps a -> b t-skip)
        (event obstacle [robulab isThereAnObstacle: min_distance]))
    (spawn Tito forward)

`;` starts a comment running to end of line. Identifiers admit `-`
(`t-stop`) except where it would begin the `->` arrow. `parse_program`
is total over arbitrary text: it either returns an AST or raises
:class:`ParseError` with a 1-based line/column, never anything else.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass

from .actions import parse_expr
from .errors import ParseError
from .syntax import (
    EPSILON,
    EVENT,
    TIMEOUT,
    ActionBlock,
    EventDecl,
    MachineDecl,
    ProgramAST,
    SpawnDirective,
    StateDecl,
    TransitionDecl,
    VariableDecl,
    validate,
)

__all__ = ["parse_program"]

_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789-")
_DIGITS = set("0123456789")


@dataclass(frozen=True)
class _Token:
    kind: str  # LPAREN | RPAREN | IDENT | NUMBER | ASSIGN | ARROW | BLOCK | EOF
    value: object
    line: int
    col: int


@dataclass(frozen=True)
class _Block:
    text: str  # raw interior, brackets excluded
    line: int  # position of the first interior character
    col: int


def _lex(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(source)
    line = 1
    col = 1

    def advance(count: int) -> None:
        nonlocal i, line, col
        for _ in range(count):
            if source[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = source[i]
        if c in " \t\r\n":
            advance(1)
            continue
        if c == ";":
            while i < n and source[i] != "\n":
                advance(1)
            continue
        start_line, start_col = line, col
        if c == "(":
            tokens.append(_Token("LPAREN", "(", start_line, start_col))
            advance(1)
        elif c == ")":
            tokens.append(_Token("RPAREN", ")", start_line, start_col))
            advance(1)
        elif c == "[":
            advance(1)
            body_line, body_col = line, col
            start = i
            while i < n and source[i] != "]":
                advance(1)
            if i >= n:
                raise ParseError("unterminated '[' action block", start_line, start_col)
            raw = source[start:i]
            advance(1)  # closing bracket
            tokens.append(_Token("BLOCK", _Block(raw, body_line, body_col), start_line, start_col))
        elif c == ":":
            if i + 1 < n and source[i + 1] == "=":
                tokens.append(_Token("ASSIGN", ":=", start_line, start_col))
                advance(2)
            else:
                raise ParseError("expected ':='", start_line, start_col)
        elif c == "-":
            if i + 1 < n and source[i + 1] == ">":
                tokens.append(_Token("ARROW", "->", start_line, start_col))
                advance(2)
            else:
                raise ParseError("unexpected character '-'", start_line, start_col)
        elif c in _DIGITS:
            j = i
            while j < n and source[j] in _DIGITS:
                j += 1
            is_float = False
            if j < n and source[j] == "." and j + 1 < n and source[j + 1] in _DIGITS:
                is_float = True
                j += 1
                while j < n and source[j] in _DIGITS:
                    j += 1
            lexeme = source[i:j]
            value: object = float(lexeme) if is_float else int(lexeme)
            advance(j - i)
            tokens.append(_Token("NUMBER", value, start_line, start_col))
        elif c in _IDENT_START:
            j = i
            while j < n and source[j] in _IDENT_CONT:
                if source[j] == "-" and j + 1 < n and source[j + 1] == ">":
                    break
                j += 1
            name = source[i:j]
            advance(j - i)
            tokens.append(_Token("IDENT", name, start_line, start_col))
        else:
            raise ParseError(f"unexpected character {c!r}", start_line, start_col)
    tokens.append(_Token("EOF", None, line, col))
    return tokens


class _Parser:
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

    def _expect(self, kind: str, what: str) -> _Token:
        tok = self._next()
        if tok.kind != kind:
            raise ParseError(f"expected {what}, found {_describe(tok)}", tok.line, tok.col)
        return tok

    def _ident(self, what: str) -> str:
        return self._expect("IDENT", what).value  # type: ignore[return-value]

    # -- program -----------------------------------------------------------

    def parse_program(self) -> ProgramAST:
        variables: list[VariableDecl] = []
        machines: list[MachineDecl] = []
        spawns: list[SpawnDirective] = []
        while True:
            tok = self._peek()
            if tok.kind == "EOF":
                break
            if tok.kind == "RPAREN":
                raise ParseError("unexpected ')'", tok.line, tok.col)
            opener = self._expect("LPAREN", "'('")
            head = self._ident("a form name")
            if head == "var":
                variables.append(self._finish_var(opener))
            elif head == "machine":
                machines.append(self._finish_machine(opener))
            elif head == "spawn":
                spawns.append(self._finish_spawn(opener))
            else:
                raise ParseError(
                    f"unknown top-level form '{head}' (expected var, machine or spawn)",
                    opener.line,
                    opener.col,
                )
        return ProgramAST(tuple(variables), tuple(machines), tuple(spawns))

    def _finish_var(self, opener: _Token) -> VariableDecl:
        name = self._ident("a variable name")
        self._expect("ASSIGN", "':='")
        init = self._block("variable initializer")
        self._close(opener, "var")
        return VariableDecl(name, init)

    def _finish_spawn(self, opener: _Token) -> SpawnDirective:
        machine = self._ident("a machine name")
        state = self._ident("a state name")
        self._close(opener, "spawn")
        return SpawnDirective(machine, state)

    def _finish_machine(self, opener: _Token) -> MachineDecl:
        name = self._ident("a machine name")
        variables: list[VariableDecl] = []
        states: list[StateDecl] = []
        transitions: list[TransitionDecl] = []
        events: list[EventDecl] = []
        while True:
            tok = self._peek()
            if tok.kind == "RPAREN":
                self._next()
                break
            if tok.kind == "EOF":
                raise ParseError(
                    f"unbalanced parenthesis: '(machine {name}' opened at "
                    f"{opener.line}:{opener.col} is never closed",
                    tok.line,
                    tok.col,
                )
            inner = self._expect("LPAREN", "'(' or ')'")
            head = self._ident("a machine item")
            if head == "var":
                variables.append(self._finish_var(inner))
            elif head == "state":
                states.append(self._finish_state(inner))
            elif head == "on":
                transitions.append(self._finish_transition(inner, EVENT))
            elif head == "ontime":
                transitions.append(self._finish_transition(inner, TIMEOUT))
            elif head == "eps":
                transitions.append(self._finish_transition(inner, EPSILON))
            elif head == "event":
                events.append(self._finish_event(inner))
            else:
                raise ParseError(
                    f"unknown machine item '{head}' (expected var, state, on, ontime, eps or event)",
                    inner.line,
                    inner.col,
                )
        return MachineDecl(name, tuple(variables), tuple(states), tuple(transitions), tuple(events))

    def _finish_transition(self, opener: _Token, kind: str) -> TransitionDecl:
        trigger: object
        if kind == EVENT:
            trigger = self._ident("an event name")
        elif kind == TIMEOUT:
            tok = self._expect("NUMBER", "a duration in milliseconds")
            if not isinstance(tok.value, int):
                raise ParseError("timeout duration must be an integer millisecond count", tok.line, tok.col)
            trigger = tok.value
        else:
            trigger = None
        source = self._ident("a source state name")
        self._expect("ARROW", "'->'")
        target = self._ident("a target state name")
        name = self._ident("a transition name")
        action: ActionBlock | None = None
        if self._peek().kind == "BLOCK":
            action = self._block("transition action")
        self._close(opener, "transition")
        return TransitionDecl(kind, trigger, source, target, name, action)

    def _finish_event(self, opener: _Token) -> EventDecl:
        name = self._ident("an event name")
        guard = self._block("event guard")
        self._close(opener, "event")
        return EventDecl(name, guard)

    def _finish_state(self, opener: _Token) -> StateDecl:
        name = self._ident("a state name")
        onentry: ActionBlock | None = None
        running: ActionBlock | None = None
        onexit: ActionBlock | None = None
        nested: MachineDecl | None = None
        nested_spawn: SpawnDirective | None = None
        while True:
            tok = self._peek()
            if tok.kind == "RPAREN":
                self._next()
                break
            if tok.kind == "EOF":
                raise ParseError(
                    f"unbalanced parenthesis: '(state {name}' opened at "
                    f"{opener.line}:{opener.col} is never closed",
                    tok.line,
                    tok.col,
                )
            inner = self._expect("LPAREN", "'(' or ')'")
            head = self._ident("a state item")
            if head in ("onentry", "running", "onexit"):
                block = self._block(f"{head} action")
                self._close(inner, head)
                if head == "onentry":
                    if onentry is not None:
                        raise ParseError(f"state {name} has more than one onentry block", inner.line, inner.col)
                    onentry = block
                elif head == "running":
                    if running is not None:
                        raise ParseError(f"state {name} has more than one running block", inner.line, inner.col)
                    running = block
                else:
                    if onexit is not None:
                        raise ParseError(f"state {name} has more than one onexit block", inner.line, inner.col)
                    onexit = block
            elif head == "machine":
                if nested is not None:
                    raise ParseError(f"state {name} has more than one nested machine", inner.line, inner.col)
                nested = self._finish_machine(inner)
            elif head == "spawn":
                if nested_spawn is not None:
                    raise ParseError(f"state {name} has more than one spawn directive", inner.line, inner.col)
                nested_spawn = self._finish_spawn(inner)
            else:
                raise ParseError(
                    f"unknown state item '{head}' (expected onentry, running, onexit, machine or spawn)",
                    inner.line,
                    inner.col,
                )
        return StateDecl(name, onentry, running, onexit, nested, nested_spawn)

    # -- helpers -----------------------------------------------------------

    def _block(self, what: str) -> ActionBlock:
        tok = self._expect("BLOCK", f"a [...] block for {what}")
        block: _Block = tok.value  # type: ignore[assignment]
        expr = parse_expr(block.text, block.line, block.col)
        return ActionBlock(block.text.strip(), expr, line=tok.line, col=tok.col)

    def _close(self, opener: _Token, form: str) -> None:
        tok = self._next()
        if tok.kind == "RPAREN":
            return
        if tok.kind == "EOF":
            raise ParseError(
                f"unbalanced parenthesis: '({form}' opened at {opener.line}:{opener.col} is never closed",
                tok.line,
                tok.col,
            )
        raise ParseError(f"expected ')', found {_describe(tok)}", tok.line, tok.col)


def _describe(tok: _Token) -> str:
    if tok.kind == "EOF":
        return "end of input"
    if tok.kind == "BLOCK":
        return "a [...] block"
    return repr(tok.value)


def parse_program(source: str) -> ProgramAST:
    """Parse source text into a program.

    On success the returned AST carries its content digest and any
    name-resolution diagnostics (which never cause failure). On malformed
    input raises :class:`ParseError`; no other exception escapes.
    """
    tokens = _lex(source)
    ast = _Parser(tokens).parse_program()
    return dataclasses.replace(
        ast,
        source_hash=hashlib.sha256(source.encode("utf-8")).hexdigest(),
        diagnostics=tuple(validate(ast)),
    )
