"""
Terms of the untyped lambda calculus in de Bruijn form, plus a named front end.

A de Bruijn term is one of ``Var(index)``, ``Lam(body)`` or ``App(fn, arg)``.
Named terms (``NVar``, ``NLam``, ``NApp``) exist only so that programs can be
written with identifiers; :func:`to_debruijn` converts them and everything
downstream works on nameless terms.

Surface syntax::

    debruijn:  term := natural | "\\." term | term term | "(" term ")"
    named:     term := ident   | "\\" ident "." term | term term | "(" term ")"

Application is left-associative and binds tighter than a lambda body, which
extends as far right as possible.  ``--`` starts a comment running to the end
of the line, and ``λ`` is accepted in place of the backslash.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

__all__ = [
    "Term", "Var", "Lam", "App",
    "NamedTerm", "NVar", "NLam", "NApp",
    "ParseError", "UnboundVariableError", "IndexOverflowError",
    "MAX_INDEX",
    "parse", "to_debruijn", "from_debruijn", "shift", "free_indices",
    "is_closed", "size", "depth", "pretty",
]

#: Largest index accepted by the parser and produced by :func:`shift`.
MAX_INDEX = 2**63 - 1


@dataclass(frozen=True, slots=True)
class Var:
    index: int

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"de Bruijn index must be non-negative, got {self.index}")

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True, slots=True)
class Lam:
    body: Term

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True, slots=True)
class App:
    fn: Term
    arg: Term

    def __str__(self) -> str:
        return pretty(self)


Term = Union[Var, Lam, App]


@dataclass(frozen=True, slots=True)
class NVar:
    name: str

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True, slots=True)
class NLam:
    name: str
    body: NamedTerm

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True, slots=True)
class NApp:
    fn: NamedTerm
    arg: NamedTerm

    def __str__(self) -> str:
        return pretty(self)


NamedTerm = Union[NVar, NLam, NApp]


class ParseError(ValueError):
    """Raised for malformed input; carries a 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class IndexOverflowError(ParseError):
    pass


class UnboundVariableError(ValueError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r\n]+|--[^\n]*)"
    r"|(?P<lam>\\|λ)"
    r"|(?P<dot>\.)"
    r"|(?P<lp>\()"
    r"|(?P<rp>\))"
    r"|(?P<num>[0-9]+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_']*)"
)


class _Lexer:
    def __init__(self, text: str):
        self.tokens: list[tuple[str, str, int, int]] = []
        line, line_start, pos = 1, 0, 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
            kind = m.lastgroup
            if kind != "ws":
                self.tokens.append((kind, m.group(), line, pos - line_start + 1))
            for i, ch in enumerate(m.group()):
                if ch == "\n":
                    line, line_start = line + 1, pos + i + 1
            pos = m.end()
        self.tokens.append(("eof", "", line, pos - line_start + 1))
        self.i = 0

    def peek(self) -> tuple[str, str, int, int]:
        return self.tokens[self.i]

    def next(self) -> tuple[str, str, int, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, what: str) -> tuple[str, str, int, int]:
        tok = self.next()
        if tok[0] != kind:
            found = "end of input" if tok[0] == "eof" else repr(tok[1])
            raise ParseError(f"expected {what}, found {found}", tok[2], tok[3])
        return tok


class _Parser:
    def __init__(self, text: str, named: bool):
        self.lex = _Lexer(text)
        self.named = named

    def program(self):
        t = self.term()
        tok = self.lex.peek()
        if tok[0] != "eof":
            raise ParseError(f"unexpected {tok[1]!r}", tok[2], tok[3])
        return t

    def term(self):
        # binders are collected iteratively so long chains of lambdas do not recurse
        binders = []
        while self.lex.peek()[0] == "lam":
            self.lex.next()
            if self.named:
                binders.append(self.lex.expect("ident", "identifier after binder")[1])
            else:
                binders.append(None)
            self.lex.expect("dot", "'.' after binder")
        t = self.application()
        for name in reversed(binders):
            t = NLam(name, t) if self.named else Lam(t)
        return t

    def application(self):
        t = self.atom()
        while True:
            kind = self.lex.peek()[0]
            if kind in ("num", "ident", "lp"):
                t = self._app(t, self.atom())
            elif kind == "lam":
                # a trailing lambda is the last argument and extends to the right
                return self._app(t, self.term())
            else:
                return t

    def _app(self, f, a):
        return NApp(f, a) if self.named else App(f, a)

    def atom(self):
        kind, text, line, col = self.lex.next()
        if kind == "lp":
            t = self.term()
            self.lex.expect("rp", "')'")
            return t
        if kind == "num" and not self.named:
            n = int(text)
            if n > MAX_INDEX:
                raise IndexOverflowError(f"index {text} exceeds {MAX_INDEX}", line, col)
            return Var(n)
        if kind == "ident" and self.named:
            return NVar(text)
        found = "end of input" if kind == "eof" else repr(text)
        want = "identifier" if self.named else "index"
        raise ParseError(f"expected {want}, '(' or binder, found {found}", line, col)


def parse(text: str, syntax: str = "debruijn"):
    """Parse ``text`` as a de Bruijn term or, with ``syntax="named"``, a named term."""
    if syntax not in ("debruijn", "named"):
        raise ValueError(f"unknown syntax {syntax!r}")
    return _Parser(text, syntax == "named").program()


# ---------------------------------------------------------------------------
# conversion

def to_debruijn(t: NamedTerm, scope: tuple[str, ...] = ()) -> Term:
    """Replace each variable by the number of binders between it and its binder.

    >>> to_debruijn(parse(r"\\x. \\y. x", "named"))
    Lam(body=Lam(body=Var(index=1)))
    """
    if isinstance(t, NVar):
        for i in range(len(scope) - 1, -1, -1):
            if scope[i] == t.name:
                return Var(len(scope) - 1 - i)
        raise UnboundVariableError(t.name)
    if isinstance(t, NLam):
        return Lam(to_debruijn(t.body, scope + (t.name,)))
    return App(to_debruijn(t.fn, scope), to_debruijn(t.arg, scope))


def from_debruijn(t: Term, free: tuple[str, ...] = ()) -> NamedTerm:
    """Restore names, using ``x0, x1, ...`` for binders; ``free[i]`` names free index i."""
    names = list(reversed(free))

    def go(t: Term, depth: int) -> NamedTerm:
        if isinstance(t, Var):
            pos = len(names) - 1 - t.index
            if pos < 0:
                return NVar(f"free{t.index - len(names)}")
            return NVar(names[pos])
        if isinstance(t, Lam):
            names.append(f"x{depth}")
            try:
                return NLam(f"x{depth}", go(t.body, depth + 1))
            finally:
                names.pop()
        return NApp(go(t.fn, depth), go(t.arg, depth))

    return go(t, 0)


# ---------------------------------------------------------------------------
# index arithmetic

def shift(t: Term, x: int, m: int = 0) -> Term:
    """Add ``x`` to every index ``n >= m``, raising ``m`` by one under each binder."""
    if x == 0:
        return t
    if isinstance(t, Var):
        if t.index < m:
            return t
        n = t.index + x
        if n > MAX_INDEX:
            raise OverflowError(f"shifted index {n} exceeds {MAX_INDEX}")
        return Var(n)
    if isinstance(t, Lam):
        return Lam(shift(t.body, x, m + 1))
    return App(shift(t.fn, x, m), shift(t.arg, x, m))


def free_indices(t: Term) -> set[int]:
    """Indices free at the top of ``t``, i.e. ``n - d`` for each ``Var(n)`` under d binders with n >= d."""
    out: set[int] = set()
    todo = [(t, 0)]
    while todo:
        t, d = todo.pop()
        if isinstance(t, Var):
            if t.index >= d:
                out.add(t.index - d)
        elif isinstance(t, Lam):
            todo.append((t.body, d + 1))
        else:
            todo.append((t.arg, d))
            todo.append((t.fn, d))
    return out


def is_closed(t: Term) -> bool:
    return not free_indices(t)


def _nodes(t) -> Iterator:
    todo = [t]
    while todo:
        t = todo.pop()
        yield t
        if isinstance(t, (Lam, NLam)):
            todo.append(t.body)
        elif isinstance(t, (App, NApp)):
            todo.append(t.arg)
            todo.append(t.fn)


def size(t) -> int:
    """Number of nodes; ``(\\. 0) (\\. 0)`` has size 5."""
    return sum(1 for _ in _nodes(t))


def depth(t: Term) -> int:
    best = 0
    todo = [(t, 1)]
    while todo:
        t, d = todo.pop()
        best = max(best, d)
        if isinstance(t, Lam):
            todo.append((t.body, d + 1))
        elif isinstance(t, App):
            todo.append((t.fn, d + 1))
            todo.append((t.arg, d + 1))
    return best


# ---------------------------------------------------------------------------
# printing

def pretty(t, syntax: str | None = None) -> str:
    """Render a term so that ``parse(pretty(t))`` gives ``t`` back.

    The syntax is inferred from the node type unless given.  Operators that are
    lambdas and arguments that are applications or lambdas get parentheses.
    """
    named = isinstance(t, (NVar, NLam, NApp)) if syntax is None else syntax == "named"
    if named and isinstance(t, (Var, Lam, App)):
        t = from_debruijn(t)
    elif not named and isinstance(t, (NVar, NLam, NApp)):
        t = to_debruijn(t)

    out: list[str] = []
    # explicit stack of pending strings and nodes keeps deep terms off the C stack
    todo: list = [t]
    while todo:
        item = todo.pop()
        if isinstance(item, str):
            out.append(item)
        elif isinstance(item, Var):
            out.append(str(item.index))
        elif isinstance(item, NVar):
            out.append(item.name)
        elif isinstance(item, Lam):
            out.append("\\. ")
            todo.append(item.body)
        elif isinstance(item, NLam):
            out.append(f"\\{item.name}. ")
            todo.append(item.body)
        else:
            fn, arg = item.fn, item.arg
            if isinstance(arg, (App, NApp, Lam, NLam)):
                todo += [")", arg, " ("]
            else:
                todo += [arg, " "]
            if isinstance(fn, (Lam, NLam)):
                todo += [")", fn, "("]
            else:
                todo.append(fn)
    return "".join(out)
