"""CCS terms: abstract syntax, parser, scope checking, substitution and unfolding.

Concrete syntax::

    names a, b.
    rec x(a, b) = b!.0 | (b?.x(a, b) + a!.0),
        y() = tick
    in new b. x(a, b)

``?`` is input, ``!`` output, ``tick`` the success action.  Prefixing binds
tighter than ``+``, which binds tighter than ``|``.  A bare prefix stands for
``prefix.0``.  ``#`` starts a line comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence, Union


class CCSError(Exception):
    """Base class for all errors raised on CCS sources."""


class CCSSyntaxError(CCSError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class ScopeError(CCSError):
    """A well-formedness violation found by :func:`check`."""


class UnboundName(ScopeError):
    pass


class UnboundVariable(ScopeError):
    pass


class ArityMismatch(ScopeError):
    pass


class ShadowedName(ScopeError):
    pass


Pos = tuple[int, int]


# ---------------------------------------------------------------------------
# Abstract syntax
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Input:
    name: str

    def __str__(self) -> str:
        return f"{self.name}?"


@dataclass(frozen=True)
class Output:
    name: str

    def __str__(self) -> str:
        return f"{self.name}!"


@dataclass(frozen=True)
class Tick:
    def __str__(self) -> str:
        return "tick"


Prefix = Union[Input, Output, Tick]
TICK = Tick()


@dataclass(frozen=True)
class Sum:
    """Guarded sum; the empty sum is the inert process ``0``."""

    branches: tuple[tuple[Prefix, "Process"], ...] = ()
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Par:
    left: "Process"
    right: "Process"
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Nu:
    name: str
    body: "Process"
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    var: str
    args: tuple[str, ...]
    pos: Pos | None = field(default=None, compare=False, repr=False)


Process = Union[Sum, Par, Nu, Call]
ZERO = Sum(())


@dataclass(frozen=True)
class Definition:
    var: str
    params: tuple[str, ...]
    body: Process
    pos: Pos | None = field(default=None, compare=False, repr=False)

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class GlobalProcess:
    names: tuple[str, ...]
    definitions: tuple[Definition, ...]
    main: Process

    def defs(self) -> dict[str, Definition]:
        return {d.var: d for d in self.definitions}

    def __str__(self) -> str:
        return pretty_global(self)


def prefix_name(prefix: Prefix) -> str | None:
    return None if isinstance(prefix, Tick) else prefix.name


# ---------------------------------------------------------------------------
# Lexer and parser
# ---------------------------------------------------------------------------

KEYWORDS = {"names", "rec", "in", "new", "tick"}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<zero>0)
  | (?P<sym>[.,()=|+?!])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, keyword, zero, sym, eof
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise CCSSyntaxError(f"unexpected character {text[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        if kind != "ws":
            if kind == "ident" and value in KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, value, line, i - line_start + 1))
        for j, ch in enumerate(value):
            if ch == "\n":
                line += 1
                line_start = i + j + 1
        i = m.end()
    tokens.append(Token("eof", "", line, i - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    # token helpers
    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def at(self, text: str, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok.kind in ("sym", "keyword", "zero") and tok.text == text

    def advance(self) -> Token:
        tok = self.peek()
        self.i += 1
        return tok

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise CCSSyntaxError(f"{message}, found {found}", tok.line, tok.column)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.advance()

    def ident(self) -> Token:
        tok = self.peek()
        if tok.kind != "ident":
            self.error("expected an identifier")
        return self.advance()

    def ident_list(self, closer: str) -> tuple[str, ...]:
        names = []
        if not self.at(closer):
            names.append(self.ident().text)
            while self.at(","):
                self.advance()
                names.append(self.ident().text)
        return tuple(names)

    # grammar
    def global_process(self) -> GlobalProcess:
        names: tuple[str, ...] = ()
        if self.at("names"):
            self.advance()
            names = self.ident_list(".")
            self.expect(".")
        binders: list[tuple[str, Pos]] = []
        definitions: tuple[Definition, ...] = ()
        if self._leading_binders_then_rec():
            while self.at("new"):
                tok = self.advance()
                binders.append((self.ident().text, (tok.line, tok.column)))
                self.expect(".")
        if self.at("rec"):
            definitions = self.recblock()
        main = self.proc()
        for name, pos in reversed(binders):
            main = Nu(name, main, pos=pos)
        if self.peek().kind != "eof":
            self.error("expected end of input")
        return GlobalProcess(names, definitions, main)

    def _leading_binders_then_rec(self) -> bool:
        k = 0
        while self.at("new", k) and self.peek(k + 1).kind == "ident" and self.at(".", k + 2):
            k += 3
        return k > 0 and self.at("rec", k)

    def recblock(self) -> tuple[Definition, ...]:
        self.expect("rec")
        defs = [self.definition()]
        while self.at(","):
            self.advance()
            defs.append(self.definition())
        self.expect("in")
        seen: set[str] = set()
        for d in defs:
            if d.var in seen:
                line, col = d.pos or (0, 0)
                raise CCSSyntaxError(f"duplicate definition of {d.var!r}", line, col)
            seen.add(d.var)
        return tuple(defs)

    def definition(self) -> Definition:
        tok = self.ident()
        self.expect("(")
        params = self.ident_list(")")
        self.expect(")")
        self.expect("=")
        return Definition(tok.text, params, self.proc(), pos=(tok.line, tok.column))

    def proc(self) -> Process:
        left = self.sum()
        while self.at("|"):
            tok = self.advance()
            left = Par(left, self.sum(), pos=(tok.line, tok.column))
        return left

    def starts_prefix(self) -> bool:
        return self.at("tick") or (
            self.peek().kind == "ident" and (self.at("?", 1) or self.at("!", 1))
        )

    def sum(self) -> Process:
        if not self.starts_prefix():
            return self.atom()
        tok = self.peek()
        branches = [self.guard()]
        while self.at("+"):
            self.advance()
            if not self.starts_prefix():
                self.error("expected a guarded summand")
            branches.append(self.guard())
        return Sum(tuple(branches), pos=(tok.line, tok.column))

    def guard(self) -> tuple[Prefix, Process]:
        prefix = self.prefix()
        if self.at("."):
            self.advance()
            return prefix, self.continuation()
        return prefix, ZERO

    def continuation(self) -> Process:
        if self.starts_prefix():
            tok = self.peek()
            return Sum((self.guard(),), pos=(tok.line, tok.column))
        return self.atom()

    def prefix(self) -> Prefix:
        if self.at("tick"):
            self.advance()
            return TICK
        name = self.ident().text
        op = self.advance()
        return Input(name) if op.text == "?" else Output(name)

    def atom(self) -> Process:
        tok = self.peek()
        pos = (tok.line, tok.column)
        if tok.kind == "zero":
            self.advance()
            return Sum((), pos=pos)
        if self.at("("):
            self.advance()
            p = self.proc()
            self.expect(")")
            return p
        if self.at("new"):
            self.advance()
            name = self.ident().text
            self.expect(".")
            return Nu(name, self.continuation(), pos=pos)
        if tok.kind == "ident":
            self.advance()
            self.expect("(")
            args = self.ident_list(")")
            self.expect(")")
            return Call(tok.text, args, pos=pos)
        self.error("expected a process")


def parse(text: str) -> GlobalProcess:
    """Parse a global process.  No scope checking is done here."""
    return _Parser(text).global_process()


def parse_process(text: str) -> Process:
    """Parse a bare open process (no header, no definitions)."""
    p = _Parser(text)
    term = p.proc()
    if p.peek().kind != "eof":
        p.error("expected end of input")
    return term


# ---------------------------------------------------------------------------
# Pretty printing (inverse of parse up to source positions)
# ---------------------------------------------------------------------------


def _guard_str(prefix: Prefix, cont: Process) -> str:
    return f"{prefix}.{_cont_str(cont)}"


def _cont_str(p: Process) -> str:
    if isinstance(p, Sum):
        if not p.branches:
            return "0"
        if len(p.branches) == 1:
            return _guard_str(*p.branches[0])
        return f"({pretty(p)})"
    if isinstance(p, Call):
        return pretty(p)
    if isinstance(p, Nu):
        return f"new {p.name}.{_cont_str(p.body)}"
    return f"({pretty(p)})"


def pretty(p: Process) -> str:
    if isinstance(p, Sum):
        if not p.branches:
            return "0"
        return " + ".join(_guard_str(a, q) for a, q in p.branches)
    if isinstance(p, Par):
        right = pretty(p.right)
        if isinstance(p.right, Par):
            right = f"({right})"
        return f"{pretty(p.left)} | {right}"
    if isinstance(p, Nu):
        return _cont_str(p)
    return f"{p.var}({', '.join(p.args)})"


def pretty_global(g: GlobalProcess) -> str:
    parts = []
    if g.names:
        parts.append(f"names {', '.join(g.names)}.")
    if g.definitions:
        defs = ",\n    ".join(
            f"{d.var}({', '.join(d.params)}) = {pretty(d.body)}" for d in g.definitions
        )
        parts.append(f"rec {defs}\nin")
    parts.append(pretty(g.main))
    return " ".join(parts) if not g.definitions else "\n".join(parts)


# ---------------------------------------------------------------------------
# Scope checking
# ---------------------------------------------------------------------------

_RESERVED_NAME = re.compile(r"_\d+$")


def _where(term) -> str:
    pos = getattr(term, "pos", None)
    return f" at {pos[0]}:{pos[1]}" if pos else ""


def _check_open(p: Process, gamma: tuple[str, ...], arities: Mapping[str, int]) -> Process:
    if isinstance(p, Sum):
        branches = []
        for prefix, cont in p.branches:
            name = prefix_name(prefix)
            if name is not None and name not in gamma:
                raise UnboundName(f"unbound name {name!r}{_where(p)}")
            branches.append((prefix, _check_open(cont, gamma, arities)))
        return Sum(tuple(branches), pos=p.pos)
    if isinstance(p, Par):
        return Par(_check_open(p.left, gamma, arities), _check_open(p.right, gamma, arities), pos=p.pos)
    if isinstance(p, Nu):
        if p.name in gamma:
            raise ShadowedName(f"restricted name {p.name!r} already in scope{_where(p)}")
        # binders are renamed by position, so structural equality is alpha-equivalence
        fresh = f"_{len(gamma) + 1}"
        body = substitute(p.body, {p.name: fresh}) if fresh != p.name else p.body
        return Nu(fresh, _check_open(body, gamma + (fresh,), arities), pos=p.pos)
    if p.var not in arities:
        raise UnboundVariable(f"unbound variable {p.var!r}{_where(p)}")
    if len(p.args) != arities[p.var]:
        raise ArityMismatch(
            f"{p.var} expects {arities[p.var]} argument(s), got {len(p.args)}{_where(p)}"
        )
    for a in p.args:
        if a not in gamma:
            raise UnboundName(f"unbound name {a!r}{_where(p)}")
    return p


def _check_names(names: Sequence[str], what: str, variables: Mapping[str, int]) -> None:
    if len(set(names)) != len(names):
        raise ScopeError(f"repeated name in {what}")
    for n in names:
        if _RESERVED_NAME.match(n):
            raise ScopeError(f"name {n!r} is reserved for restricted channels")
        if n in variables:
            raise ScopeError(f"{n!r} is used both as a name and as a variable")


def check(g: GlobalProcess) -> GlobalProcess:
    """Scope-check ``g`` and return it with restricted names normalised.

    Raises a :class:`ScopeError` subclass on unbound names or variables,
    arity mismatches and restrictions that shadow a name in scope.
    """
    arities = {d.var: d.arity for d in g.definitions}
    if len(arities) != len(g.definitions):
        raise ScopeError("duplicate definition")
    _check_names(g.names, "the free names", arities)
    defs = []
    for d in g.definitions:
        _check_names(d.params, f"the parameters of {d.var}", arities)
        defs.append(Definition(d.var, d.params, _check_open(d.body, d.params, arities), pos=d.pos))
    main = _check_open(g.main, g.names, arities)
    return GlobalProcess(g.names, tuple(defs), main)


@dataclass(frozen=True)
class Scope:
    owner: str  # "main" or a definition's variable
    path: tuple[int, ...]
    term: Process
    gamma: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.gamma)


def _scopes(owner: str, p: Process, gamma: tuple[str, ...], path: tuple[int, ...]) -> Iterator[Scope]:
    yield Scope(owner, path, p, gamma)
    if isinstance(p, Sum):
        for k, (_, cont) in enumerate(p.branches):
            yield from _scopes(owner, cont, gamma, path + (k,))
    elif isinstance(p, Par):
        yield from _scopes(owner, p.left, gamma, path + (0,))
        yield from _scopes(owner, p.right, gamma, path + (1,))
    elif isinstance(p, Nu):
        yield from _scopes(owner, p.body, gamma + (p.name,), path + (0,))


def scopes(g: GlobalProcess) -> list[Scope]:
    """Every subterm of a checked process with its ordered name context."""
    out = list(_scopes("main", g.main, g.names, ()))
    for d in g.definitions:
        out.extend(_scopes(d.var, d.body, d.params, ()))
    return out


# ---------------------------------------------------------------------------
# Substitution and unfolding
# ---------------------------------------------------------------------------


def free_names(p: Process) -> frozenset[str]:
    if isinstance(p, Sum):
        out: set[str] = set()
        for prefix, cont in p.branches:
            name = prefix_name(prefix)
            if name is not None:
                out.add(name)
            out |= free_names(cont)
        return frozenset(out)
    if isinstance(p, Par):
        return free_names(p.left) | free_names(p.right)
    if isinstance(p, Nu):
        return free_names(p.body) - {p.name}
    return frozenset(p.args)


def all_names(p: Process) -> frozenset[str]:
    if isinstance(p, Sum):
        out = {prefix_name(a) for a, _ in p.branches} - {None}
        for _, cont in p.branches:
            out |= all_names(cont)
        return frozenset(out)
    if isinstance(p, Par):
        return all_names(p.left) | all_names(p.right)
    if isinstance(p, Nu):
        return all_names(p.body) | {p.name}
    return frozenset(p.args)


def _fresh(base: str, avoid: set[str] | frozenset[str]) -> str:
    name = base + "'"
    while name in avoid:
        name += "'"
    return name


def _rename_prefix(prefix: Prefix, r: Mapping[str, str]) -> Prefix:
    if isinstance(prefix, Input):
        return Input(r.get(prefix.name, prefix.name))
    if isinstance(prefix, Output):
        return Output(r.get(prefix.name, prefix.name))
    return prefix


def substitute(p: Process, r: Mapping[str, str]) -> Process:
    """Simultaneous, capture-avoiding renaming of free names.

    Names outside the domain of ``r`` are left alone.
    """
    if isinstance(p, Sum):
        return Sum(
            tuple((_rename_prefix(a, r), substitute(q, r)) for a, q in p.branches), pos=p.pos
        )
    if isinstance(p, Par):
        return Par(substitute(p.left, r), substitute(p.right, r), pos=p.pos)
    if isinstance(p, Nu):
        inner = {k: v for k, v in r.items() if k != p.name}
        targets = {inner.get(x, x) for x in free_names(p.body) - {p.name}}
        if p.name in targets:
            fresh = _fresh(p.name, targets | all_names(p.body) | set(inner.values()))
            inner[p.name] = fresh
            return Nu(fresh, substitute(p.body, inner), pos=p.pos)
        return Nu(p.name, substitute(p.body, inner), pos=p.pos)
    return Call(p.var, tuple(r.get(a, a) for a in p.args), pos=p.pos)


def derive(p: Process, defs: Mapping[str, Definition] | Sequence[Definition]) -> Process:
    """Unfold every call one level (the derivation map)."""
    if not isinstance(defs, Mapping):
        defs = {d.var: d for d in defs}
    return _derive(p, defs)


def _derive(p: Process, defs: Mapping[str, Definition]) -> Process:
    if isinstance(p, Sum):
        return Sum(tuple((a, _derive(q, defs)) for a, q in p.branches), pos=p.pos)
    if isinstance(p, Par):
        return Par(_derive(p.left, defs), _derive(p.right, defs), pos=p.pos)
    if isinstance(p, Nu):
        return Nu(p.name, _derive(p.body, defs), pos=p.pos)
    d = defs[p.var]
    return substitute(d.body, dict(zip(d.params, p.args)))


def approximant(g: GlobalProcess, i: int) -> Process:
    """The ``i``-th approximant: ``derive`` applied ``i`` times to the main process."""
    if i < 0:
        raise ValueError("approximant index must be non-negative")
    defs = g.defs()
    p = g.main
    for _ in range(i):
        p = _derive(p, defs)
    return p


def rename_variables(p: Process, mapping: Mapping[str, str]) -> Process:
    if isinstance(p, Sum):
        return Sum(tuple((a, rename_variables(q, mapping)) for a, q in p.branches), pos=p.pos)
    if isinstance(p, Par):
        return Par(rename_variables(p.left, mapping), rename_variables(p.right, mapping), pos=p.pos)
    if isinstance(p, Nu):
        return Nu(p.name, rename_variables(p.body, mapping), pos=p.pos)
    return Call(mapping.get(p.var, p.var), p.args, pos=p.pos)


def calls(p: Process) -> Iterator[Call]:
    if isinstance(p, Sum):
        for _, q in p.branches:
            yield from calls(q)
    elif isinstance(p, Par):
        yield from calls(p.left)
        yield from calls(p.right)
    elif isinstance(p, Nu):
        yield from calls(p.body)
    else:
        yield p


def to_json(p: Process) -> dict:
    if isinstance(p, Sum):
        if not p.branches:
            return {"zero": True}
        return {
            "sum": [
                {"prefix": str(a), "then": to_json(q)} for a, q in p.branches
            ]
        }
    if isinstance(p, Par):
        return {"par": [to_json(p.left), to_json(p.right)]}
    if isinstance(p, Nu):
        return {"new": p.name, "body": to_json(p.body)}
    return {"call": p.var, "args": list(p.args)}


def global_to_json(g: GlobalProcess) -> dict:
    return {
        "names": list(g.names),
        "definitions": [
            {"var": d.var, "params": list(d.params), "body": to_json(d.body)}
            for d in g.definitions
        ],
        "main": to_json(g.main),
    }
