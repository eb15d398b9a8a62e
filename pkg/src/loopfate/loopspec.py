"""Loop specification language: parsing, validation and the transition view.

A loop file declares its variables, an optional precondition and value
semantics, then a single guarded while loop whose body is either a block
of simultaneous assignments or a relational constraint over primed and
unprimed variables:

    vars x, y;
    pre true;             # optional, defaults to true
    semantics int;        # optional, 'int' (default) or 'rat'
    while x >= 0 {
        x := x + y;
        y := y - 1;
    }

Comparators are <, <=, >, >=, = and boolean structure is 'or' over 'and'
('and' binds tighter). Literals are integers or rationals written p/q.
The relational form replaces assignments with a single statement such as
`relation x' >= x and y' = y - 1;`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from .linarith import (
    Atom,
    Conj,
    Dnf,
    DNF_TRUE,
    LinTerm,
    Rat,
    RelOp,
    VarId,
    conj_and,
)


class Semantics(Enum):
    INT = "int"
    RAT = "rat"


class ParseError(ValueError):
    """Syntax or validation error with source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class RelationalUnsupported(RuntimeError):
    """An operation that requires deterministic updates got a relational spec."""


@dataclass(frozen=True)
class Deterministic:
    """Simultaneous assignments; every declared variable is defined once."""

    updates: tuple[tuple[VarId, LinTerm], ...]

    def as_map(self) -> dict[VarId, LinTerm]:
        return dict(self.updates)


@dataclass(frozen=True)
class Relational:
    """A general two-vocabulary constraint relating pre- and post-state."""

    conj: Conj


@dataclass(frozen=True)
class LoopSpec:
    """A single loop: variables, guard, updates, precondition and semantics."""

    vars: tuple[VarId, ...]
    guard: Dnf
    updates: Deterministic | Relational
    precondition: Dnf = DNF_TRUE
    semantics: Semantics = Semantics.INT

    @property
    def deterministic(self) -> bool:
        return isinstance(self.updates, Deterministic)


@dataclass(frozen=True)
class Rho:
    """One transition-relation disjunct: guard disjunct plus update constraints."""

    conj: Conj


def rho_of(spec: LoopSpec) -> list[Rho]:
    """Build one Rho per guard disjunct.

    Deterministic updates contribute one defining equality x' = e(x) per
    variable; relational specs pass their constraint through unchanged.
    """
    if isinstance(spec.updates, Deterministic):
        update_atoms = tuple(
            Atom(LinTerm.var(v.primed_var()) - term, RelOp.EQ)
            for v, term in spec.updates.updates
        )
        extra = Conj(update_atoms)
    else:
        extra = spec.updates.conj
    return [Rho(conj_and(disjunct, extra)) for disjunct in spec.guard.disjuncts]


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_KEYWORDS = {
    "vars", "pre", "semantics", "while", "relation",
    "true", "false", "or", "and", "int", "rat",
}

_PUNCT = (":=", "<=", ">=", "<", ">", "=", "+", "-", "*", "/", "(", ")", "{", "}", ",", ";", "'")


@dataclass(frozen=True)
class _Token:
    kind: str  # 'ident', 'number', 'keyword', punctuation literal, 'eof'
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            start = i
            while i < n and source[i].isdigit():
                i += 1
            text = source[start:i]
            tokens.append(_Token("number", text, line, col))
            col += len(text)
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            text = source[start:i]
            kind = "keyword" if text in _KEYWORDS else "ident"
            tokens.append(_Token(kind, text, line, col))
            col += len(text)
            continue
        for punct in _PUNCT:
            if source.startswith(punct, i):
                tokens.append(_Token(punct, punct, line, col))
                i += len(punct)
                col += len(punct)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.declared: list[VarId] = []
        self.allow_primed = False

    # token plumbing

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str | None = None) -> _Token:
        tok = self.peek()
        if tok.kind != kind and not (kind == "keyword" and tok.kind == "keyword"):
            raise ParseError(f"expected {what or kind}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        return self.next()

    def expect_keyword(self, word: str) -> _Token:
        tok = self.peek()
        if tok.kind != "keyword" or tok.text != word:
            raise ParseError(f"expected '{word}', found {tok.text or 'end of input'!r}", tok.line, tok.col)
        return self.next()

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "keyword" and tok.text == word

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        return ParseError(message, tok.line, tok.col)

    # grammar

    def parse(self) -> LoopSpec:
        self.expect_keyword("vars")
        self.parse_var_list()
        precondition = DNF_TRUE
        semantics = Semantics.INT
        seen_pre = seen_sem = False
        while True:
            if self.at_keyword("pre"):
                if seen_pre:
                    raise self.error("duplicate 'pre' section")
                self.next()
                precondition = self.parse_dnf()
                self.expect(";")
                seen_pre = True
            elif self.at_keyword("semantics"):
                if seen_sem:
                    raise self.error("duplicate 'semantics' section")
                self.next()
                tok = self.peek()
                if self.at_keyword("int"):
                    semantics = Semantics.INT
                elif self.at_keyword("rat"):
                    semantics = Semantics.RAT
                else:
                    raise ParseError("expected 'int' or 'rat'", tok.line, tok.col)
                self.next()
                self.expect(";")
                seen_sem = True
            else:
                break
        self.expect_keyword("while")
        guard = self.parse_dnf()
        self.expect("{")
        updates = self.parse_body()
        self.expect("}")
        tok = self.peek()
        if tok.kind != "eof":
            raise ParseError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)
        return LoopSpec(tuple(self.declared), guard, updates, precondition, semantics)

    def parse_var_list(self) -> None:
        while True:
            tok = self.expect("ident", "variable name")
            v = VarId(tok.text)
            if v in self.declared:
                raise ParseError(f"variable {tok.text!r} declared twice", tok.line, tok.col)
            self.declared.append(v)
            if self.peek().kind == ",":
                self.next()
                continue
            break
        self.expect(";")

    def parse_body(self) -> Deterministic | Relational:
        assigns: list[tuple[VarId, LinTerm]] = []
        relation: Conj | None = None
        while self.peek().kind != "}":
            if self.at_keyword("relation"):
                if assigns:
                    raise self.error("cannot mix assignments with a relation block")
                self.next()
                self.allow_primed = True
                conj = self.parse_conj()
                self.allow_primed = False
                self.expect(";")
                relation = conj if relation is None else conj_and(relation, conj)
                continue
            if relation is not None:
                raise self.error("cannot mix assignments with a relation block")
            tok = self.expect("ident", "assignment target")
            if self.peek().kind == "'":
                raise ParseError("primed variable on left-hand side", tok.line, tok.col)
            target = VarId(tok.text)
            if target not in self.declared:
                raise ParseError(f"undeclared variable {tok.text!r}", tok.line, tok.col)
            if any(v == target for v, _ in assigns):
                raise ParseError(f"duplicate update for {tok.text!r}", tok.line, tok.col)
            self.expect(":=")
            term = self.parse_expr()
            self.expect(";")
            assigns.append((target, term))
        if relation is not None:
            return Relational(relation)
        # Unassigned variables keep their value, so every declared variable
        # ends up with exactly one defining update.
        assigned = {v for v, _ in assigns}
        updates = list(assigns)
        for v in self.declared:
            if v not in assigned:
                updates.append((v, LinTerm.var(v)))
        updates.sort(key=lambda item: self.declared.index(item[0]))
        return Deterministic(tuple(updates))

    def parse_dnf(self) -> Dnf:
        if self.at_keyword("true"):
            self.next()
            return DNF_TRUE
        if self.at_keyword("false"):
            self.next()
            return Dnf(())
        disjuncts = [self.parse_conj()]
        while self.at_keyword("or"):
            self.next()
            disjuncts.append(self.parse_conj())
        return Dnf(tuple(disjuncts))

    def parse_conj(self) -> Conj:
        atoms = [self.parse_atom()]
        while self.at_keyword("and"):
            self.next()
            atoms.append(self.parse_atom())
        return Conj(tuple(atoms))

    def parse_atom(self) -> Atom:
        if self.at_keyword("true"):
            self.next()
            return Atom(LinTerm.const(0), RelOp.LE)
        lhs = self.parse_expr()
        tok = self.peek()
        if tok.kind not in ("<", "<=", ">", ">=", "="):
            raise ParseError("expected comparison operator", tok.line, tok.col)
        self.next()
        rhs = self.parse_expr()
        if tok.kind == "<":
            return Atom(lhs - rhs, RelOp.LT)
        if tok.kind == "<=":
            return Atom(lhs - rhs, RelOp.LE)
        if tok.kind == ">":
            return Atom(rhs - lhs, RelOp.LT)
        if tok.kind == ">=":
            return Atom(rhs - lhs, RelOp.LE)
        return Atom(lhs - rhs, RelOp.EQ)

    def parse_expr(self) -> LinTerm:
        term = self.parse_term()
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            rhs = self.parse_term()
            term = term + rhs if op == "+" else term - rhs
        return term

    def parse_term(self) -> LinTerm:
        term = self.parse_factor()
        while self.peek().kind in ("*", "/"):
            tok = self.next()
            rhs = self.parse_factor()
            if tok.kind == "*":
                if term.is_constant():
                    term = rhs.scale(term.constant)
                elif rhs.is_constant():
                    term = term.scale(rhs.constant)
                else:
                    raise ParseError("non-linear product of variables", tok.line, tok.col)
            else:
                if not rhs.is_constant():
                    raise ParseError("division by a variable expression", tok.line, tok.col)
                if rhs.constant == 0:
                    raise ParseError("division by zero", tok.line, tok.col)
                term = term.scale(Fraction(1) / rhs.constant)
        return term

    def parse_factor(self) -> LinTerm:
        tok = self.peek()
        if tok.kind == "-":
            self.next()
            return -self.parse_factor()
        if tok.kind == "number":
            self.next()
            return LinTerm.const(int(tok.text))
        if tok.kind == "(":
            self.next()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if tok.kind == "ident":
            self.next()
            primed = False
            if self.peek().kind == "'":
                if not self.allow_primed:
                    raise ParseError("primed variable outside a relation block", tok.line, tok.col)
                self.next()
                primed = True
            base = VarId(tok.text)
            if base not in self.declared:
                raise ParseError(f"undeclared variable {tok.text!r}", tok.line, tok.col)
            return LinTerm.var(VarId(tok.text, primed))
        raise ParseError(f"expected expression, found {tok.text or 'end of input'!r}", tok.line, tok.col)


def parse_loop_spec(text: str) -> LoopSpec:
    """Parse and validate a loop specification from source text."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Pretty printer (canonical form; parse of the output is the identity)
# ---------------------------------------------------------------------------


def pretty_print(spec: LoopSpec) -> str:
    lines = ["vars " + ", ".join(str(v) for v in spec.vars) + ";"]
    if spec.precondition != DNF_TRUE:
        lines.append(f"pre {spec.precondition.render()};")
    lines.append(f"semantics {spec.semantics.value};")
    guard = "true" if spec.guard.is_trivially_true() else spec.guard.render()
    lines.append(f"while {guard} {{")
    if isinstance(spec.updates, Deterministic):
        for v, term in spec.updates.updates:
            lines.append(f"  {v} := {term.render()};")
    else:
        lines.append(f"  relation {spec.updates.conj.render()};")
    lines.append("}")
    return "\n".join(lines) + "\n"
