"""SPARQL basic graph patterns: patterns, solution mappings, and a parser.

Solution mappings are plain ``dict[str, Term]`` keyed by variable name
(sigil stripped). A multiset of mappings is a ``list`` of them; use
:func:`multiset_equal` to compare results order-insensitively.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

from .terms import IRI, LITERAL, Term, Triple

RDF_TYPE_IRI = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
XSD_INTEGER = "http://www.w3.org/2001/XMLSchema#integer"


@dataclass(frozen=True, order=True)
class Variable:
    name: str

    def __str__(self):
        return "?" + self.name


Slot = Union[Term, Variable]
SolutionMapping = dict  # str -> Term


@dataclass(frozen=True)
class TriplePattern:
    subject: Slot
    predicate: Slot
    object: Slot

    def __iter__(self):
        return iter((self.subject, self.predicate, self.object))

    def variables(self) -> tuple[str, ...]:
        """Variable names in position order, without repeats."""
        seen = []
        for slot in self:
            if isinstance(slot, Variable) and slot.name not in seen:
                seen.append(slot.name)
        return tuple(seen)

    @property
    def domain(self) -> frozenset[str]:
        return frozenset(self.variables())

    def is_ground(self) -> bool:
        return not any(isinstance(s, Variable) for s in self)

    def __str__(self):
        return " ".join(str(s) if isinstance(s, Variable) else s.n3() for s in self)


@dataclass(frozen=True)
class BasicGraphPattern:
    """Ordered triple patterns plus projection.

    ``projected`` is ``None`` for ``SELECT *``. ``constants`` holds variables
    fixed by folded ``FILTER(?v = c)`` clauses; they are re-attached to the
    result mappings at projection time.
    """

    patterns: tuple[TriplePattern, ...]
    projected: tuple[str, ...] | None = None
    constants: tuple[tuple[str, Term], ...] = ()

    def __post_init__(self):
        if not self.patterns:
            raise ValueError("a basic graph pattern needs at least one triple pattern")
        if self.projected is not None:
            known = self.pattern_variables() | {v for v, _ in self.constants}
            missing = [v for v in self.projected if v not in known]
            if missing:
                raise ValueError(f"projected variables not in pattern: {missing}")

    def pattern_variables(self) -> set[str]:
        return {v for p in self.patterns for v in p.variables()}

    @property
    def result_vars(self) -> tuple[str, ...]:
        if self.projected is not None:
            return self.projected
        out = []
        for p in self.patterns:
            out.extend(v for v in p.variables() if v not in out)
        out.extend(v for v, _ in self.constants if v not in out)
        return tuple(out)


class IncompatibleMappingsError(ValueError):
    pass


class QuerySyntaxError(ValueError):
    def __init__(self, message: str, position: int, text: str = ""):
        line = text.count("\n", 0, position) + 1
        col = position - (text.rfind("\n", 0, position) + 1) + 1
        super().__init__(f"{message} at line {line}, column {col}")
        self.position = position
        self.line = line
        self.column = col


class UnsupportedConstructError(ValueError):
    def __init__(self, construct: str):
        super().__init__(f"unsupported construct: {construct}")
        self.construct = construct


# -- mapping algebra ---------------------------------------------------------

def compatible(m1: Mapping[str, Term], m2: Mapping[str, Term]) -> bool:
    if len(m2) < len(m1):
        m1, m2 = m2, m1
    for var, val in m1.items():
        other = m2.get(var)
        if other is not None and other != val:
            return False
    return True


def merge(m1: Mapping[str, Term], m2: Mapping[str, Term]) -> SolutionMapping:
    if not compatible(m1, m2):
        raise IncompatibleMappingsError(f"{dict(m1)} and {dict(m2)} disagree on a shared variable")
    out = dict(m1)
    out.update(m2)
    return out


def substitute(mu: Mapping[str, Term], p: TriplePattern) -> TriplePattern:
    def sub(slot):
        if isinstance(slot, Variable):
            return mu.get(slot.name, slot)
        return slot
    return TriplePattern(sub(p.subject), sub(p.predicate), sub(p.object))


def match_triple(p: TriplePattern, t: Triple) -> SolutionMapping | None:
    """Binding produced by matching ``t`` against ``p``, or None."""
    mu: SolutionMapping = {}
    for slot, term in zip(p, t):
        if isinstance(slot, Variable):
            bound = mu.get(slot.name)
            if bound is None:
                mu[slot.name] = term
            elif bound != term:
                return None
        elif slot != term:
            return None
    return mu


def canonical(mu: Mapping[str, Term]) -> tuple:
    return tuple(sorted(mu.items()))


def as_counter(mappings: Iterable[Mapping[str, Term]]) -> Counter:
    return Counter(canonical(m) for m in mappings)


def multiset_equal(a: Iterable[Mapping[str, Term]], b: Iterable[Mapping[str, Term]]) -> bool:
    return as_counter(a) == as_counter(b)


def project(mappings: Iterable[Mapping[str, Term]], bgp: BasicGraphPattern) -> list[SolutionMapping]:
    """Restrict to the result variables, re-attaching folded constants."""
    fixed = dict(bgp.constants)
    names = bgp.result_vars
    out = []
    for mu in mappings:
        row = {}
        for v in names:
            val = mu.get(v, fixed.get(v))
            if val is not None:
                row[v] = val
        out.append(row)
    return out


# -- parsing -----------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<iri><[^<>"{}|^`\\\x00-\x20]*>)
  | (?P<var>[?$][A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<dtype>\^\^)
  | (?P<lang>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
  | (?P<pname>(?:[A-Za-z][\w\-]*)?:(?:[\w\-%]|\.(?=[\w\-%]))*)
  | (?P<number>[0-9]+)
  | (?P<name>[A-Za-z_][\w\-]*)
  | (?P<punct>[{}().=*,;])
  | (?P<op>!=|<=|>=|&&|\|\||[<>!])
""", re.VERBOSE)

_UNSUPPORTED = {
    "OPTIONAL", "UNION", "ORDER", "LIMIT", "OFFSET", "DISTINCT", "REDUCED",
    "GRAPH", "MINUS", "BIND", "VALUES", "SERVICE", "CONSTRUCT", "ASK",
    "DESCRIBE", "FROM", "GROUP", "HAVING", "BASE", "NAMED",
}


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.prefixes: dict[str, str] = {}

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return QuerySyntaxError(msg, tok.pos, self.text)

    def advance(self) -> _Tok:
        t = self.tok
        self.i += 1
        return t

    def keyword(self) -> str | None:
        return self.tok.text.upper() if self.tok.kind == "name" else None

    def check_unsupported(self):
        kw = self.keyword()
        if kw in _UNSUPPORTED:
            raise UnsupportedConstructError(kw)

    def expect_punct(self, ch):
        if self.tok.kind != "punct" or self.tok.text != ch:
            self.check_unsupported()
            raise self.error(f"expected {ch!r}, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def parse(self) -> BasicGraphPattern:
        while self.keyword() == "PREFIX":
            self.advance()
            ns = self.advance()
            if ns.kind != "pname" or not ns.text.endswith(":"):
                raise self.error("expected prefix name", ns)
            iri = self.advance()
            if iri.kind != "iri":
                raise self.error("expected IRI", iri)
            self.prefixes[ns.text[:-1]] = iri.text[1:-1]
        self.check_unsupported()
        if self.keyword() != "SELECT":
            raise self.error("expected SELECT")
        self.advance()
        self.check_unsupported()
        projected: list[str] | None = []
        if self.tok.kind == "punct" and self.tok.text == "*":
            self.advance()
            projected = None
        else:
            while self.tok.kind == "var":
                name = self.advance().text[1:]
                if name not in projected:
                    projected.append(name)
            if not projected:
                raise self.error("expected projection")
        self.check_unsupported()
        if self.keyword() == "WHERE":
            self.advance()
        self.expect_punct("{")
        patterns, filters = self.parse_group()
        self.expect_punct("}")
        if self.tok.kind != "eof":
            self.check_unsupported()
            raise self.error(f"unexpected {self.tok.text!r} after query body")
        return _fold_filters(patterns, projected, filters, self)

    def parse_group(self):
        patterns: list[TriplePattern] = []
        filters: list[tuple[str, Term, _Tok]] = []
        while True:
            tok = self.tok
            if tok.kind == "punct" and tok.text == "}":
                break
            if tok.kind == "punct" and tok.text == "{":
                raise UnsupportedConstructError("nested group")
            self.check_unsupported()
            if self.keyword() == "FILTER":
                filters.append(self.parse_filter())
            else:
                s = self.parse_slot()
                p = self.parse_slot()
                o = self.parse_slot()
                if isinstance(s, Term) and s.kind == LITERAL:
                    raise self.error("literal in subject position", tok)
                if isinstance(p, Term) and p.kind == LITERAL:
                    raise self.error("literal in predicate position", tok)
                patterns.append(TriplePattern(s, p, o))
            if self.tok.kind == "punct" and self.tok.text == ".":
                self.advance()
            elif self.tok.kind == "punct" and self.tok.text in ";,":
                raise UnsupportedConstructError("predicate-object list")
        if not patterns:
            raise self.error("empty basic graph pattern")
        return patterns, filters

    def parse_filter(self):
        start = self.advance()
        if not (self.tok.kind == "punct" and self.tok.text == "("):
            raise UnsupportedConstructError("FILTER")
        self.advance()
        lhs = self.parse_slot(in_filter=True)
        if not (self.tok.kind == "punct" and self.tok.text == "="):
            raise UnsupportedConstructError("FILTER")
        self.advance()
        rhs = self.parse_slot(in_filter=True)
        if not (self.tok.kind == "punct" and self.tok.text == ")"):
            raise UnsupportedConstructError("FILTER")
        self.advance()
        if isinstance(lhs, Variable) and isinstance(rhs, Term):
            return lhs.name, rhs, start
        if isinstance(rhs, Variable) and isinstance(lhs, Term):
            return rhs.name, lhs, start
        raise UnsupportedConstructError("FILTER")

    def expand(self, tok: _Tok) -> str:
        prefix, _, local = tok.text.partition(":")
        if prefix in self.prefixes:
            return self.prefixes[prefix] + local
        # undeclared prefixes are kept verbatim (simplified notation)
        return tok.text

    def parse_slot(self, in_filter=False) -> Slot:
        tok = self.tok
        if tok.kind == "var":
            self.advance()
            return Variable(tok.text[1:])
        if tok.kind == "iri":
            self.advance()
            if len(tok.text) == 2:
                raise self.error("empty IRI", tok)
            return Term(IRI, tok.text[1:-1])
        if tok.kind == "pname":
            self.advance()
            return Term(IRI, self.expand(tok))
        if tok.kind == "string":
            self.advance()
            lex = tok.text
            if self.tok.kind == "dtype":
                self.advance()
                dt = self.advance()
                if dt.kind == "iri":
                    lex += "^^" + dt.text
                elif dt.kind == "pname":
                    lex += "^^<" + self.expand(dt) + ">"
                else:
                    raise self.error("expected datatype IRI", dt)
            elif self.tok.kind == "lang":
                lex += self.advance().text
            return Term(LITERAL, lex)
        if tok.kind == "number":
            self.advance()
            return Term(LITERAL, f'"{tok.text}"^^<{XSD_INTEGER}>')
        if tok.kind == "name":
            kw = tok.text.upper()
            if kw in _UNSUPPORTED:
                raise UnsupportedConstructError(kw)
            if kw in ("FILTER", "SELECT", "WHERE", "PREFIX"):
                raise self.error(f"unexpected keyword {tok.text}", tok)
            self.advance()
            if tok.text == "a" and not in_filter:
                return Term(IRI, RDF_TYPE_IRI)
            return Term(IRI, tok.text)
        if tok.kind == "op":
            raise UnsupportedConstructError("FILTER")
        raise self.error(f"unexpected {tok.text or 'end of input'!r}", tok)


def _fold_filters(patterns, projected, filters, parser) -> BasicGraphPattern:
    constants: dict[str, Term] = {}
    for name, value, tok in filters:
        if name in constants and constants[name] != value:
            raise parser.error(f"conflicting FILTER constants for ?{name}", tok)
        constants[name] = value
    if constants:
        patterns = [substitute(constants, p) for p in patterns]
    if projected is not None:
        projected = tuple(projected)
    return BasicGraphPattern(tuple(patterns), projected, tuple(constants.items()))


def parse_query(text: str) -> BasicGraphPattern:
    """Parse ``SELECT ... WHERE { ... }`` with triple patterns and
    ``FILTER(?v = constant)`` clauses, which are folded into the patterns."""
    return _Parser(text).parse()


def _fmt(slot: Slot) -> str:
    return str(slot) if isinstance(slot, Variable) else slot.n3()


def format_query(bgp: BasicGraphPattern) -> str:
    head = "SELECT *" if bgp.projected is None else "SELECT " + " ".join("?" + v for v in bgp.projected)
    lines = [head, "WHERE {"]
    for p in bgp.patterns:
        lines.append("  " + " ".join(_fmt(s) for s in p) + " .")
    for name, value in bgp.constants:
        lines.append(f"  FILTER(?{name} = {value.n3()})")
    lines.append("}")
    return "\n".join(lines) + "\n"
