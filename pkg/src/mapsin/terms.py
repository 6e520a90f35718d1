"""RDF terms and their byte encoding for row keys, columns and values."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

IRI = "iri"
LITERAL = "literal"

_TAGS = {IRI: b"I", LITERAL: b"L"}
_KINDS = {v[0]: k for k, v in _TAGS.items()}


class MalformedEncodingError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Term:
    """An IRI or literal.

    Literal lexicals keep their N-Triples surface form, quotes and any
    ``^^<datatype>`` / ``@lang`` suffix included, e.g. ``'"2011"'``.
    Equality is purely syntactic.
    """

    kind: str
    lexical: str

    def __post_init__(self):
        if self.kind not in _TAGS:
            raise ValueError(f"unknown term kind {self.kind!r}")
        if not self.lexical:
            raise ValueError("term lexical must be non-empty")
        if self.kind == IRI and any(ch.isspace() for ch in self.lexical):
            raise ValueError(f"IRI contains whitespace: {self.lexical!r}")

    @classmethod
    def iri(cls, value: str) -> "Term":
        return cls(IRI, value)

    @classmethod
    def literal(cls, value: str, datatype: str | None = None, lang: str | None = None) -> "Term":
        """Build a literal from its unquoted text."""
        lex = '"' + value + '"'
        if datatype is not None:
            lex += "^^<" + datatype + ">"
        elif lang is not None:
            lex += "@" + lang
        return cls(LITERAL, lex)

    @property
    def is_iri(self) -> bool:
        return self.kind == IRI

    def n3(self) -> str:
        return "<" + self.lexical + ">" if self.kind == IRI else self.lexical

    def __str__(self):
        return self.n3()


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self):
        if not self.subject.is_iri or not self.predicate.is_iri:
            raise ValueError("subject and predicate must be IRIs")

    def __iter__(self):
        return iter((self.subject, self.predicate, self.object))

    def n3(self) -> str:
        return f"{self.subject.n3()} {self.predicate.n3()} {self.object.n3()} ."


def _escape(raw: bytes) -> bytes:
    return raw.replace(b"\x01", b"\x01\x03").replace(b"\x00", b"\x01\x02")


def _unescape(raw: bytes) -> bytes:
    if b"\x01" not in raw:
        if b"\x00" in raw:
            raise MalformedEncodingError("unescaped 0x00 in term encoding")
        return raw
    out = bytearray()
    i = 0
    n = len(raw)
    while i < n:
        b = raw[i]
        if b == 0:
            raise MalformedEncodingError("unescaped 0x00 in term encoding")
        if b == 1:
            if i + 1 >= n or raw[i + 1] not in (2, 3):
                raise MalformedEncodingError("dangling escape byte")
            out.append(0 if raw[i + 1] == 2 else 1)
            i += 2
        else:
            out.append(b)
            i += 1
    return bytes(out)


def encode_term(t: Term) -> bytes:
    """Tag byte + escaped UTF-8 lexical. The result never contains 0x00."""
    return _TAGS[t.kind] + _escape(t.lexical.encode("utf-8"))


@lru_cache(maxsize=1 << 16)
def decode_term(b: bytes) -> Term:
    if len(b) < 2 or b[0] not in _KINDS:
        raise MalformedEncodingError(f"bad term encoding {b[:16]!r}")
    try:
        lexical = _unescape(b[1:]).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedEncodingError(str(exc)) from exc
    try:
        return Term(_KINDS[b[0]], lexical)
    except ValueError as exc:
        raise MalformedEncodingError(str(exc)) from exc
