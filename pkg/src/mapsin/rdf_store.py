"""Two-table RDF schema over :mod:`mapsin.kvstore`.

``T_spo`` is keyed by subject, ``T_ops`` by object; the predicate is the
column and the remaining term the cell value. Multi-valued predicates are
stored as versions of one column. Class-assignment triples use a compound
``T_ops`` row key ``enc(class) 0x00 enc(subject)`` so big classes spread over
many splittable rows instead of one fat row.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

from .kvstore import DEFAULT_FAMILY, NO_FILTER, FilterSpec, KVStore, RowResult
from .sparql import SolutionMapping, TriplePattern, Variable, compatible, match_triple, merge
from .terms import IRI, LITERAL, MalformedEncodingError, Term, Triple, decode_term, encode_term

T_SPO = "T_spo"
T_OPS = "T_ops"
DEFAULT_CLASS_PREDICATE = "rdf:type"
CONFIG_NAME = "rdfstore.json"

GET = "get"
SCAN = "scan"
CLASS_RANGE_SCAN = "class-range-scan"

SEP = b"\x00"


class PreconditionError(ValueError):
    pass


class StoreNotWritableError(RuntimeError):
    pass


@dataclass(frozen=True)
class AccessPlan:
    table: str
    access: str
    row: bytes | None
    filter: FilterSpec
    # extra class-range scan for (?s, ?p, o) when o may be a class
    class_prefix: bytes | None = None

    def __post_init__(self):
        if (self.access == GET) != (self.row is not None):
            raise ValueError("row key required exactly for GET access")

    def describe(self) -> str:
        out = f"table={self.table} access={self.access}"
        if self.access == CLASS_RANGE_SCAN:
            out += f" prefix={self.class_prefix!r}"
        out += f" filter={self.filter.kind}"
        if self.class_prefix is not None and self.access == GET:
            out += " +class-range-scan"
        return out


@dataclass
class LoadStats:
    triples_read: int = 0
    triples_stored: int = 0
    duplicates: int = 0
    parse_errors: list[tuple[int, str]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "triples_read": self.triples_read,
            "triples_stored": self.triples_stored,
            "duplicates": self.duplicates,
            "parse_errors": [{"line": n, "message": m} for n, m in self.parse_errors],
        }


# -- N-Triples subset ---------------------------------------------------------

_NT_TERM = r'<[^<>"{}|^`\\\x00-\x20]+>|"(?:[^"\\\n]|\\.)*"(?:\^\^<[^<>\s]+>|@[A-Za-z]+(?:-[A-Za-z0-9]+)*)?'
_NT_LINE = re.compile(rf'^\s*({_NT_TERM})\s+({_NT_TERM})\s+({_NT_TERM})\s*\.\s*$')


def _nt_term(text: str) -> Term:
    if text.startswith("<"):
        return Term(IRI, text[1:-1])
    return Term(LITERAL, text)


def parse_ntriples_line(line: str) -> Triple:
    m = _NT_LINE.match(line)
    if m is None:
        raise ValueError("not a triple")
    s, p, o = (_nt_term(g) for g in m.groups())
    if not s.is_iri:
        raise ValueError("subject must be an IRI")
    if not p.is_iri:
        raise ValueError("predicate must be an IRI")
    return Triple(s, p, o)


def format_ntriples(triples: Iterable[Triple]) -> str:
    return "".join(t.n3() + "\n" for t in triples)


# -- store ---------------------------------------------------------------------

class RdfStore:
    def __init__(self, kv: KVStore | None = None, class_predicate: str = DEFAULT_CLASS_PREDICATE,
                 compound_class_keys: bool = True, max_region_size: int | None = None):
        if kv is None:
            kv = KVStore() if max_region_size is None else KVStore(max_region_size)
        self.kv = kv
        self.class_predicate = Term(IRI, class_predicate)
        self._class_col = encode_term(self.class_predicate)
        self.compound_class_keys = compound_class_keys
        self.writable = True
        kv.create_table(T_SPO)
        kv.create_table(T_OPS)

    @property
    def meter(self):
        return self.kv.meter

    # -- writes ---------------------------------------------------------------

    def _ops_row(self, s: bytes, p: bytes, o: bytes) -> bytes:
        if self.compound_class_keys and p == self._class_col:
            return o + SEP + s
        return o

    def store_triple(self, t: Triple) -> bool:
        """Write ``t`` to both tables; returns False if it was already there."""
        if not self.writable:
            raise StoreNotWritableError("store is read-only")
        s, p, o = encode_term(t.subject), encode_term(t.predicate), encode_term(t.object)
        if self.kv.has_cell(T_SPO, s, DEFAULT_FAMILY, p, o):
            return False
        self.kv.put(T_SPO, s, DEFAULT_FAMILY, p, o)
        self.kv.put(T_OPS, self._ops_row(s, p, o), DEFAULT_FAMILY, p, s)
        return True

    def load_ntriples(self, stream: TextIO | Iterable[str]) -> LoadStats:
        stats = LoadStats()
        for lineno, line in enumerate(stream, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            stats.triples_read += 1
            try:
                triple = parse_ntriples_line(stripped)
            except ValueError as exc:
                stats.parse_errors.append((lineno, str(exc)))
                continue
            if self.store_triple(triple):
                stats.triples_stored += 1
            else:
                stats.duplicates += 1
        self.split_check()
        return stats

    def split_check(self):
        self.kv.split_check(T_SPO)
        self.kv.split_check(T_OPS)

    # -- routing --------------------------------------------------------------

    def is_class_predicate(self, slot) -> bool:
        return isinstance(slot, Term) and slot == self.class_predicate

    def resolve_pattern(self, p: TriplePattern) -> AccessPlan:
        s, pr, o = p
        sb, pb, ob = (not isinstance(x, Variable) for x in p)
        enc = encode_term
        if not sb and pb and ob and self.compound_class_keys and self.is_class_predicate(pr):
            return AccessPlan(T_OPS, CLASS_RANGE_SCAN, None, FilterSpec.column_equals(enc(pr)),
                              class_prefix=enc(o) + SEP)
        if sb and pb and ob:
            return AccessPlan(T_SPO, GET, enc(s), FilterSpec.column_and_value(enc(pr), enc(o)))
        if not sb and pb and ob:
            return AccessPlan(T_OPS, GET, enc(o), FilterSpec.column_equals(enc(pr)))
        if sb and not pb and ob:
            return AccessPlan(T_SPO, GET, enc(s), FilterSpec.value_equals(enc(o)))
        if sb and pb and not ob:
            return AccessPlan(T_SPO, GET, enc(s), FilterSpec.column_equals(enc(pr)))
        if not sb and not pb and ob:
            prefix = enc(o) + SEP if self.compound_class_keys else None
            return AccessPlan(T_OPS, GET, enc(o), NO_FILTER, class_prefix=prefix)
        if not sb and pb and not ob:
            return AccessPlan(T_SPO, SCAN, None, FilterSpec.column_equals(enc(pr)))
        if sb and not pb and not ob:
            return AccessPlan(T_SPO, GET, enc(s), NO_FILTER)
        return AccessPlan(T_SPO, SCAN, None, NO_FILTER)

    def scan_range(self, plan: AccessPlan) -> tuple[bytes, bytes | None]:
        """Row range covering everything ``plan`` would read."""
        if plan.access == SCAN:
            return b"", None
        if plan.access == CLASS_RANGE_SCAN:
            return plan.class_prefix, _prefix_end(plan.class_prefix)
        if plan.class_prefix is not None:
            # plain row followed by its compound class rows
            return plan.row, plan.row + b"\x01"
        return plan.row, plan.row + SEP

    # -- decoding ---------------------------------------------------------------

    def decode_cells(self, table: str, result: RowResult) -> Iterator[Triple]:
        row = result.row
        if table == T_SPO:
            s = decode_term(row)
            for c in result.cells:
                yield Triple(s, decode_term(c.column), decode_term(c.value))
        else:
            obj_key = row.split(SEP, 1)[0] if SEP in row else row
            o = decode_term(obj_key)
            for c in result.cells:
                yield Triple(decode_term(c.value), decode_term(c.column), o)

    def mappings_from_rows(self, p: TriplePattern, table: str,
                           rows: Iterable[RowResult]) -> Iterator[SolutionMapping]:
        for r in rows:
            for t in self.decode_cells(table, r):
                mu = match_triple(p, t)
                if mu is not None:
                    yield mu

    # -- reads ------------------------------------------------------------------

    def lookup(self, p: TriplePattern) -> list[SolutionMapping]:
        plan = self.resolve_pattern(p)
        kv = self.kv
        if plan.access == GET:
            rows = [kv.get(plan.table, plan.row, plan.filter)]
            if plan.class_prefix is not None:
                rows.extend(kv.scan(plan.table, plan.class_prefix, _prefix_end(plan.class_prefix)))
        elif plan.access == CLASS_RANGE_SCAN:
            rows = kv.scan(plan.table, plan.class_prefix, _prefix_end(plan.class_prefix), plan.filter)
        else:
            rows = kv.scan(plan.table, b"", None, plan.filter)
        return list(self.mappings_from_rows(p, plan.table, rows))

    def star_row(self, patterns: list[TriplePattern]) -> tuple[str, Term]:
        """Shared (table, row term) for a group answerable by one GET."""
        if not patterns:
            raise PreconditionError("empty pattern group")
        keys = set()
        for p in patterns:
            plan = self.resolve_pattern(p)
            if plan.access != GET or plan.class_prefix is not None:
                raise PreconditionError(f"pattern {p} is not answered by a single-row GET")
            keys.add((plan.table, plan.row))
        if len(keys) != 1:
            raise PreconditionError("patterns do not share one row")
        table, row = keys.pop()
        return table, decode_term(row)

    def multi_column_lookup(self, row_term: Term, patterns: list[TriplePattern]) -> list[SolutionMapping]:
        """Join of ``patterns`` computed from a single GET on their shared row."""
        table, shared = self.star_row(patterns)
        if shared != row_term:
            raise PreconditionError(f"patterns share row {shared}, not {row_term}")
        filters = [self.resolve_pattern(p).filter for p in patterns]
        result = self.kv.multi_get(table, encode_term(row_term), filters)
        triples = list(self.decode_cells(table, result))
        acc: list[SolutionMapping] = [{}]
        for p in patterns:
            matches = [mu for mu in (match_triple(p, t) for t in triples) if mu is not None]
            if not matches:
                return []
            acc = [merge(a, m) for a in acc for m in matches if compatible(a, m)]
            if not acc:
                return []
        return acc

    def triples(self) -> Iterator[Triple]:
        """Every stored triple, read back from ``T_spo`` (unmetered)."""
        t = self.kv.table(T_SPO)
        for row in t.row_keys(b"", None):
            yield from self.decode_cells(T_SPO, RowResult(row, t.read_row(row, NO_FILTER)))

    def ops_triples(self) -> Iterator[Triple]:
        t = self.kv.table(T_OPS)
        for row in t.row_keys(b"", None):
            yield from self.decode_cells(T_OPS, RowResult(row, t.read_row(row, NO_FILTER)))

    def table_summary(self) -> dict:
        out = {}
        for name in (T_SPO, T_OPS):
            t = self.kv.table(name)
            out[name] = {
                "rows": len(t),
                "cells": t.cell_count,
                "regions": len(t.regions),
                "max_region_bytes": max(r.size for r in t.regions),
            }
        return out

    # -- persistence --------------------------------------------------------------

    def persist(self, directory: str | os.PathLike):
        self.kv.persist(directory)
        with open(os.path.join(directory, CONFIG_NAME), "w", encoding="utf-8") as fh:
            json.dump({"class_predicate": self.class_predicate.lexical,
                       "compound_class_keys": self.compound_class_keys}, fh)

    @classmethod
    def open(cls, directory: str | os.PathLike) -> "RdfStore":
        kv = KVStore.open(directory)
        cfg_path = os.path.join(directory, CONFIG_NAME)
        cfg = {}
        if os.path.exists(cfg_path):
            with open(cfg_path, encoding="utf-8") as fh:
                cfg = json.load(fh)
        store = cls(kv, class_predicate=cfg.get("class_predicate", DEFAULT_CLASS_PREDICATE),
                    compound_class_keys=cfg.get("compound_class_keys", True))
        store.writable = False
        return store


def _prefix_end(prefix: bytes) -> bytes:
    # prefixes here always end in 0x00, so bumping the last byte is safe
    return prefix[:-1] + bytes([prefix[-1] + 1])
