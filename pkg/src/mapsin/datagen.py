"""Deterministic synthetic RDF in the loader's N-Triples subset.

Each entity gets one class assignment, a fixed number of literal attributes
and a number of links to other entities, which gives star neighbourhoods
around every subject. ``class_skew`` is the probability of drawing the
dominant class, so ``class_skew=1.0`` piles every entity into one class.
"""

from __future__ import annotations

import io
import random
from dataclasses import dataclass
from typing import Iterator, TextIO

from .rdf_store import DEFAULT_CLASS_PREDICATE, format_ntriples
from .sparql import BasicGraphPattern, TriplePattern, Variable
from .terms import LITERAL, Term, Triple

BASE = "http://example.org/"
LINK_PREDICATES = 3


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    entities: int = 100
    classes: int = 4
    attributes: int | tuple[int, int] = 3
    links: int | tuple[int, int] = 1
    class_skew: float = 0.5
    literal_vocab: int = 50
    class_predicate: str = DEFAULT_CLASS_PREDICATE

    def __post_init__(self):
        if self.entities <= 0:
            raise ValueError("entities must be positive")
        if self.classes <= 0:
            raise ValueError("classes must be positive")
        if not 0 < self.class_skew <= 1:
            raise ValueError("class_skew must be in (0, 1]")
        if self.literal_vocab <= 0:
            raise ValueError("literal_vocab must be positive")
        for name in ("attributes", "links"):
            lo, hi = _range(getattr(self, name))
            if lo < 0 or hi < lo:
                raise ValueError(f"bad {name} range {getattr(self, name)!r}")
        _, max_links = _range(self.links)
        targets = max(self.entities - 1, 1)
        if max_links > LINK_PREDICATES * targets:
            raise ValueError("too many links per entity for the entity count")

    def expected_triples(self) -> int | None:
        """Closed-form triple count, or None when counts are drawn from ranges."""
        a_lo, a_hi = _range(self.attributes)
        l_lo, l_hi = _range(self.links)
        if a_lo != a_hi or l_lo != l_hi:
            return None
        return self.entities * (1 + a_lo + l_lo)


def _range(v) -> tuple[int, int]:
    return (v, v) if isinstance(v, int) else (int(v[0]), int(v[1]))


def entity(i: int) -> Term:
    return Term.iri(f"{BASE}entity/{i:06d}")


def class_term(k: int) -> Term:
    return Term.iri(f"{BASE}class/C{k}")


def attr_predicate(j: int) -> Term:
    return Term.iri(f"{BASE}attr{j}")


def link_predicate(k: int) -> Term:
    return Term.iri(f"{BASE}link{k}")


def generate_triples(config: GenConfig) -> Iterator[Triple]:
    rng = random.Random(config.seed)
    type_p = Term.iri(config.class_predicate)
    n = config.entities
    for i in range(n):
        subj = entity(i)
        if config.classes == 1 or rng.random() < config.class_skew:
            cls = 0
        else:
            cls = rng.randrange(1, config.classes)
        yield Triple(subj, type_p, class_term(cls))
        for j in range(rng.randint(*_range(config.attributes))):
            yield Triple(subj, attr_predicate(j), Term.literal(f"v{rng.randrange(config.literal_vocab)}"))
        n_links = rng.randint(*_range(config.links))
        seen = set()
        while len(seen) < n_links:
            target = rng.randrange(n)
            if target == i and n > 1:
                continue
            key = (rng.randrange(LINK_PREDICATES), target)
            if key in seen:
                continue
            seen.add(key)
            yield Triple(subj, link_predicate(key[0]), entity(target))


def generate(config: GenConfig, out: TextIO | None = None) -> str | int:
    """Write N-Triples for ``config``.

    Returns the text when ``out`` is None, otherwise the number of triples
    written to ``out``.
    """
    if out is None:
        buf = io.StringIO()
        generate(config, buf)
        return buf.getvalue()
    count = 0
    for t in generate_triples(config):
        out.write(t.n3() + "\n")
        count += 1
    return count


def selective_join(small: int = 10, large: int = 10_000, matches: int = 20,
                   seed: int = 0) -> tuple[str, BasicGraphPattern]:
    """Data plus a two-pattern query with a very selective first pattern.

    ``(?x, sel, ?v)`` has ``small`` solutions, ``(?x, big, ?y)`` has
    ``large``, and exactly ``matches`` of the latter join with the former.
    """
    if matches > large or small <= 0:
        raise ValueError("inconsistent selective_join sizes")
    rng = random.Random(seed)
    sel, big = Term.iri(BASE + "sel"), Term.iri(BASE + "big")
    triples = [Triple(entity(i), sel, Term.literal(f"s{i}")) for i in range(small)]
    for k in range(matches):
        triples.append(Triple(entity(k % small), big, Term.iri(f"{BASE}target/m{k}")))
    for k in range(large - matches):
        triples.append(Triple(Term.iri(f"{BASE}other/{k:06d}"), big, Term.iri(f"{BASE}target/o{k}")))
    rng.shuffle(triples)
    bgp = BasicGraphPattern((
        TriplePattern(Variable("x"), sel, Variable("v")),
        TriplePattern(Variable("x"), big, Variable("y")),
    ))
    return format_ntriples(triples), bgp


def random_connected_bgp(triples: list[Triple], rng: random.Random, n_patterns: int,
                         p_var_node: float = 0.6, p_var_predicate: float = 0.15,
                         class_predicate: str = DEFAULT_CLASS_PREDICATE) -> BasicGraphPattern:
    """A connected BGP grown from a random walk over ``triples``.

    Nodes shared between chosen triples always become variables, so every
    pattern joins with an earlier one; the walk guarantees at least one
    solution. Class objects are never walked through (they are hubs).
    """
    type_p = Term.iri(class_predicate)
    by_node: dict[Term, list[Triple]] = {}
    for t in triples:
        by_node.setdefault(t.subject, []).append(t)
        if t.object.kind != LITERAL and t.predicate != type_p:
            by_node.setdefault(t.object, []).append(t)
    chosen = [rng.choice(triples)]
    nodes = [x for x in (chosen[0].subject, chosen[0].object) if x in by_node]
    attempts = 0
    while len(chosen) < n_patterns and attempts < 50 * n_patterns:
        attempts += 1
        node = rng.choice(nodes)
        t = rng.choice(by_node[node])
        if t in chosen:
            continue
        chosen.append(t)
        for x in (t.subject, t.object):
            if x in by_node and x not in nodes:
                nodes.append(x)

    uses: dict[Term, int] = {}
    for t in chosen:
        for x in {t.subject, t.object}:
            uses[x] = uses.get(x, 0) + 1
    names: dict[Term, Variable] = {}

    def var_for(term: Term) -> Variable:
        if term not in names:
            names[term] = Variable(f"v{len(names)}")
        return names[term]

    patterns = []
    for t in chosen:
        slots = []
        for pos, x in enumerate(t):
            if pos == 1:
                make_var = rng.random() < p_var_predicate
            else:
                make_var = (len(chosen) > 1 and uses[x] > 1) or x in names or rng.random() < p_var_node
            slots.append(var_for(x) if make_var else x)
        patterns.append(TriplePattern(*slots))
    return BasicGraphPattern(tuple(patterns))
