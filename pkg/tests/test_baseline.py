import io
import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from mapsin import RdfStore
from mapsin.baseline import (OracleBudgetExceeded, ShuffleStats, execute_reduce_side,
                             oracle_evaluate, reduce_side_join)
from mapsin.datagen import GenConfig, generate_triples, random_connected_bgp, selective_join
from mapsin.executor import execute
from mapsin.planner import plan
from mapsin.sparql import BasicGraphPattern, multiset_equal, parse_query
from mapsin.terms import Triple

from conftest import V, iri, lit, tp

TITLE = tp(V("article"), iri("title"), V("title"))
AUTHOR = tp(V("article"), iri("author"), V("author"))


def test_reduce_side_join_title_author(articles):
    left, right = articles.lookup(TITLE), articles.lookup(AUTHOR)
    assert (len(left), len(right)) == (2, 4)
    out, st_ = reduce_side_join(left, right, {"article"})
    assert len(out) == 4
    assert st_.records_shuffled == 6
    assert st_.reduce_groups == 2
    assert st_.bytes_shuffled > 0


def test_reduce_side_join_empty_side(articles):
    out, st_ = reduce_side_join(articles.lookup(TITLE), [], {"article"})
    assert out == [] and st_.records_shuffled == 2


def test_reduce_side_join_cartesian_single_group(articles):
    years = articles.lookup(tp(V("a"), iri("year"), V("y")))
    out, st_ = reduce_side_join(articles.lookup(TITLE), years, set())
    assert len(out) == 4
    assert st_.reduce_groups == 1


def test_execute_reduce_side_article_query(articles, article_query_text):
    bgp = parse_query(article_query_text)
    rows, st_ = execute_reduce_side(articles, bgp)
    mapsin_rows, _ = execute(articles, plan(bgp, articles))
    assert len(rows) == 4
    assert multiset_equal(rows, mapsin_rows)
    assert st_.jobs == 2 and st_.result_count == 4
    # title(2) + author(4) into job 1, its 4 results + year(2) into job 2
    assert st_.records_shuffled == 12


def test_execute_reduce_side_single_pattern(articles):
    rows, st_ = execute_reduce_side(articles, parse_query("SELECT * { ?a <author> ?b }"))
    assert len(rows) == 4
    assert st_.records_shuffled == 0 and st_.jobs == 0


def test_empty_result_still_shuffles_everything():
    store = RdfStore()
    store.load_ntriples(io.StringIO("<a> <p> <x> .\n<b> <p> <y> .\n<c> <q> <z> .\n"))
    bgp = parse_query("SELECT * { ?s <p> ?o . ?s <q> ?t }")
    rows, st_ = execute_reduce_side(store, bgp)
    assert rows == []
    assert st_.records_shuffled == 3


def test_shuffle_stats_accumulate():
    total = ShuffleStats()
    total += ShuffleStats(records_shuffled=3, bytes_shuffled=10, reduce_groups=1, jobs=1)
    total += ShuffleStats(records_shuffled=2, bytes_shuffled=5, reduce_groups=2, jobs=1)
    assert (total.records_shuffled, total.bytes_shuffled, total.reduce_groups, total.jobs) == (5, 15, 3, 2)


# -- oracle ----------------------------------------------------------------------------

def test_oracle_article_query_by_hand(articles, article_query_text):
    rows = oracle_evaluate(parse_query(article_query_text), list(articles.triples()))
    got = sorted((r["article"].lexical, r["title"].lexical, r["author"].lexical, r["year"].lexical)
                 for r in rows)
    assert got == [
        ("Article1", '"PigSPARQL"', "Alex", '"2011"'),
        ("Article1", '"PigSPARQL"', "Martin", '"2011"'),
        ("Article2", '"RDFPath"', "Alex", '"2011"'),
        ("Article2", '"RDFPath"', "Martin", '"2011"'),
    ]


def test_oracle_ground_pattern(articles):
    triples = list(articles.triples())
    present = BasicGraphPattern((tp(iri("Article2"), iri("cite"), iri("Article1")),))
    absent = BasicGraphPattern((tp(iri("Article1"), iri("cite"), iri("Article2")),))
    assert oracle_evaluate(present, triples) == [{}]
    assert oracle_evaluate(absent, triples) == []


def test_oracle_preserves_multiplicity():
    triples = [Triple(iri("a"), iri("p"), iri("x")), Triple(iri("a"), iri("p"), iri("y"))]
    bgp = BasicGraphPattern((tp(V("s"), iri("p"), V("o")),), projected=("s",))
    assert oracle_evaluate(bgp, triples) == [{"s": iri("a")}, {"s": iri("a")}]


def test_oracle_budget_raises():
    triples = [Triple(iri(f"s{i}"), iri("p"), iri(f"o{i}")) for i in range(30)]
    bgp = BasicGraphPattern((tp(V("a"), iri("p"), V("b")), tp(V("c"), iri("p"), V("d"))))
    with pytest.raises(OracleBudgetExceeded):
        oracle_evaluate(bgp, triples, max_intermediate=10)
    assert len(oracle_evaluate(bgp, triples)) == 900


_TRIPLES = list(generate_triples(GenConfig(seed=11, entities=60, classes=3, attributes=2, links=2)))


@settings(max_examples=12, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(2, 4))
def test_oracle_is_order_independent(seed, n):
    rng = random.Random(seed)
    bgp = random_connected_bgp(_TRIPLES, rng, n)
    ref = oracle_evaluate(bgp, _TRIPLES)
    for perm in itertools.permutations(bgp.patterns):
        other = BasicGraphPattern(perm, bgp.projected, bgp.constants)
        assert multiset_equal(oracle_evaluate(other, _TRIPLES), ref)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(1, 4))
def test_reduce_side_matches_oracle(seed, n):
    store = _store()
    bgp = random_connected_bgp(_TRIPLES, random.Random(seed), n)
    rows, _ = execute_reduce_side(store, bgp)
    assert multiset_equal(rows, oracle_evaluate(bgp, _TRIPLES))


_cache = {}


def _store():
    if "s" not in _cache:
        s = RdfStore()
        for t in _TRIPLES:
            s.store_triple(t)
        _cache["s"] = s
    return _cache["s"]


def test_selective_join_mapsin_fetches_less_than_shuffle():
    text, bgp = selective_join(small=10, large=500, matches=20)
    store = RdfStore()
    store.load_ntriples(io.StringIO(text))
    ref, shuffle = execute_reduce_side(store, bgp)
    rows, stats = execute(store, plan(bgp, store))
    assert multiset_equal(rows, ref)
    assert len(rows) == 20
    assert shuffle.records_shuffled == 510
    assert stats.cells_fetched < shuffle.records_shuffled
