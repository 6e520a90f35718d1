import io
import random

import pytest
from hypothesis import given, settings, strategies as st

from mapsin import RdfStore
from mapsin.datagen import GenConfig, class_term, generate, generate_triples, random_connected_bgp
from mapsin.kvstore import DEFAULT_MAX_REGION_SIZE
from mapsin.rdf_store import T_OPS

from conftest import V, iri, tp


def test_closed_form_count():
    cfg = GenConfig(entities=2, classes=1, attributes=3, links=1)
    assert cfg.expected_triples() == 10
    assert len(list(generate_triples(cfg))) == 10


def test_range_config_has_no_closed_form():
    assert GenConfig(attributes=(1, 3)).expected_triples() is None


def test_same_seed_same_bytes():
    cfg = GenConfig(seed=5, entities=50, attributes=(0, 4), links=(1, 2))
    assert generate(cfg) == generate(cfg)
    assert generate(cfg) != generate(GenConfig(seed=6, entities=50, attributes=(0, 4), links=(1, 2)))


def test_generate_to_stream_returns_count():
    buf = io.StringIO()
    n = generate(GenConfig(entities=3, attributes=2, links=1), buf)
    assert n == 12
    assert buf.getvalue().count("\n") == 12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 1000), entities=st.integers(1, 40), classes=st.integers(1, 5),
       attrs=st.integers(0, 4), links=st.integers(0, 3))
def test_output_loads_cleanly(seed, entities, classes, attrs, links):
    if links > 3 * max(entities - 1, 1):
        return
    cfg = GenConfig(seed=seed, entities=entities, classes=classes, attributes=attrs, links=links)
    store = RdfStore()
    stats = store.load_ntriples(io.StringIO(generate(cfg)))
    assert stats.parse_errors == []
    assert stats.triples_read == cfg.expected_triples()
    assert stats.triples_stored == cfg.expected_triples()  # no duplicates are generated


def test_every_entity_has_one_class():
    triples = list(generate_triples(GenConfig(seed=1, entities=30, classes=4)))
    typed = [t.subject for t in triples if t.predicate == iri("rdf:type")]
    assert len(typed) == len(set(typed)) == 30


def _skewed_store(compound: bool) -> RdfStore:
    store = RdfStore(compound_class_keys=compound)
    store.load_ntriples(io.StringIO(generate(GenConfig(seed=0, entities=1000, classes=1,
                                                       class_skew=1.0, attributes=0, links=0))))
    return store


def test_fat_class_row_is_split_by_compound_keys():
    store = _skewed_store(True)
    sizes = [r.size for r in store.kv.regions(T_OPS)]
    assert len(sizes) > 1
    assert max(sizes) <= DEFAULT_MAX_REGION_SIZE
    members = store.lookup(tp(V("s"), iri("rdf:type"), class_term(0)))
    assert len(members) == 1000


def test_without_compound_keys_the_class_row_cannot_split():
    store = _skewed_store(False)
    regions = store.kv.regions(T_OPS)
    assert max(r.size for r in regions) > DEFAULT_MAX_REGION_SIZE
    assert len(store.lookup(tp(V("s"), iri("rdf:type"), class_term(0)))) == 1000


@pytest.mark.parametrize("kwargs", [
    {"entities": 0}, {"classes": 0}, {"class_skew": 0.0}, {"class_skew": 1.5},
    {"attributes": (3, 1)}, {"links": -1}, {"literal_vocab": 0}, {"entities": 2, "links": 4},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        GenConfig(**kwargs)


def test_random_bgp_is_connected_and_satisfiable():
    triples = list(generate_triples(GenConfig(seed=2, entities=80, links=2)))
    rng = random.Random(0)
    for _ in range(20):
        bgp = random_connected_bgp(triples, rng, rng.randint(1, 5))
        seen = set(bgp.patterns[0].domain)
        for p in bgp.patterns[1:]:
            assert seen & p.domain
            seen |= p.domain
