"""Why class-membership triples get a compound row key.

With every entity in one class, keying the object table by the class alone
puts all memberships into a single row that no region split can divide.
Keying by class + subject turns it into many small contiguous rows.

Run:  python3 demos/fat_rows.py
"""

import io

from mapsin import GenConfig, RdfStore, generate
from mapsin.datagen import class_term
from mapsin.kvstore import DEFAULT_MAX_REGION_SIZE
from mapsin.sparql import TriplePattern, Variable
from mapsin.terms import Term

data = generate(GenConfig(seed=0, entities=1000, classes=1, class_skew=1.0, attributes=0, links=0))
members = TriplePattern(Variable("x"), Term.iri("rdf:type"), class_term(0))

for compound in (False, True):
    store = RdfStore(compound_class_keys=compound)
    store.load_ntriples(io.StringIO(data))
    regions = store.kv.regions("T_ops")
    largest = max(r.size for r in regions)
    flag = "over" if largest > DEFAULT_MAX_REGION_SIZE else "within"
    print(f"compound keys={compound!s:<5} regions={len(regions):<3} largest={largest:>6} B "
          f"({flag} the {DEFAULT_MAX_REGION_SIZE} B limit), "
          f"members found={len(store.lookup(members))}")
