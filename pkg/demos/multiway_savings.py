"""Count GET requests and map stages for a star query under each plan mode.

Every generated entity has attributes attr0..attr4, so the star
``?s attr0 ?v0 . ... ?s attr4 ?v4`` produces one initial mapping per
entity, followed by four more patterns on the same subject row.

Run:  python3 demos/multiway_savings.py
"""

import io

from mapsin import GenConfig, RdfStore, execute, generate, plan
from mapsin.sparql import BasicGraphPattern, TriplePattern, Variable
from mapsin.terms import Term

K = 4
store = RdfStore()
store.load_ntriples(io.StringIO(generate(GenConfig(seed=1, entities=500, attributes=K + 1))))

s = Variable("s")
star = BasicGraphPattern(tuple(
    TriplePattern(s, Term.iri(f"http://example.org/attr{j}"), Variable(f"v{j}"))
    for j in range(K + 1)))

print(f"{'mode':<16}{'stages':>8}{'GETs':>8}{'cells':>9}{'results':>9}")
for mode in ("cascade", "multiway-plain", "multiway"):
    rows, st = execute(store, plan(star, store, mode))
    print(f"{mode:<16}{st.stages_run:>8}{st.get_requests:>8}{st.cells_fetched:>9}{len(rows):>9}")

print("\ncascade runs one stage per pattern; multiway folds the star into one stage,")
print("and the optimized variant fetches all four columns with a single GET.")
