"""Compare data movement of a repartition join and a map-side index join.

The first pattern matches 10 subjects, the second 10,000, and only 20 of
the latter join. The reduce-side join ships both inputs in full; the
map-side join looks up just the rows the first pattern binds.

Run:  python3 demos/shuffle_comparison.py
"""

import io

from mapsin import RdfStore, execute, execute_reduce_side, plan
from mapsin.datagen import selective_join

text, bgp = selective_join(small=10, large=10_000, matches=20)
store = RdfStore()
store.load_ntriples(io.StringIO(text))

rows_r, shuffle = execute_reduce_side(store, bgp)
rows_m, stats = execute(store, plan(bgp, store))
assert len(rows_r) == len(rows_m) == 20

print(f"reduce-side: {shuffle.records_shuffled} records shuffled "
      f"({shuffle.bytes_shuffled} bytes) into {shuffle.reduce_groups} key groups")
print(f"map-side:    {stats.cells_fetched} cells fetched ({stats.bytes_fetched} bytes), "
      f"{stats.get_requests} GETs")
print(f"ratio: {shuffle.records_shuffled / stats.cells_fetched:.0f}x fewer records moved")
