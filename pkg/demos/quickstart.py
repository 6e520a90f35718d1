"""Load the two-article example graph and answer the author/title/year query.

Run:  python3 demos/quickstart.py
"""

import io

from mapsin import RdfStore, execute, explain, parse_query, plan

GRAPH = """\
<Article1> <title> "PigSPARQL" .
<Article1> <year> "2011" .
<Article1> <author> <Alex> .
<Article1> <author> <Martin> .
<Article2> <title> "RDFPath" .
<Article2> <year> "2011" .
<Article2> <author> <Martin> .
<Article2> <author> <Alex> .
<Article2> <cite> <Article1> .
"""

QUERY = """
SELECT * WHERE {
  ?article title  ?title .
  ?article author ?author .
  ?article year   ?year
}
"""

store = RdfStore()
stats = store.load_ntriples(io.StringIO(GRAPH))
print(f"loaded {stats.triples_stored} triples into two tables:")
for table, summary in store.table_summary().items():
    print(f"  {table}: {summary['rows']} rows, {summary['cells']} cells")

bgp = parse_query(QUERY)
ep = plan(bgp, store)
print()
print(explain(ep, store))

rows, run = execute(store, ep)
for r in sorted(rows, key=lambda r: (r["article"], r["author"])):
    print("  ", *(r[v].n3() for v in bgp.result_vars))
print(f"\n{run.result_count} results, {run.stages_run} map stages, "
      f"{run.get_requests} GET requests")
