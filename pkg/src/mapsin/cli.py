"""``mapsin`` command line: generate, load, query, explain, bench.

Exit codes: 0 ok, 1 I/O failure, 2 usage error, 3 verification failure.
Store defaults can be overridden with ``MAPSIN_STORE`` and
``MAPSIN_REGION_SIZE``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import baseline
from .datagen import GenConfig, generate
from .executor import Executor
from .kvstore import DEFAULT_MAX_REGION_SIZE, StoreError
from .planner import Mode, explain, plan
from .rdf_store import DEFAULT_CLASS_PREDICATE, RdfStore
from .sparql import QuerySyntaxError, UnsupportedConstructError, parse_query

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2, 3
ENGINES = ("mapsin", "reduce", "oracle")


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {v}")
    return v


def _range_arg(text: str):
    if "-" in text:
        lo, hi = text.split("-", 1)
        return int(lo), int(hi)
    return int(text)


def format_results(rows: list[dict], names: tuple[str, ...]) -> str:
    """TSV with a header of variable names; rows sorted for diff-ability."""
    lines = sorted("\t".join(r[v].n3() if v in r else "" for v in names) for r in rows)
    return "\n".join(["\t".join("?" + v for v in names), *lines]) + "\n"


def run_engine(store: RdfStore, bgp, engine: str, mode: str = "auto", workers: int = 1):
    """Evaluate ``bgp`` with one engine; returns (rows, stats dict)."""
    if engine == "mapsin":
        rows, stats = Executor(store, workers=workers).execute(plan(bgp, store, mode))
        return rows, stats.as_dict()
    if engine == "reduce":
        rows, stats = baseline.execute_reduce_side(store, bgp)
        return rows, stats.as_dict()
    if engine == "oracle":
        rows = baseline.oracle_evaluate(bgp, list(store.triples()))
        return rows, {"engine": "oracle", "result_count": len(rows)}
    raise UsageError(f"unknown engine {engine!r}")


def _read_query(arg: str) -> str:
    p = Path(arg)
    if p.exists():
        return p.read_text(encoding="utf-8")
    return arg


def _store_dir(args) -> str:
    d = args.store or os.environ.get("MAPSIN_STORE")
    if not d:
        raise UsageError("--store is required (or set MAPSIN_STORE)")
    return d


def _open_store(args) -> RdfStore:
    d = _store_dir(args)
    if not os.path.isdir(d):
        raise FileNotFoundError(f"store directory not found: {d}")
    return RdfStore.open(d)


# -- subcommands ------------------------------------------------------------------

def cmd_generate(args) -> int:
    try:
        cfg = GenConfig(seed=args.seed, entities=args.entities, classes=args.classes,
                        attributes=args.attributes, links=args.links,
                        class_skew=args.class_skew, literal_vocab=args.literal_vocab,
                        class_predicate=args.class_predicate)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    with open(args.out, "w", encoding="utf-8") as fh:
        n = generate(cfg, fh)
    print(json.dumps({"out": args.out, "triples": n}))
    return EXIT_OK


def cmd_load(args) -> int:
    d = _store_dir(args)
    region = args.region_size or int(os.environ.get("MAPSIN_REGION_SIZE", DEFAULT_MAX_REGION_SIZE))
    store = RdfStore(class_predicate=args.class_predicate, max_region_size=region)
    with open(args.input, encoding="utf-8") as fh:
        stats = store.load_ntriples(fh)
    store.persist(d)
    out = stats.as_dict()
    out["tables"] = store.table_summary()
    print(json.dumps(out))
    return EXIT_OK


def cmd_query(args) -> int:
    bgp = parse_query(_read_query(args.query))
    store = _open_store(args)
    if args.explain:
        sys.stdout.write(explain(plan(bgp, store, args.mode), store))
        return EXIT_OK
    rows, stats = run_engine(store, bgp, args.engine, args.mode, args.workers)
    sys.stdout.write(format_results(rows, bgp.result_vars))
    if args.stats:
        print(json.dumps(stats))
    return EXIT_OK


def cmd_explain(args) -> int:
    args.explain = True
    return cmd_query(args)


def cmd_bench(args) -> int:
    store = _open_store(args)
    qdir = Path(args.queries)
    files = sorted(qdir.glob("*.rq")) + sorted(qdir.glob("*.sparql"))
    if not files:
        raise FileNotFoundError(f"no *.rq queries in {qdir}")
    queries = [(f.stem, parse_query(f.read_text(encoding="utf-8"))) for f in files]
    engines = [e.strip() for e in args.engines.split(",") if e.strip()]
    modes = [Mode.parse(m.strip()).value for m in args.modes.split(",") if m.strip()]
    for e in engines:
        if e not in ENGINES:
            raise UsageError(f"unknown engine {e!r}")
    failed = False
    for rnd in range(args.repeat):
        for name, bgp in queries:
            counts = {}
            for e in engines:
                for m in (modes if e == "mapsin" else ["-"]):
                    rows, stats = run_engine(store, bgp, e, m if m != "-" else "auto")
                    counts[(e, m)] = len(rows)
                    print(json.dumps({"round": rnd, "query": name, "engine": e, "mode": m,
                                      "results": len(rows), "stats": stats}))
            if len(set(counts.values())) > 1:
                failed = True
                detail = {f"{e}/{m}": n for (e, m), n in counts.items()}
                print(json.dumps({"mismatch": name, "counts": detail}), file=sys.stderr)
    return EXIT_VERIFY if failed else EXIT_OK


# -- wiring ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mapsin", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic N-Triples")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--entities", type=int, default=100)
    g.add_argument("--classes", type=int, default=4)
    g.add_argument("--attributes", type=_range_arg, default=3, help="count or lo-hi")
    g.add_argument("--links", type=_range_arg, default=1, help="count or lo-hi")
    g.add_argument("--class-skew", type=float, default=0.5)
    g.add_argument("--literal-vocab", type=int, default=50)
    g.add_argument("--class-predicate", default=DEFAULT_CLASS_PREDICATE)
    g.set_defaults(func=cmd_generate)

    ld = sub.add_parser("load", help="load N-Triples into a store directory")
    ld.add_argument("--input", required=True)
    ld.add_argument("--store")
    ld.add_argument("--region-size", type=_positive_int)
    ld.add_argument("--class-predicate", default=DEFAULT_CLASS_PREDICATE)
    ld.set_defaults(func=cmd_load)

    def query_flags(p):
        p.add_argument("--store")
        p.add_argument("--query", required=True, help="query text or path to a query file")
        p.add_argument("--mode", choices=[m.value for m in Mode], default="auto")

    q = sub.add_parser("query", help="evaluate a query")
    query_flags(q)
    q.add_argument("--engine", choices=ENGINES, default="mapsin")
    q.add_argument("--workers", type=_positive_int, default=1)
    q.add_argument("--explain", action="store_true")
    q.add_argument("--stats", action="store_true")
    q.set_defaults(func=cmd_query)

    ex = sub.add_parser("explain", help="print the execution plan")
    query_flags(ex)
    ex.set_defaults(func=cmd_explain)

    b = sub.add_parser("bench", help="run a query directory across engines")
    b.add_argument("--store")
    b.add_argument("--queries", required=True)
    b.add_argument("--engines", default="mapsin,reduce")
    b.add_argument("--modes", default="auto", help="comma list of mapsin modes")
    b.add_argument("--repeat", type=_positive_int, default=1)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"mapsin: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QuerySyntaxError, UnsupportedConstructError, ValueError) as exc:
        print(f"mapsin: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, StoreError) as exc:
        print(f"mapsin: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
