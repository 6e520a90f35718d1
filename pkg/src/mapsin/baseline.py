"""Reference engines: a metered reduce-side (repartition) join and a
brute-force nested-loop oracle.

Neither uses the MAPSIN planner's stage machinery; the reduce-side engine
only borrows the pattern order so shuffle volumes are comparable.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .planner import reorder
from .rdf_store import RdfStore
from .sparql import (BasicGraphPattern, SolutionMapping, compatible, match_triple, merge,
                     project)
from .terms import Triple, encode_term


@dataclass
class ShuffleStats:
    engine: str = "reduce"
    records_shuffled: int = 0
    bytes_shuffled: int = 0
    reduce_groups: int = 0
    jobs: int = 0
    result_count: int = 0

    def __iadd__(self, other: "ShuffleStats"):
        self.records_shuffled += other.records_shuffled
        self.bytes_shuffled += other.bytes_shuffled
        self.reduce_groups += other.reduce_groups
        self.jobs += other.jobs
        return self

    def as_dict(self) -> dict:
        return asdict(self)


def _record_bytes(key: tuple, mu: SolutionMapping) -> int:
    # tag byte + join key + every bound term, in the store's term encoding
    size = 1 + sum(len(encode_term(t)) for t in key)
    for name, term in mu.items():
        size += len(name.encode()) + len(encode_term(term))
    return size


def reduce_side_join(left: Sequence[SolutionMapping], right: Sequence[SolutionMapping],
                     join_vars: Iterable[str]) -> tuple[list[SolutionMapping], ShuffleStats]:
    """Repartition join: both inputs are tagged, shuffled by join key, and
    joined per key group in the reducer."""
    join_vars = tuple(sorted(join_vars))
    stats = ShuffleStats(jobs=1)
    groups: dict[tuple, tuple[list, list]] = defaultdict(lambda: ([], []))
    # map + shuffle
    for side, records in ((0, left), (1, right)):
        for mu in records:
            key = tuple(mu[v] for v in join_vars)
            groups[key][side].append(mu)
            stats.records_shuffled += 1
            stats.bytes_shuffled += _record_bytes(key, mu)
    stats.reduce_groups = len(groups)
    # reduce
    out = []
    for key in sorted(groups):
        lefts, rights = groups[key]
        for a in lefts:
            for b in rights:
                if compatible(a, b):
                    out.append(merge(a, b))
    return out, stats


def execute_reduce_side(store: RdfStore, bgp: BasicGraphPattern
                        ) -> tuple[list[SolutionMapping], ShuffleStats]:
    """Left-deep chain of repartition joins over the reordered patterns."""
    ordered = reorder(bgp)
    total = ShuffleStats()
    acc = store.lookup(ordered[0])
    domain = set(ordered[0].domain)
    for p in ordered[1:]:
        right = store.lookup(p)
        acc, st = reduce_side_join(acc, right, domain & p.domain)
        total += st
        domain |= p.domain
    result = project(acc, bgp)
    total.result_count = len(result)
    return result, total


class OracleBudgetExceeded(RuntimeError):
    pass


def oracle_evaluate(bgp: BasicGraphPattern, triples: Sequence[Triple],
                    max_intermediate: int | None = None) -> list[SolutionMapping]:
    """Exhaustive nested-loop evaluation in query order, no indexes.

    ``max_intermediate`` aborts (rather than truncates) evaluation once an
    intermediate multiset grows past it, for test harnesses that sample
    random queries.
    """
    acc: list[SolutionMapping] = [{}]
    for p in bgp.patterns:
        matches = [mu for mu in (match_triple(p, t) for t in triples) if mu is not None]
        if max_intermediate is not None and len(acc) * len(matches) > 50 * max_intermediate:
            raise OracleBudgetExceeded(f"{len(acc)} x {len(matches)} candidate pairs")
        acc = [merge(a, m) for a in acc for m in matches if compatible(a, m)]
        if max_intermediate is not None and len(acc) > max_intermediate:
            raise OracleBudgetExceeded(f"{len(acc)} intermediate mappings")
        if not acc:
            break
    return project(acc, bgp)
