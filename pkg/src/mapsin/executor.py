"""Map-only execution of MAPSIN plans.

Each stage is a simulated map phase: the input multiset is split into
partitions (one per region touched by the initial scan), a map function is
invoked once per input mapping, and the outputs are handed to the next stage
partition by partition. Map functions keep no state between invocations;
partitions can be processed by a thread pool.
"""

from __future__ import annotations

import os
import pickle
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

from .planner import ExecutionPlan, InitialScan, MapsinJoin, MultiwayJoin, SinglePattern
from .rdf_store import GET, RdfStore
from .sparql import SolutionMapping, TriplePattern, compatible, merge, project, substitute


@dataclass
class ExecStats:
    engine: str = "mapsin"
    mode: str = ""
    stages_run: int = 0
    map_invocations: int = 0
    get_requests: int = 0
    rows_scanned: int = 0
    cells_fetched: int = 0
    bytes_fetched: int = 0
    intermediate_mappings: list[int] = field(default_factory=list)
    partitions: int = 0
    cartesian_stages: int = 0
    scan_routed_lookups: int = 0
    result_count: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class StagePartition:
    partition_id: int
    mappings: list[SolutionMapping] | None = None
    spill_path: str | None = None

    def load(self) -> list[SolutionMapping]:
        if self.mappings is not None:
            return self.mappings
        with open(self.spill_path, "rb") as fh:
            return pickle.load(fh)

    def __len__(self):
        return len(self.load())


class _Tally:
    """Per-worker counters, folded into ExecStats at stage end."""

    __slots__ = ("invocations", "scan_routed")

    def __init__(self):
        self.invocations = 0
        self.scan_routed = 0


class Executor:
    def __init__(self, store: RdfStore, workers: int = 1, spill_threshold: int | None = None,
                 spill_dir: str | None = None):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.store = store
        self.workers = workers
        self.spill_threshold = spill_threshold
        self.spill_dir = spill_dir

    # -- map functions ---------------------------------------------------------

    def _lookup(self, p: TriplePattern, tally: _Tally | None) -> list[SolutionMapping]:
        if tally is not None and self.store.resolve_pattern(p).access != GET:
            tally.scan_routed += 1
        return self.store.lookup(p)

    def map_mapsin(self, mu: SolutionMapping, p_next: TriplePattern,
                   tally: _Tally | None = None) -> list[SolutionMapping]:
        if mu.keys() & p_next.domain:
            results = self._lookup(substitute(mu, p_next), tally)
        else:
            results = self._lookup(p_next, tally)
        return [merge(mu, r) for r in results if compatible(mu, r)]

    def map_multiway(self, mu: SolutionMapping, patterns: list[TriplePattern],
                     tally: _Tally | None = None) -> list[SolutionMapping]:
        acc = [mu]
        for p in patterns:
            results = self._lookup(substitute(mu, p), tally)
            if not results:
                return []
            acc = [merge(a, r) for r in results for a in acc if compatible(a, r)]
            if not acc:
                return []
        return acc

    def map_multiway_optimized(self, mu: SolutionMapping, patterns: list[TriplePattern],
                               tally: _Tally | None = None) -> list[SolutionMapping]:
        if not patterns:
            return [mu]
        subs = [substitute(mu, p) for p in patterns]
        _, row_term = self.store.star_row(subs)
        results = self.store.multi_column_lookup(row_term, subs)
        return [merge(mu, r) for r in results if compatible(mu, r)]

    # -- stages ------------------------------------------------------------------

    def stage_initial_scan(self, p1: TriplePattern) -> list[StagePartition]:
        route = self.store.resolve_pattern(p1)
        start, end = self.store.scan_range(route)
        # GET-routed first patterns become a one-row range scan: no GET issued
        streams = self.store.kv.partitioned_scan(route.table, route.filter, start, end)

        def work(item):
            pid, rows = item
            return StagePartition(pid, list(self.store.mappings_from_rows(p1, route.table, rows)))

        return self._fan_out(work, streams)

    def _fan_out(self, fn: Callable, items: list) -> list:
        if self.workers == 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(fn, items))

    def _run_map_stage(self, parts: list[StagePartition], map_fn: Callable,
                       stats: ExecStats) -> list[StagePartition]:
        def work(part: StagePartition):
            tally = _Tally()
            out: list[SolutionMapping] = []
            for mu in part.load():
                tally.invocations += 1
                out.extend(map_fn(mu, tally))
            return StagePartition(part.partition_id, out), tally

        results = self._fan_out(work, parts)
        for _, tally in results:
            stats.map_invocations += tally.invocations
            stats.scan_routed_lookups += tally.scan_routed
        return [p for p, _ in results]

    def _hand_off(self, parts: list[StagePartition]) -> list[StagePartition]:
        """Stage boundary: optionally spill the partitions to temp files."""
        if self.spill_threshold is None:
            return parts
        if sum(len(p.mappings or ()) for p in parts) <= self.spill_threshold:
            return parts
        spilled = []
        for p in parts:
            fd, path = tempfile.mkstemp(prefix=f"mapsin-part{p.partition_id}-", suffix=".pkl",
                                        dir=self.spill_dir)
            with os.fdopen(fd, "wb") as fh:
                pickle.dump(p.mappings, fh)
            spilled.append(StagePartition(p.partition_id, None, path))
        return spilled

    # -- driver --------------------------------------------------------------------

    def execute(self, ep: ExecutionPlan) -> tuple[list[SolutionMapping], ExecStats]:
        stats = ExecStats(mode=ep.mode.value, cartesian_stages=ep.cartesian_stages)
        before = self.store.meter.snapshot()
        spill_files: list[str] = []
        try:
            parts: list[StagePartition] = []
            for stage in ep.stages:
                if isinstance(stage, (SinglePattern, InitialScan)):
                    parts = self.stage_initial_scan(stage.pattern)
                    stats.partitions = len(parts)
                elif isinstance(stage, MapsinJoin):
                    p = stage.pattern
                    parts = self._run_map_stage(parts, lambda mu, t, p=p: self.map_mapsin(mu, p, t), stats)
                elif isinstance(stage, MultiwayJoin):
                    ps = list(stage.patterns)
                    fn = self.map_multiway_optimized if stage.optimized else self.map_multiway
                    parts = self._run_map_stage(parts, lambda mu, t, ps=ps, fn=fn: fn(mu, ps, t), stats)
                else:
                    raise TypeError(f"unknown stage {stage!r}")
                stats.stages_run += 1
                stats.intermediate_mappings.append(sum(len(p) for p in parts))
                parts = self._hand_off(parts)
                spill_files.extend(p.spill_path for p in parts if p.spill_path)
            # output order: partition-major, then input order
            out = [mu for p in parts for mu in p.load()]
        finally:
            for path in spill_files:
                try:
                    os.remove(path)
                except OSError:
                    pass
        delta = self.store.meter.snapshot() - before
        stats.get_requests = delta.get_requests
        stats.rows_scanned = delta.rows_scanned
        stats.cells_fetched = delta.cells_fetched
        stats.bytes_fetched = delta.bytes_fetched
        result = project(out, ep.bgp)
        stats.result_count = len(result)
        return result, stats


def execute(store: RdfStore, ep: ExecutionPlan, workers: int = 1) -> tuple[list[SolutionMapping], ExecStats]:
    return Executor(store, workers=workers).execute(ep)
