"""Staged execution plans for basic graph patterns.

Patterns are ordered with the variable-counting heuristic, consecutive
patterns sharing a join variable are grouped into star groups, and each
group becomes one map-only stage.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Union

from .rdf_store import RdfStore
from .sparql import BasicGraphPattern, TriplePattern, Variable, substitute
from .terms import IRI, Term, encode_term


class Mode(str, enum.Enum):
    CASCADE = "cascade"              # one MAPSIN stage per pattern
    MULTIWAY_PLAIN = "multiway-plain"  # multiway stages, one GET per pattern
    MULTIWAY = "multiway"            # multiway, single-GET where the row is shared
    AUTO = "auto"                    # same as MULTIWAY

    @classmethod
    def parse(cls, value: "str | Mode") -> "Mode":
        return value if isinstance(value, cls) else cls(value)


class DisconnectedPatternWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SinglePattern:
    pattern: TriplePattern


@dataclass(frozen=True)
class InitialScan:
    pattern: TriplePattern


@dataclass(frozen=True)
class MapsinJoin:
    pattern: TriplePattern
    cartesian: bool = False


@dataclass(frozen=True)
class MultiwayJoin:
    patterns: tuple[TriplePattern, ...]
    join_var: str
    optimized: bool


Stage = Union[SinglePattern, InitialScan, MapsinJoin, MultiwayJoin]


@dataclass(frozen=True)
class StarGroup:
    patterns: tuple[TriplePattern, ...]
    join_var: str | None
    optimized: bool


@dataclass
class ExecutionPlan:
    stages: list[Stage]
    bgp: BasicGraphPattern
    mode: Mode
    cartesian_stages: int = 0

    def patterns(self) -> list[TriplePattern]:
        out = []
        for st in self.stages:
            if isinstance(st, MultiwayJoin):
                out.extend(st.patterns)
            else:
                out.append(st.pattern)
        return out


# -- variable counting ----------------------------------------------------------

def _position_class(p: TriplePattern) -> int:
    s, _, o = p
    if not isinstance(s, Variable):
        return 0
    if not isinstance(o, Variable):
        return 1
    return 2


def selectivity_rank(p: TriplePattern) -> tuple[int, int]:
    """Lower is more selective: (#variables, bound-position class)."""
    nvars = sum(isinstance(x, Variable) for x in p)
    return nvars, _position_class(p)


def reorder(bgp: BasicGraphPattern | list[TriplePattern]) -> list[TriplePattern]:
    """Order patterns by selectivity rank (stable).

    After the first pattern, the best-ranked pattern that shares a variable
    with the patterns already placed is taken next, so a connected BGP never
    yields a cartesian step. When nothing connects, the best-ranked remaining
    pattern is taken.
    """
    patterns = list(bgp.patterns if isinstance(bgp, BasicGraphPattern) else bgp)
    ranked = sorted(range(len(patterns)), key=lambda i: (selectivity_rank(patterns[i]), i))
    order: list[TriplePattern] = []
    bound: set[str] = set()
    remaining = ranked
    while remaining:
        pick = 0
        if order:
            for k, i in enumerate(remaining):
                if bound & patterns[i].domain:
                    pick = k
                    break
        i = remaining.pop(pick)
        order.append(patterns[i])
        bound |= patterns[i].domain
    return order


# -- star groups ----------------------------------------------------------------

_PLACEHOLDER = Term(IRI, "urn:mapsin:bound")
_JOIN_PLACEHOLDER = Term(IRI, "urn:mapsin:join")
_default_store: RdfStore | None = None


def _routing_store(store: RdfStore | None) -> RdfStore:
    global _default_store
    if store is not None:
        return store
    if _default_store is None:
        _default_store = RdfStore()
    return _default_store


def single_row_eligible(store: RdfStore | None, patterns: list[TriplePattern], var: str,
                        bound: set[str] | frozenset[str] = frozenset()) -> bool:
    """True when, once ``var`` (and ``bound``) are substituted, every pattern
    is answered by a GET on the row keyed by ``var``'s binding."""
    store = _routing_store(store)
    tables = set()
    for p in patterns:
        if var not in p.domain:
            return False
        binding = {v: _PLACEHOLDER for v in p.variables() if v in bound}
        binding[var] = _JOIN_PLACEHOLDER
        route = store.resolve_pattern(substitute(binding, p))
        if route.access != "get" or route.class_prefix is not None:
            return False
        if route.row != encode_term(_JOIN_PLACEHOLDER):
            return False
        tables.add(route.table)
    return len(tables) == 1


def detect_star(ordered: list[TriplePattern], store: RdfStore | None = None) -> list[StarGroup]:
    """Split ``ordered`` into maximal consecutive runs sharing one variable."""
    groups: list[StarGroup] = []
    i = 0
    n = len(ordered)
    while i < n:
        common = list(ordered[i].variables())
        j = i + 1
        while j < n:
            nxt = [v for v in common if v in ordered[j].domain]
            if not nxt:
                break
            common = nxt
            j += 1
        members = ordered[i:j]
        if len(members) == 1:
            groups.append(StarGroup(tuple(members), None, False))
        else:
            var = _choose_join_var(store, members, common)
            groups.append(StarGroup(tuple(members), var, single_row_eligible(store, members, var)))
        i = j
    return groups


def _choose_join_var(store, members, candidates) -> str:
    for v in candidates:
        if single_row_eligible(store, members, v):
            return v
    return candidates[0]


# -- plans --------------------------------------------------------------------------

def plan(bgp: BasicGraphPattern, store: RdfStore | None = None,
         mode: Mode | str = Mode.AUTO) -> ExecutionPlan:
    mode = Mode.parse(mode)
    ordered = reorder(bgp)
    if len(ordered) == 1:
        return ExecutionPlan([SinglePattern(ordered[0])], bgp, mode)

    stages: list[Stage] = [InitialScan(ordered[0])]
    bound = set(ordered[0].domain)
    cartesian = 0

    def add_single(p):
        nonlocal cartesian
        is_cart = not (bound & p.domain)
        if is_cart:
            cartesian += 1
            warnings.warn(f"pattern {p} shares no variable with earlier patterns; "
                          "emitting a cartesian stage", DisconnectedPatternWarning, stacklevel=3)
        stages.append(MapsinJoin(p, cartesian=is_cart))
        bound.update(p.domain)

    if mode is Mode.CASCADE:
        for p in ordered[1:]:
            add_single(p)
        return ExecutionPlan(stages, bgp, mode, cartesian)

    for gi, group in enumerate(detect_star(ordered, store)):
        members = list(group.patterns)
        if gi == 0:
            members = members[1:]  # the first pattern feeds the initial scan
        if group.join_var is None or group.join_var not in bound:
            # the join variable has to be bound before a multiway stage can
            # substitute it; join the first member on its own
            if members:
                add_single(members.pop(0))
        if len(members) == 1:
            add_single(members[0])
        elif members:
            var = group.join_var
            optimized = (mode is not Mode.MULTIWAY_PLAIN
                         and single_row_eligible(store, members, var, bound))
            stages.append(MultiwayJoin(tuple(members), var, optimized))
            for p in members:
                bound.update(p.domain)
    return ExecutionPlan(stages, bgp, mode, cartesian)


def _bound_shape(p: TriplePattern, bound: set[str]) -> TriplePattern:
    return substitute({v: _PLACEHOLDER for v in p.variables() if v in bound}, p)


def explain(ep: ExecutionPlan, store: RdfStore) -> str:
    """Stable textual rendering of a plan (for snapshot tests and the CLI)."""
    lines = [f"plan mode={ep.mode.value} stages={len(ep.stages)} patterns={len(ep.patterns())}"]
    bound: set[str] = set()
    for k, st in enumerate(ep.stages, 1):
        if isinstance(st, (SinglePattern, InitialScan)):
            name = type(st).__name__
            route = store.resolve_pattern(st.pattern).describe()
            lines.append(f"  {k}. {name} {st.pattern}  [{route} via partitioned scan]")
            bound |= st.pattern.domain
        elif isinstance(st, MapsinJoin):
            tag = " cartesian" if st.cartesian else ""
            route = store.resolve_pattern(_bound_shape(st.pattern, bound)).describe()
            lines.append(f"  {k}. MapsinJoin{tag} {st.pattern}  [{route}]")
            bound |= st.pattern.domain
        else:
            flag = "optimized" if st.optimized else "plain"
            lines.append(f"  {k}. MultiwayJoin {flag} join=?{st.join_var}")
            for p in st.patterns:
                route = store.resolve_pattern(_bound_shape(p, bound)).describe()
                lines.append(f"       {p}  [{route}]")
            for p in st.patterns:
                bound |= p.domain
    return "\n".join(lines) + "\n"
