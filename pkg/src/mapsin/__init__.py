"""Map-side index nested loop joins for SPARQL basic graph patterns over a
Bigtable-style sorted key-value store."""

from .baseline import ShuffleStats, execute_reduce_side, oracle_evaluate, reduce_side_join
from .datagen import GenConfig, generate, generate_triples
from .executor import ExecStats, Executor, execute
from .kvstore import FilterSpec, KVStore, Region, RowResult
from .planner import ExecutionPlan, Mode, detect_star, explain, plan, reorder
from .rdf_store import T_OPS, T_SPO, AccessPlan, LoadStats, RdfStore
from .sparql import (BasicGraphPattern, TriplePattern, Variable, compatible, format_query,
                     merge, multiset_equal, parse_query, substitute)
from .terms import Term, Triple, decode_term, encode_term

__version__ = "0.1.0"
