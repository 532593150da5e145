"""Triple Pattern Fragments and bindings-restricted Triple Pattern Fragments.

A client-server system for evaluating SPARQL basic graph patterns over an
HTTP interface that only answers (optionally bindings-restricted) triple
pattern requests, plus an HTTP-cache simulator and a benchmark harness.
"""

from .cache import CacheStats, CachingEndpoint, LruCache, replay
from .client import (
    BgpQuery,
    HttpEndpoint,
    LocalEndpoint,
    QueryPlan,
    RecordingEndpoint,
    RunMetrics,
    execute_brtpf,
    execute_tpf,
    plan,
)
from .fragment import (
    FragmentPage,
    FragmentRequest,
    build_page,
    paginate,
    parse_request,
    serialize_request,
)
from .harness import ExperimentConfig, ThroughputReport, run_network_sweep, run_throughput
from .server import ServerConfig, ServerHandle, answer, serve
from .store import CardinalityEstimate, Dataset, load_dataset
from .terms import (
    MappingSequence,
    SolutionMapping,
    Term,
    Triple,
    TriplePattern,
    apply_mapping,
    compatible,
    matches,
    merge,
)
from .workload import gen_data, generate_queries, generate_triples, oracle_bgp

__all__ = [
    "BgpQuery",
    "CacheStats",
    "CachingEndpoint",
    "CardinalityEstimate",
    "Dataset",
    "ExperimentConfig",
    "FragmentPage",
    "FragmentRequest",
    "HttpEndpoint",
    "LocalEndpoint",
    "LruCache",
    "MappingSequence",
    "QueryPlan",
    "RecordingEndpoint",
    "RunMetrics",
    "ServerConfig",
    "ServerHandle",
    "SolutionMapping",
    "Term",
    "ThroughputReport",
    "Triple",
    "TriplePattern",
    "answer",
    "apply_mapping",
    "build_page",
    "compatible",
    "execute_brtpf",
    "execute_tpf",
    "gen_data",
    "generate_queries",
    "generate_triples",
    "load_dataset",
    "matches",
    "merge",
    "oracle_bgp",
    "paginate",
    "parse_request",
    "plan",
    "replay",
    "run_network_sweep",
    "run_throughput",
    "serialize_request",
    "serve",
]
