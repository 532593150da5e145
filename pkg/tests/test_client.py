import itertools

import pytest

from brtpf.client import (
    BgpQuery,
    LocalEndpoint,
    RecordingEndpoint,
    RunMetrics,
    ServerRejectedError,
    TransportError,
    execute_brtpf,
    execute_tpf,
    format_solution,
    parse_query_text,
    plan,
    write_queries,
    load_queries,
)
from brtpf.fragment import parse_request, serialize_request
from brtpf.server import ServerConfig
from brtpf.store import Dataset
from brtpf.terms import SolutionMapping, Triple, TriplePattern, iri, literal, variable
from brtpf.workload import oracle_bgp

from oracles import brute_bgp, solutions_as_sets

P, Q, R = iri("urn:p"), iri("urn:q"), iri("urn:r")
A, B, C, D = variable("a"), variable("b"), variable("c"), variable("d")
X, Y = variable("x"), variable("y")


def endpoint_for(ds, **server_kw):
    return LocalEndpoint(ds, ServerConfig(**server_kw))


def edges(pred, pairs):
    return [Triple(iri(f"urn:{s}"), pred, iri(f"urn:{o}")) for s, o in pairs]


# planning

def test_plan_single_pattern():
    ds = Dataset(edges(P, [("a", "b")]))
    metrics = RunMetrics()
    out = plan(BgpQuery((TriplePattern(X, P, Y),)), endpoint_for(ds), metrics)
    assert out.order == (0,)
    assert metrics.num_requests == 1


def test_plan_smaller_estimate_first():
    ds = Dataset(edges(P, [(f"s{i}", f"o{i}") for i in range(5)]) + edges(Q, [(f"s{i}", f"t{i}") for i in range(3)]))
    query = BgpQuery((TriplePattern(X, P, Y), TriplePattern(X, Q, variable("z"))))
    out = plan(query, endpoint_for(ds))
    assert out.order == (1, 0)
    assert [e.count for e in out.estimates] == [5, 3]


def _conformant_orders(patterns, counts):
    """All orders the plan invariants allow (connectivity-first, min-est fallback)."""
    n = len(patterns)
    lowest_min = min(range(n), key=lambda i: (counts[i], i))
    out = []
    for perm in itertools.permutations(range(n)):
        if perm[0] != lowest_min:
            continue
        bound = set(patterns[perm[0]].variables())
        ok = True
        for pos in range(1, n):
            remaining = set(perm[pos:])
            connected = {j for j in remaining if patterns[j].variables() & bound}
            if connected:
                if perm[pos] not in connected:
                    ok = False
                    break
            elif perm[pos] != min(remaining, key=lambda j: (counts[j], j)):
                ok = False
                break
            bound |= patterns[perm[pos]].variables()
        if ok:
            out.append(perm)
    return out


def test_plan_derived_three_pattern_example():
    # estimates (10, 2, 7); pattern 1 disconnected from 2, pattern 0 bridges them
    ds = Dataset(
        edges(P, [(f"s{i}", f"m{i}") for i in range(10)])
        + edges(Q, [("s0", "c0"), ("s1", "c1")])
        + edges(R, [(f"m{i}", f"d{i}") for i in range(7)])
    )
    patterns = (TriplePattern(A, P, B), TriplePattern(A, Q, C), TriplePattern(B, R, D))
    out = plan(BgpQuery(patterns), endpoint_for(ds))
    assert [e.count for e in out.estimates] == [10, 2, 7]
    assert out.order == (1, 0, 2)
    assert out.order in _conformant_orders(patterns, [10, 2, 7])


def test_plan_short_circuits_on_empty_pattern():
    ds = Dataset(edges(P, [("a", "b")]))
    query = BgpQuery((TriplePattern(X, Q, Y), TriplePattern(X, P, Y)))
    metrics = RunMetrics()
    out = plan(query, endpoint_for(ds), metrics)
    assert out.empty_pattern == 0
    assert metrics.num_requests == len(query.patterns)


# metric examples

def test_empty_first_pattern_costs_planning_only():
    ds = Dataset(edges(P, [("a", "b")]))
    query = BgpQuery((TriplePattern(X, Q, Y), TriplePattern(X, P, Y)))
    for run in (lambda: execute_tpf(query, endpoint_for(ds)), lambda: execute_brtpf(query, endpoint_for(ds), 5)):
        solutions, metrics = run()
        assert solutions == []
        assert metrics.num_requests == len(query.patterns)


def test_single_pattern_reuses_planning_page():
    ds = Dataset(edges(P, [(f"s{i}", f"o{i}") for i in range(7)]))
    query = BgpQuery((TriplePattern(X, P, Y),))
    for run in (lambda **kw: execute_tpf(query, endpoint_for(ds), **kw),
                lambda **kw: execute_brtpf(query, endpoint_for(ds), 5, **kw)):
        solutions, metrics = run()
        assert len(solutions) == 7
        assert metrics.num_requests == 1
        solutions, metrics = run(reuse_planning_pages=False)
        assert len(solutions) == 7
        assert metrics.num_requests == 2


def test_two_pattern_join_matches_oracle():
    ds = Dataset(
        edges(P, [(f"s{i}", f"m{i % 4}") for i in range(12)])
        + edges(Q, [(f"m{i}", f"t{i}") for i in range(8)])
    )
    assert len(ds) == 20
    query = BgpQuery((TriplePattern(A, P, B), TriplePattern(B, Q, C)))
    expected = solutions_as_sets(oracle_bgp(ds, query))
    assert expected == brute_bgp(ds.triples, query.patterns)
    endpoint = endpoint_for(ds)
    tpf_solutions, _ = execute_tpf(query, endpoint)
    assert solutions_as_sets(tpf_solutions) == expected
    for max_mpr in (1, 2, 5, 30):
        brtpf_solutions, _ = execute_brtpf(query, endpoint, max_mpr)
        assert solutions_as_sets(brtpf_solutions) == expected


def test_brtpf_beats_tpf_on_join_requests():
    ds = Dataset(
        edges(P, [(f"s{i}", f"m{i % 6}") for i in range(40)])
        + edges(Q, [(f"m{i}", f"t{i}") for i in range(6)])
    )
    query = BgpQuery((TriplePattern(A, P, B), TriplePattern(B, Q, C)))
    endpoint = endpoint_for(ds)
    _, tpf_metrics = execute_tpf(query, endpoint)
    _, brtpf_metrics = execute_brtpf(query, endpoint, 10)
    assert tpf_metrics.num_requests >= brtpf_metrics.num_requests


def test_cartesian_product_flagged_and_correct():
    ds = Dataset(edges(P, [("a", "b")]) + edges(Q, [("c", "d")]))
    query = BgpQuery((TriplePattern(A, P, B), TriplePattern(C, Q, D)))
    expected = brute_bgp(ds.triples, query.patterns)
    assert len(expected) == 1
    for solutions, metrics in (
        execute_tpf(query, endpoint_for(ds)),
        execute_brtpf(query, endpoint_for(ds), 5),
    ):
        assert solutions_as_sets(solutions) == expected
        assert metrics.cartesian_steps == 1


def test_literal_join_value_prunes_instead_of_crashing():
    # ?x binds to a literal in pattern 1 but sits in subject position of pattern 2
    ds = Dataset(
        [Triple(iri("urn:s"), P, literal("v")), Triple(iri("urn:s2"), P, iri("urn:m"))]
        + edges(Q, [("m", "t")])
    )
    query = BgpQuery((TriplePattern(A, P, X), TriplePattern(X, Q, C)))
    expected = brute_bgp(ds.triples, query.patterns)
    tpf_solutions, _ = execute_tpf(query, endpoint_for(ds))
    brtpf_solutions, _ = execute_brtpf(query, endpoint_for(ds), 2)
    assert solutions_as_sets(tpf_solutions) == expected
    assert solutions_as_sets(brtpf_solutions) == expected


# chunk discipline and wire hygiene

def test_brtpf_chunk_discipline():
    # the 9-mapping side is picked first and feeds chunks of 4, 4, 1
    ds = Dataset(
        edges(P, [(f"s{i}", f"m{i % 3}") for i in range(17)])
        + edges(Q, [(f"m{i}", f"t{i}") for i in range(9)])
    )
    query = BgpQuery((TriplePattern(A, P, B), TriplePattern(B, Q, C)))
    max_mpr = 4
    recorder = RecordingEndpoint(endpoint_for(ds))
    execute_brtpf(query, recorder, max_mpr)
    bound_requests = 0
    for target in recorder.trace:
        req = parse_request(target)
        assert serialize_request(req) == target  # canonical round-trip
        if req.bindings:
            bound_requests += 1
            assert 1 <= len(req.bindings) <= max_mpr
            assert len(set(req.bindings.mappings)) == len(req.bindings)
    assert bound_requests >= 2


def test_tpf_emits_only_plain_requests():
    ds = Dataset(edges(P, [("s", "m")]) + edges(Q, [("m", "t")]))
    query = BgpQuery((TriplePattern(A, P, B), TriplePattern(B, Q, C)))
    recorder = RecordingEndpoint(endpoint_for(ds))
    execute_tpf(query, recorder)
    assert recorder.trace
    for target in recorder.trace:
        req = parse_request(target)
        assert not req.bindings
        assert serialize_request(req) == target


# failure modes

def test_timeout_sets_flag_and_returns_partial_metrics():
    ds = Dataset(edges(P, [(f"s{i}", f"o{i}") for i in range(5)]))
    query = BgpQuery((TriplePattern(X, P, Y),))
    # page 2 of 3 is due at t=0.4s, past the 300 ms deadline
    ticks = iter(x * 0.2 for x in itertools.count())
    solutions, metrics = execute_tpf(
        query, endpoint_for(ds, page_size=2), timeout_ms=300, clock=lambda: next(ticks)
    )
    assert metrics.timed_out and solutions == []
    assert metrics.num_requests == 1  # partial metrics survive
    stalled = iter([0.0, 9.9, 9.9, 9.9])
    solutions, metrics = execute_brtpf(
        query, endpoint_for(ds), 5, timeout_ms=300, clock=lambda: next(stalled)
    )
    assert metrics.timed_out and solutions == []


def test_server_rejection_surfaces():
    ds = Dataset(
        edges(P, [(f"s{i}", f"m{i % 3}") for i in range(9)])
        + edges(Q, [(f"m{i}", f"t{i}") for i in range(3)])
    )
    query = BgpQuery((TriplePattern(A, P, B), TriplePattern(B, Q, C)))
    with pytest.raises(ServerRejectedError) as err:
        execute_brtpf(query, endpoint_for(ds, max_mpr=2), 5)
    assert err.value.status == 400
    assert err.value.metrics is not None and err.value.metrics.num_requests > 0


def test_transport_error_carries_partial_metrics():
    class Flaky:
        def __init__(self):
            self.calls = 0

        def get(self, target):
            self.calls += 1
            if self.calls > 2:
                raise TransportError("connection dropped")
            return LocalEndpoint(Dataset(edges(P, [("a", "b")]) + edges(Q, [("b", "c")]))).get(target)

    query = BgpQuery((TriplePattern(A, P, B), TriplePattern(B, Q, C)))
    with pytest.raises(TransportError) as err:
        execute_tpf(query, Flaky())
    assert err.value.metrics.num_requests == 2


# query file format

QUERY_TEXT = """\
# name: Q17
?s <urn:p> ?o
?o <urn:q> "two words"

# a stray comment
# name: Q18
<urn:s> <urn:p> ?o
"""


def test_parse_query_text():
    queries = parse_query_text(QUERY_TEXT)
    assert [q.name for q in queries] == ["Q17", "Q18"]
    assert queries[0].patterns[1].object == literal("two words")
    assert len(queries[0].patterns) == 2 and len(queries[1].patterns) == 1


def test_query_file_roundtrip(tmp_path):
    queries = parse_query_text(QUERY_TEXT)
    path = str(tmp_path / "q.txt")
    write_queries(queries, path)
    assert load_queries(path) == queries


def test_format_solution_sorted_pairs():
    mu = SolutionMapping.of(y=literal("v"), x=iri("urn:a"))
    assert format_solution(mu) == '?x=<urn:a> ?y="v"'
