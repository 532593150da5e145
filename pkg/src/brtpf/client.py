"""Client-side BGP query engines over the fragment interface.

Two engines are provided.  `execute_tpf` follows the original
triple-pattern-fragment strategy: recursively pick the pattern with the
smallest cardinality estimate, stream its whole fragment, and for every
resulting solution mapping instantiate the remaining patterns and recurse,
refreshing their estimates with fresh page-1 requests at every level.
`execute_brtpf` builds a fixed left-deep pipeline once and ships
intermediate solution mappings to the server in chunks of at most
`max_mpr` per request (a bind join), so the server only returns triples
that can actually join.

Both engines count every page request and every received triple
(data plus per-page metadata) in a RunMetrics record.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Protocol

import requests

from .fragment import FragmentPage, FragmentRequest, parse_page_body, serialize_request
from .server import ServerConfig, answer
from .store import CardinalityEstimate, Dataset
from .terms import (
    EMPTY_MAPPING,
    EMPTY_SEQUENCE,
    MappingSequence,
    SolutionMapping,
    TriplePattern,
    applicable,
    apply_mapping,
    compatible,
    mapping_from_triple,
    merge,
    parse_pattern_line,
)


class TransportError(RuntimeError):
    """The endpoint could not be reached or the connection failed mid-query."""

    def __init__(self, message: str, metrics: Optional["RunMetrics"] = None):
        super().__init__(message)
        self.metrics = metrics


class ServerRejectedError(RuntimeError):
    """The server answered 4xx: a client/server configuration mismatch."""

    def __init__(self, status: int, body: str, metrics: Optional["RunMetrics"] = None):
        super().__init__(f"server answered {status}: {body.strip()}")
        self.status = status
        self.body = body
        self.metrics = metrics


class Endpoint(Protocol):
    def get(self, target: str) -> tuple[int, str]: ...


class HttpEndpoint:
    """GET requests against a real server; one pooled session per thread."""

    def __init__(self, base_url: str, timeout_s: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self._local = threading.local()

    def _session(self) -> requests.Session:
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            self._local.session = session
        return session

    def get(self, target: str) -> tuple[int, str]:
        try:
            resp = self._session().get(self.base_url + target, timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        return resp.status_code, resp.text


class LocalEndpoint:
    """In-process endpoint running the exact server handler, byte for byte."""

    def __init__(self, dataset: Dataset, config: ServerConfig | None = None):
        self.dataset = dataset
        self.config = config or ServerConfig()

    def get(self, target: str) -> tuple[int, str]:
        return answer(self.dataset, self.config, target)


class RecordingEndpoint:
    """Delegating endpoint that appends every request target to a trace list."""

    def __init__(self, inner: Endpoint, trace: Optional[list[str]] = None):
        self.inner = inner
        self.trace: list[str] = trace if trace is not None else []

    def get(self, target: str) -> tuple[int, str]:
        self.trace.append(target)
        return self.inner.get(target)


@dataclass(frozen=True)
class BgpQuery:
    """A basic graph pattern: a non-empty ordered list of triple patterns."""

    patterns: tuple[TriplePattern, ...]
    name: str = ""

    def __post_init__(self) -> None:
        if not self.patterns:
            raise ValueError("a BGP needs at least one triple pattern")

    def variables(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for tp in self.patterns:
            out |= tp.variables()
        return out


def parse_query_text(text: str) -> list[BgpQuery]:
    """Parse the block-oriented query file format (`# name: Q1` headers)."""
    queries: list[BgpQuery] = []
    name = ""
    patterns: list[TriplePattern] = []

    def flush() -> None:
        nonlocal name, patterns
        if patterns:
            queries.append(BgpQuery(tuple(patterns), name or f"Q{len(queries) + 1}"))
        name = ""
        patterns = []

    for line in text.splitlines():
        line = line.strip()
        if not line:
            flush()
        elif line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("name:"):
                name = body[len("name:") :].strip()
        else:
            patterns.append(parse_pattern_line(line))
    flush()
    return queries


def load_queries(path: str) -> list[BgpQuery]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_query_text(fh.read())


def write_queries(queries: Iterable[BgpQuery], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in queries:
            fh.write(f"# name: {q.name}\n")
            for tp in q.patterns:
                fh.write(tp.wire() + "\n")
            fh.write("\n")


def format_solution(mu: SolutionMapping) -> str:
    """One-line rendering: `?v=<term>` pairs sorted by variable name."""
    return " ".join(f"?{name}={term.wire()}" for name, term in mu.bindings)


@dataclass
class RunMetrics:
    """Per-query-execution counters."""

    num_requests: int = 0
    data_recv: int = 0
    wall_time_ms: float = 0.0
    timed_out: bool = False
    result_count: int = 0
    cartesian_steps: int = 0


@dataclass(frozen=True)
class QueryPlan:
    """A left-deep join order plus the page-1 estimates that produced it."""

    order: tuple[int, ...]
    estimates: tuple[CardinalityEstimate, ...]
    empty_pattern: Optional[int] = None
    cartesian_steps: int = 0
    first_pages: dict[int, FragmentPage] = field(default_factory=dict, compare=False)


class _Timeout(Exception):
    pass


class _Session:
    """One query execution: endpoint access, deadline checks, metric counting."""

    def __init__(
        self,
        endpoint: Endpoint,
        metrics: RunMetrics,
        clock: Callable[[], float],
        deadline: Optional[float],
    ):
        self.endpoint = endpoint
        self.metrics = metrics
        self.clock = clock
        self.deadline = deadline

    def fetch(self, req: FragmentRequest) -> FragmentPage:
        if self.deadline is not None and self.clock() >= self.deadline:
            raise _Timeout()
        target = serialize_request(req)
        try:
            status, body = self.endpoint.get(target)
        except TransportError as exc:
            raise TransportError(str(exc), self.metrics) from exc
        if status != 200:
            raise ServerRejectedError(status, body, self.metrics)
        page = parse_page_body(req, body)
        self.metrics.num_requests += 1
        self.metrics.data_recv += len(page.data) + page.metadata_triple_count
        return page

    def fragment_pages(
        self,
        pattern: TriplePattern,
        bindings: MappingSequence = EMPTY_SEQUENCE,
        first_page: Optional[FragmentPage] = None,
    ) -> Iterator[FragmentPage]:
        """All pages of one fragment; an already-fetched page 1 can be reused."""
        if first_page is not None:
            page = first_page
        else:
            page = self.fetch(FragmentRequest(pattern, bindings, 1))
        yield page
        page_no = 2
        while page.has_next:
            page = self.fetch(FragmentRequest(pattern, bindings, page_no))
            yield page
            page_no += 1


def _order_patterns(patterns: tuple[TriplePattern, ...], counts: list[int]) -> tuple[tuple[int, ...], int]:
    """Connected-first ordering by ascending estimate; ties take the lowest index."""
    remaining = set(range(len(patterns)))
    order: list[int] = []
    bound: set[str] = set()
    cartesian = 0
    while remaining:
        if order:
            connected = [i for i in remaining if patterns[i].variables() & bound]
        else:
            connected = []
        pool = connected if connected else sorted(remaining)
        if order and not connected:
            cartesian += 1
        pick = min(pool, key=lambda i: (counts[i], i))
        order.append(pick)
        remaining.remove(pick)
        bound |= patterns[pick].variables()
    return tuple(order), cartesian


def _plan(sess: _Session, query: BgpQuery) -> QueryPlan:
    counts: list[int] = []
    first_pages: dict[int, FragmentPage] = {}
    empty: Optional[int] = None
    for i, tp in enumerate(query.patterns):
        page = sess.fetch(FragmentRequest(tp, EMPTY_SEQUENCE, 1))
        first_pages[i] = page
        counts.append(page.estimate.count)
        if page.estimate.count == 0 and empty is None:
            empty = i
    order, cartesian = _order_patterns(query.patterns, counts)
    return QueryPlan(
        order=order,
        estimates=tuple(CardinalityEstimate(c) for c in counts),
        empty_pattern=empty,
        cartesian_steps=cartesian,
        first_pages=first_pages,
    )


def plan(query: BgpQuery, endpoint: Endpoint, metrics: Optional[RunMetrics] = None) -> QueryPlan:
    """Fetch page 1 of every pattern and fix the join order from the estimates."""
    sess = _Session(endpoint, metrics if metrics is not None else RunMetrics(), time.perf_counter, None)
    return _plan(sess, query)


def _chunks(items: list, size: int) -> Iterator[list]:
    for i in range(0, len(items), size):
        yield items[i : i + size]


def _dedupe(mappings: Iterable[SolutionMapping]) -> list[SolutionMapping]:
    seen: set[SolutionMapping] = set()
    out: list[SolutionMapping] = []
    for m in mappings:
        if m not in seen:
            seen.add(m)
            out.append(m)
    return out


def _finish(
    solutions: list[SolutionMapping],
    query: BgpQuery,
    metrics: RunMetrics,
    clock: Callable[[], float],
    start: float,
) -> tuple[list[SolutionMapping], RunMetrics]:
    qvars = query.variables()
    final = _dedupe(m.project(qvars) for m in solutions)
    metrics.result_count = len(final)
    metrics.wall_time_ms = (clock() - start) * 1000.0
    return final, metrics


def execute_brtpf(
    query: BgpQuery,
    endpoint: Endpoint,
    max_mpr: int,
    *,
    reuse_planning_pages: bool = True,
    timeout_ms: Optional[float] = None,
    clock: Callable[[], float] = time.perf_counter,
) -> tuple[list[SolutionMapping], RunMetrics]:
    """Run the bind-join pipeline, shipping at most max_mpr mappings per request."""
    if max_mpr < 1:
        raise ValueError("max_mpr must be positive")
    metrics = RunMetrics()
    start = clock()
    deadline = start + timeout_ms / 1000.0 if timeout_ms is not None else None
    sess = _Session(endpoint, metrics, clock, deadline)
    try:
        query_plan = _plan(sess, query)
        metrics.cartesian_steps = query_plan.cartesian_steps
        if query_plan.empty_pattern is not None:
            return _finish([], query, metrics, clock, start)

        first_idx = query_plan.order[0]
        first_tp = query.patterns[first_idx]
        reused = query_plan.first_pages.get(first_idx) if reuse_planning_pages else None
        mappings: list[SolutionMapping] = []
        for page in sess.fragment_pages(first_tp, first_page=reused):
            for t in page.data:
                mu = mapping_from_triple(first_tp, t)
                if mu is not None:
                    mappings.append(mu)

        bound = set(first_tp.variables())
        for idx in query_plan.order[1:]:
            tp = query.patterns[idx]
            shared = tp.variables() & bound
            produced: list[SolutionMapping] = []
            for chunk in _chunks(mappings, max_mpr):
                # Project each buffered mapping onto the variables shared with
                # this pattern; the request carries the distinct projections,
                # and fanout joins results back to all original inputs.
                # Ill-typed projections (a literal heading for a subject or
                # predicate slot) can never join and are not shipped.
                omega: list[SolutionMapping] = []
                fanout: dict[SolutionMapping, list[SolutionMapping]] = {}
                for mu in chunk:
                    projected = mu.project(shared)
                    if not applicable(projected, tp):
                        continue
                    if projected not in fanout:
                        fanout[projected] = []
                        omega.append(projected)
                    fanout[projected].append(mu)
                if not omega:
                    continue
                for page in sess.fragment_pages(tp, MappingSequence(tuple(omega))):
                    for t in page.data:
                        mu_t = mapping_from_triple(tp, t)
                        if mu_t is None:
                            continue
                        for projected in omega:
                            if compatible(projected, mu_t):
                                for mu_in in fanout[projected]:
                                    produced.append(merge(mu_in, mu_t))
            mappings = produced
            bound |= tp.variables()
            if not mappings:
                break
        return _finish(mappings, query, metrics, clock, start)
    except _Timeout:
        metrics.timed_out = True
        metrics.wall_time_ms = (clock() - start) * 1000.0
        return [], metrics


def execute_tpf(
    query: BgpQuery,
    endpoint: Endpoint,
    *,
    reuse_planning_pages: bool = True,
    timeout_ms: Optional[float] = None,
    clock: Callable[[], float] = time.perf_counter,
) -> tuple[list[SolutionMapping], RunMetrics]:
    """Run the recursive smallest-estimate-first pipeline over plain TPF requests."""
    metrics = RunMetrics()
    start = clock()
    deadline = start + timeout_ms / 1000.0 if timeout_ms is not None else None
    sess = _Session(endpoint, metrics, clock, deadline)
    solutions: list[SolutionMapping] = []

    def recurse(
        patterns: dict[int, TriplePattern],
        counts: dict[int, int],
        pages: dict[int, FragmentPage],
        acc: SolutionMapping,
    ) -> None:
        if not patterns:
            solutions.append(acc)
            return
        idx = min(patterns, key=lambda i: (counts[i], i))
        tp = patterns[idx]
        reused = pages.get(idx) if reuse_planning_pages else None
        for page in sess.fragment_pages(tp, first_page=reused):
            for t in page.data:
                mu = mapping_from_triple(tp, t)
                if mu is None:
                    continue
                rest: dict[int, TriplePattern] = {}
                rest_counts: dict[int, int] = {}
                rest_pages: dict[int, FragmentPage] = {}
                dead = False
                for j in sorted(patterns):
                    if j == idx:
                        continue
                    if not applicable(mu, patterns[j]):
                        dead = True  # the instantiated pattern could match nothing
                        break
                    instantiated = apply_mapping(mu, patterns[j])
                    refreshed = sess.fetch(FragmentRequest(instantiated, EMPTY_SEQUENCE, 1))
                    rest[j] = instantiated
                    rest_counts[j] = refreshed.estimate.count
                    rest_pages[j] = refreshed
                    if refreshed.estimate.count == 0:
                        dead = True
                        break
                if not dead:
                    recurse(rest, rest_counts, rest_pages, merge(acc, mu))

    try:
        query_plan = _plan(sess, query)
        metrics.cartesian_steps = query_plan.cartesian_steps
        if query_plan.empty_pattern is not None:
            return _finish([], query, metrics, clock, start)
        recurse(
            dict(enumerate(query.patterns)),
            {i: est.count for i, est in enumerate(query_plan.estimates)},
            dict(query_plan.first_pages) if reuse_planning_pages else {},
            EMPTY_MAPPING,
        )
        return _finish(solutions, query, metrics, clock, start)
    except _Timeout:
        metrics.timed_out = True
        metrics.wall_time_ms = (clock() - start) * 1000.0
        return [], metrics
