"""Experiment driver: network-load sweeps, multi-client throughput, cache analysis.

Absolute throughput numbers are window-scaled to queries/hour and are only
meaningful as engine-vs-engine ratios and trends at this scale; the
interesting outputs are the request/transfer sums, the per-query
better/same/worse breakdowns, and the cache-hit curves.
"""

from __future__ import annotations

import csv
import os
import statistics
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional

from .cache import (
    CachingEndpoint,
    Capacity,
    capacity_label,
    parse_capacity,
    replay,
    write_stats_csv,
    write_trace,
)
from .client import (
    BgpQuery,
    Endpoint,
    HttpEndpoint,
    LocalEndpoint,
    RecordingEndpoint,
    RunMetrics,
    execute_brtpf,
    execute_tpf,
    load_queries,
)
from .server import ServerConfig, ServerHandle
from .store import Dataset, load_dataset
from .workload import is_join_heavy

NETWORK_CSV_HEADER = "engine,maxMpR,pageSize,query,numRequests,dataRecv,wallTimeMs,resultCount,timedOut"
THROUGHPUT_CSV_HEADER = (
    "engine,clients,cache,completed,attempted,timeouts,"
    "throughputCompleted,throughputAll,qetMeanMs,qetStdevMs"
)

Clock = Callable[[], float]


@dataclass(frozen=True)
class ExperimentConfig:
    data: str
    queries: str
    engine: str = "both"  # tpf | brtpf | both
    max_mprs: tuple[int, ...] = (5, 10, 15, 20, 25, 30, 35, 40, 45, 50)
    page_sizes: tuple[int, ...] = (100,)
    client_count: int = 4
    timeout_ms: float = 300_000.0
    duration_ms: float = 60_000.0
    query_assignment: str = "round-robin"
    cache_capacities: tuple[Capacity, ...] = (2_500, 5_000, 10_000, 50_000, 100_000, 250_000, 500_000, None)
    seed: int = 0
    transport: str = "local"  # local | http
    subprocess_mode: bool = False
    reuse_planning_pages: bool = True
    uri_limit: int = 8000
    meta_base: int = 3

    def __post_init__(self) -> None:
        if self.engine not in ("tpf", "brtpf", "both"):
            raise ValueError(f"unknown engine: {self.engine}")
        if self.transport not in ("local", "http"):
            raise ValueError(f"unknown transport: {self.transport}")
        if self.query_assignment != "round-robin":
            raise ValueError(f"unknown query assignment: {self.query_assignment}")
        if self.client_count < 1 or not self.max_mprs or not self.page_sizes:
            raise ValueError("client_count, max_mprs, page_sizes must be non-empty/positive")

    @classmethod
    def from_kv(cls, kv: dict[str, str]) -> "ExperimentConfig":
        def ints(raw: str) -> tuple[int, ...]:
            return tuple(int(x) for x in raw.split(",") if x)

        known: dict[str, tuple[str, Callable]] = {
            "data": ("data", str),
            "queries": ("queries", str),
            "engine": ("engine", str),
            "maxMpRs": ("max_mprs", ints),
            "pageSizes": ("page_sizes", ints),
            "clients": ("client_count", int),
            "timeoutMs": ("timeout_ms", float),
            "durationMs": ("duration_ms", float),
            "queryAssignment": ("query_assignment", str),
            "cacheCapacities": ("cache_capacities", lambda raw: tuple(parse_capacity(x) for x in raw.split(",") if x)),
            "seed": ("seed", int),
            "transport": ("transport", str),
            "subprocessMode": ("subprocess_mode", lambda raw: raw.lower() in ("1", "true", "yes")),
            "reusePlanningPages": ("reuse_planning_pages", lambda raw: raw.lower() in ("1", "true", "yes")),
            "uriLimit": ("uri_limit", int),
            "metaBase": ("meta_base", int),
        }
        fields = {}
        for key, value in kv.items():
            if key not in known:
                raise ValueError(f"unknown experiment config key: {key}")
            name, conv = known[key]
            fields[name] = conv(value)
        return cls(**fields)


def _engines(config: ExperimentConfig) -> tuple[str, ...]:
    return ("tpf", "brtpf") if config.engine == "both" else (config.engine,)


def _server_config(config: ExperimentConfig, page_size: int) -> ServerConfig:
    return ServerConfig(
        data=config.data,
        page_size=page_size,
        max_mpr=max(max(config.max_mprs), 1),
        uri_limit=config.uri_limit,
        meta_base=config.meta_base,
    )


class _EndpointLease:
    """A ready endpoint plus the server handle to tear down, if any."""

    def __init__(self, endpoint: Endpoint, handle: Optional[ServerHandle] = None):
        self.endpoint = endpoint
        self.handle = handle

    def close(self) -> None:
        if self.handle is not None:
            self.handle.shutdown()

    def __enter__(self) -> "_EndpointLease":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _lease_endpoint(config: ExperimentConfig, dataset: Dataset, page_size: int) -> _EndpointLease:
    server_cfg = _server_config(config, page_size)
    if config.transport == "http":
        handle = ServerHandle(dataset, server_cfg)
        return _EndpointLease(HttpEndpoint(handle.url), handle)
    return _EndpointLease(LocalEndpoint(dataset, server_cfg))


def execute_query(
    engine: str,
    query: BgpQuery,
    endpoint: Endpoint,
    max_mpr: int,
    *,
    timeout_ms: Optional[float] = None,
    reuse_planning_pages: bool = True,
    clock: Clock = time.perf_counter,
):
    if engine == "tpf":
        return execute_tpf(
            query, endpoint, reuse_planning_pages=reuse_planning_pages, timeout_ms=timeout_ms, clock=clock
        )
    return execute_brtpf(
        query, endpoint, max_mpr, reuse_planning_pages=reuse_planning_pages, timeout_ms=timeout_ms, clock=clock
    )


def _metrics_row(
    engine: str, max_mpr: int, page_size: int, name: str, metrics: RunMetrics
) -> dict[str, object]:
    return {
        "engine": engine,
        "maxMpR": max_mpr,
        "pageSize": page_size,
        "query": name,
        "numRequests": metrics.num_requests,
        "dataRecv": metrics.data_recv,
        "wallTimeMs": metrics.wall_time_ms,
        "resultCount": metrics.result_count,
        "timedOut": metrics.timed_out,
    }


def _subprocess_metrics(
    engine: str, url: str, query: BgpQuery, max_mpr: int, timeout_ms: Optional[float]
) -> RunMetrics:
    """Run one query in a separate OS process via the CLI and read its metrics row."""
    with tempfile.TemporaryDirectory() as tmp:
        query_path = os.path.join(tmp, "query.txt")
        metrics_path = os.path.join(tmp, "metrics.csv")
        with open(query_path, "w", encoding="utf-8") as fh:
            fh.write(f"# name: {query.name}\n")
            for tp in query.patterns:
                fh.write(tp.wire() + "\n")
        cmd = [
            sys.executable, "-m", "brtpf.cli", "query",
            "--engine", engine, "--endpoint", url, "--query", query_path,
            "--max-mpr", str(max_mpr), "--metrics", metrics_path, "--quiet",
        ]
        if timeout_ms is not None:
            cmd += ["--timeout-ms", str(timeout_ms)]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            raise RuntimeError(f"subprocess query run failed: {proc.stderr.strip()}")
        with open(metrics_path, newline="", encoding="utf-8") as fh:
            row = next(csv.DictReader(fh))
        return RunMetrics(
            num_requests=int(row["numRequests"]),
            data_recv=int(row["dataRecv"]),
            wall_time_ms=float(row["wallTimeMs"]),
            timed_out=row["timedOut"] == "true",
            result_count=int(row["resultCount"]),
        )


def run_network_sweep(config: ExperimentConfig, *, clock: Clock = time.perf_counter) -> list[dict]:
    """Single client, fresh engine state per query, full sweep cross product."""
    dataset = load_dataset(config.data)
    queries = load_queries(config.queries)
    rows: list[dict] = []
    for engine in _engines(config):
        settings = [0] if engine == "tpf" else list(config.max_mprs)
        for page_size in config.page_sizes:
            with _lease_endpoint(config, dataset, page_size) as lease:
                for max_mpr in settings:
                    for query in queries:
                        if config.subprocess_mode:
                            if lease.handle is None:
                                raise ValueError("subprocess mode requires transport=http")
                            metrics = _subprocess_metrics(
                                engine, lease.handle.url, query, max(max_mpr, 1), config.timeout_ms
                            )
                        else:
                            _, metrics = execute_query(
                                engine, query, lease.endpoint, max(max_mpr, 1),
                                timeout_ms=config.timeout_ms,
                                reuse_planning_pages=config.reuse_planning_pages,
                                clock=clock,
                            )
                        rows.append(_metrics_row(engine, max_mpr, page_size, query.name, metrics))
    return rows


def write_network_csv(rows: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(NETWORK_CSV_HEADER + "\n")
        for r in rows:
            fh.write(
                f"{r['engine']},{r['maxMpR']},{r['pageSize']},{r['query']},"
                f"{r['numRequests']},{r['dataRecv']},{r['wallTimeMs']:.3f},"
                f"{r['resultCount']},{'true' if r['timedOut'] else 'false'}\n"
            )


def summarize_network(rows: list[dict]) -> list[dict]:
    """Sum numRequests/dataRecv per (engine, maxMpR, pageSize), in first-seen order."""
    sums: dict[tuple, dict] = {}
    for r in rows:
        key = (r["engine"], r["maxMpR"], r["pageSize"])
        agg = sums.setdefault(
            key, {"engine": key[0], "maxMpR": key[1], "pageSize": key[2], "sumNumRequests": 0, "sumDataRecv": 0}
        )
        agg["sumNumRequests"] += r["numRequests"]
        agg["sumDataRecv"] += r["dataRecv"]
    return list(sums.values())


def write_summary_csv(summary: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("engine,maxMpR,pageSize,sumNumRequests,sumDataRecv\n")
        for r in summary:
            fh.write(f"{r['engine']},{r['maxMpR']},{r['pageSize']},{r['sumNumRequests']},{r['sumDataRecv']}\n")


def compare_network(rows: list[dict]) -> list[dict]:
    """Per-query better/same/worse counts of brTPF vs TPF at equal page size."""
    tpf: dict[tuple, dict] = {}
    for r in rows:
        if r["engine"] == "tpf":
            tpf[(r["pageSize"], r["query"])] = r
    out: list[dict] = []
    breakdowns: dict[tuple, dict] = {}
    for r in rows:
        if r["engine"] != "brtpf":
            continue
        base = tpf.get((r["pageSize"], r["query"]))
        if base is None:
            continue
        key = (r["maxMpR"], r["pageSize"])
        agg = breakdowns.setdefault(key, {"maxMpR": key[0], "pageSize": key[1]})
        for metric, column in (("numRequests", "Req"), ("dataRecv", "Data")):
            verdict = "better" if r[metric] < base[metric] else ("same" if r[metric] == base[metric] else "worse")
            agg[verdict + column] = agg.get(verdict + column, 0) + 1
    for agg in breakdowns.values():
        for col in ("betterReq", "sameReq", "worseReq", "betterData", "sameData", "worseData"):
            agg.setdefault(col, 0)
        out.append(agg)
    return out


def write_compare_csv(comparison: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("maxMpR,pageSize,betterReq,sameReq,worseReq,betterData,sameData,worseData\n")
        for r in comparison:
            fh.write(
                f"{r['maxMpR']},{r['pageSize']},{r['betterReq']},{r['sameReq']},{r['worseReq']},"
                f"{r['betterData']},{r['sameData']},{r['worseData']}\n"
            )


@dataclass
class ThroughputReport:
    engine: str
    clients: int
    cache: str
    completed: int
    timeouts: int
    qet_ms: tuple[float, ...]
    window_ms: float

    @property
    def attempted(self) -> int:
        return self.completed + self.timeouts

    def _per_hour(self, count: int) -> float:
        return count * 3_600_000.0 / self.window_ms if self.window_ms > 0 else 0.0

    @property
    def throughput_completed(self) -> float:
        return self._per_hour(self.completed)

    @property
    def throughput_all(self) -> float:
        return self._per_hour(self.attempted)

    @property
    def qet_mean_ms(self) -> float:
        return statistics.fmean(self.qet_ms) if self.qet_ms else 0.0

    @property
    def qet_stdev_ms(self) -> float:
        return statistics.stdev(self.qet_ms) if len(self.qet_ms) > 1 else 0.0


def partition_queries(queries: list[BgpQuery], clients: int) -> list[list[BgpQuery]]:
    """Disjoint round-robin assignment; each client executes its list as a cycle."""
    return [queries[i::clients] for i in range(clients)]


def run_throughput(
    config: ExperimentConfig,
    *,
    use_cache: bool = False,
    cache_capacity: Capacity = None,
) -> list[ThroughputReport]:
    """Each client cycles its query sequence until the window closes.

    A query started inside the window runs to completion (or to its timeout)
    and is counted, so completed + timeouts = attempted holds exactly.
    """
    dataset = load_dataset(config.data)
    queries = load_queries(config.queries)
    reports: list[ThroughputReport] = []
    for engine in _engines(config):
        with _lease_endpoint(config, dataset, config.page_sizes[0]) as lease:
            endpoint: Endpoint = lease.endpoint
            cache_name = "none"
            if use_cache:
                endpoint = CachingEndpoint(endpoint, cache_capacity)
                cache_name = capacity_label(cache_capacity)
            assignments = partition_queries(queries, config.client_count)
            outcomes: list[list[tuple[str, float, bool]]] = [[] for _ in range(config.client_count)]

            def client_loop(index: int) -> None:
                sequence = assignments[index]
                if not sequence:
                    return
                end = time.monotonic() + config.duration_ms / 1000.0
                position = 0
                while time.monotonic() < end:
                    query = sequence[position % len(sequence)]
                    position += 1
                    _, metrics = execute_query(
                        engine, query, endpoint, config.max_mprs[0],
                        timeout_ms=config.timeout_ms,
                        reuse_planning_pages=config.reuse_planning_pages,
                    )
                    outcomes[index].append((query.name, metrics.wall_time_ms, metrics.timed_out))

            threads = [
                threading.Thread(target=client_loop, args=(i,), daemon=True)
                for i in range(config.client_count)
            ]
            start = time.monotonic()
            for th in threads:
                th.start()
            for th in threads:
                th.join()
            window_ms = (time.monotonic() - start) * 1000.0
            flat = [entry for per_client in outcomes for entry in per_client]
            completed = sum(1 for _, _, timed_out in flat if not timed_out)
            timeouts = sum(1 for _, _, timed_out in flat if timed_out)
            reports.append(
                ThroughputReport(
                    engine=engine,
                    clients=config.client_count,
                    cache=cache_name,
                    completed=completed,
                    timeouts=timeouts,
                    qet_ms=tuple(wall for _, wall, timed_out in flat if not timed_out),
                    window_ms=window_ms,
                )
            )
    return reports


def write_throughput_csv(reports: list[ThroughputReport], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(THROUGHPUT_CSV_HEADER + "\n")
        for r in reports:
            fh.write(
                f"{r.engine},{r.clients},{r.cache},{r.completed},{r.attempted},{r.timeouts},"
                f"{r.throughput_completed:.2f},{r.throughput_all:.2f},"
                f"{r.qet_mean_ms:.2f},{r.qet_stdev_ms:.2f}\n"
            )


def record_trace(
    config: ExperimentConfig,
    engine: str,
    max_mpr: int,
    page_size: int,
    *,
    clock: Clock = time.perf_counter,
) -> list[str]:
    """Single-client run of the whole query sequence with request recording."""
    dataset = load_dataset(config.data)
    queries = load_queries(config.queries)
    with _lease_endpoint(config, dataset, page_size) as lease:
        recorder = RecordingEndpoint(lease.endpoint)
        for query in queries:
            execute_query(
                engine, query, recorder, max_mpr,
                timeout_ms=config.timeout_ms,
                reuse_planning_pages=config.reuse_planning_pages,
                clock=clock,
            )
        return recorder.trace


def _with_unlimited(capacities: tuple[Capacity, ...]) -> tuple[Capacity, ...]:
    return capacities if None in capacities else capacities + (None,)


def run_cache_experiment(
    config: ExperimentConfig, out_dir: str, *, clock: Clock = time.perf_counter
) -> dict[str, list[str]]:
    """Trace + replay per engine setting, then throughput with and without a proxy."""
    os.makedirs(out_dir, exist_ok=True)
    written: dict[str, list[str]] = {"traces": [], "cache_csvs": [], "throughput_csvs": []}
    exemplar_mprs = [m for m in (15, 30) if m in config.max_mprs] or [config.max_mprs[0]]
    for engine in _engines(config):
        mprs = [0] if engine == "tpf" else exemplar_mprs
        for max_mpr in mprs:
            for page_size in config.page_sizes:
                trace = record_trace(config, engine, max(max_mpr, 1), page_size, clock=clock)
                tag = f"{engine}_mpr{max_mpr}_ps{page_size}"
                trace_path = os.path.join(out_dir, f"trace_{tag}.txt")
                write_trace(trace, trace_path)
                written["traces"].append(trace_path)
                stats = replay(trace, _with_unlimited(config.cache_capacities))
                csv_path = os.path.join(out_dir, f"cache_{tag}.csv")
                write_stats_csv(stats, csv_path)
                written["cache_csvs"].append(csv_path)
    plain = run_throughput(config)
    cached = run_throughput(config, use_cache=True, cache_capacity=None)
    throughput_path = os.path.join(out_dir, "throughput_cache.csv")
    write_throughput_csv(plain + cached, throughput_path)
    written["throughput_csvs"].append(throughput_path)
    return written


def run_network_bench(config: ExperimentConfig, out_dir: str, *, clock: Clock = time.perf_counter) -> str:
    """Sweep + summary + comparison CSVs; returns the per-query CSV path."""
    os.makedirs(out_dir, exist_ok=True)
    rows = run_network_sweep(config, clock=clock)
    sweep_path = os.path.join(out_dir, "network_sweep.csv")
    write_network_csv(rows, sweep_path)
    write_summary_csv(summarize_network(rows), os.path.join(out_dir, "network_summary.csv"))
    write_compare_csv(compare_network(rows), os.path.join(out_dir, "network_compare.csv"))
    return sweep_path


def run_throughput_bench(config: ExperimentConfig, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    reports = run_throughput(config)
    path = os.path.join(out_dir, "throughput.csv")
    write_throughput_csv(reports, path)
    return path
