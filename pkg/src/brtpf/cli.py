"""Command-line front end: serve, query, bench, cache-sim, gen-data.

Exit codes: 0 success, 1 usage error, 2 runtime/transport error,
3 correctness-check failure (oracle mismatch under --verify).
Human-readable output goes to stdout, CSVs only to files, diagnostics
to stderr.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Optional

from . import harness, workload
from .cache import parse_capacity, read_trace, replay, write_stats_csv
from .client import HttpEndpoint, format_solution, load_queries
from .harness import ExperimentConfig, execute_query
from .server import ServerConfig, read_kv, serve
from .store import load_dataset


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="brtpf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the TPF/brTPF server over a dataset file")
    p_serve.add_argument("--data", help="dataset file (one triple per line)")
    p_serve.add_argument("--page-size", type=int, default=None)
    p_serve.add_argument("--max-mpr", type=int, default=None)
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--uri-limit", type=int, default=None)
    p_serve.add_argument("--host", default=None)
    p_serve.add_argument("--config", help="key=value config file (flags override it)")
    p_serve.set_defaults(func=_cmd_serve)

    p_query = sub.add_parser("query", help="execute BGP queries against a fragment endpoint")
    p_query.add_argument("--engine", choices=("tpf", "brtpf"), required=True)
    p_query.add_argument("--endpoint", required=True, help="server base URL")
    p_query.add_argument("--query", required=True, help="query file")
    p_query.add_argument("--max-mpr", type=int, default=30)
    p_query.add_argument("--metrics", help="write per-query metrics CSV here")
    p_query.add_argument("--timeout-ms", type=float, default=None)
    p_query.add_argument("--verify", metavar="DATA", help="check solutions against the oracle over this dataset file")
    p_query.add_argument("--quiet", action="store_true", help="suppress solution output")
    p_query.set_defaults(func=_cmd_query)

    p_bench = sub.add_parser("bench", help="run an experiment family")
    p_bench.add_argument("family", choices=("network", "throughput", "cache"))
    p_bench.add_argument("--config", required=True, help="key=value experiment config file")
    p_bench.add_argument("--out", required=True, help="output directory for CSVs")
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.set_defaults(func=_cmd_bench)

    p_sim = sub.add_parser("cache-sim", help="replay a recorded request trace against LRU caches")
    p_sim.add_argument("--trace", required=True, help="trace file, one request string per line")
    p_sim.add_argument("--capacities", default="unlimited", help="comma list, e.g. 100,1000,unlimited")
    p_sim.add_argument("--out", required=True, help="output CSV path")
    p_sim.set_defaults(func=_cmd_cache_sim)

    p_gen = sub.add_parser("gen-data", help="generate a synthetic dataset and query workload")
    p_gen.add_argument("--size", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_gen_data)

    return parser


def _cmd_serve(args) -> int:
    kv = read_kv(args.config) if args.config else {}
    config = ServerConfig.from_kv(kv)
    overrides = {
        "data": args.data,
        "page_size": args.page_size,
        "max_mpr": args.max_mpr,
        "port": args.port,
        "uri_limit": args.uri_limit,
        "host": args.host,
    }
    config = replace(config, **{k: v for k, v in overrides.items() if v is not None})
    handle = serve(config)
    print(f"serving {len(handle.dataset)} triples at {handle.url}/fragment (pageSize={handle.config.page_size}, maxMpR={handle.config.max_mpr})")
    try:
        handle.join()
    except KeyboardInterrupt:
        handle.shutdown()
    return 0


def _cmd_query(args) -> int:
    queries = load_queries(args.query)
    endpoint = HttpEndpoint(args.endpoint)
    oracle_dataset = load_dataset(args.verify) if args.verify else None
    rows = []
    mismatch = False
    for query in queries:
        solutions, metrics = execute_query(
            args.engine, query, endpoint, args.max_mpr, timeout_ms=args.timeout_ms
        )
        if not args.quiet:
            for mu in solutions:
                print(format_solution(mu))
            print(
                f"# {query.name}: requests={metrics.num_requests} dataRecv={metrics.data_recv} "
                f"wallTimeMs={metrics.wall_time_ms:.3f} results={metrics.result_count} "
                f"timedOut={'true' if metrics.timed_out else 'false'}"
            )
        rows.append((query.name, metrics))
        if oracle_dataset is not None:
            expected = workload.oracle_bgp(oracle_dataset, query)
            if sorted(solutions, key=repr) != sorted(expected, key=repr):
                print(f"verify: {query.name} diverges from the oracle "
                      f"({len(solutions)} vs {len(expected)} solutions)", file=sys.stderr)
                mismatch = True
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8") as fh:
            fh.write("query,numRequests,dataRecv,wallTimeMs,resultCount,timedOut\n")
            for name, m in rows:
                fh.write(
                    f"{name},{m.num_requests},{m.data_recv},{m.wall_time_ms:.3f},"
                    f"{m.result_count},{'true' if m.timed_out else 'false'}\n"
                )
    return 3 if mismatch else 0


def _cmd_bench(args) -> int:
    config = ExperimentConfig.from_kv(read_kv(args.config))
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.family == "network":
        path = harness.run_network_bench(config, args.out)
    elif args.family == "throughput":
        path = harness.run_throughput_bench(config, args.out)
    else:
        written = harness.run_cache_experiment(config, args.out)
        path = ", ".join(written["cache_csvs"] + written["throughput_csvs"])
    print(f"bench {args.family}: wrote {path}")
    return 0


def _cmd_cache_sim(args) -> int:
    trace = read_trace(args.trace)
    capacities = tuple(parse_capacity(c) for c in args.capacities.split(",") if c)
    write_stats_csv(replay(trace, capacities), args.out)
    print(f"cache-sim: replayed {len(trace)} requests into {args.out}")
    return 0


def _cmd_gen_data(args) -> int:
    data_path, query_path = workload.gen_data(args.seed, args.size, args.out)
    print(f"gen-data: wrote {data_path} and {query_path}")
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # runtime/transport failures map to exit code 2
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
