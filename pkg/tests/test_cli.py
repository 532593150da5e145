import os

import pytest

from brtpf.cli import main
from brtpf.client import write_queries, BgpQuery
from brtpf.store import load_dataset, write_dataset
from brtpf.terms import Triple, TriplePattern, iri, variable
from brtpf.workload import gen_data


@pytest.fixture(scope="module")
def workload_dir(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("cliwork"))
    gen_data(4, 200, out)
    return out


@pytest.fixture(scope="module")
def served(workload_dir):
    from brtpf.server import ServerConfig, serve

    handle = serve(ServerConfig(data=os.path.join(workload_dir, "data.txt"), page_size=20, max_mpr=50))
    yield handle
    handle.shutdown()


def test_gen_data_command(tmp_path, capsys):
    out = str(tmp_path / "gen")
    assert main(["gen-data", "--size", "150", "--seed", "7", "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "data.txt"))
    assert os.path.exists(os.path.join(out, "queries.txt"))
    assert len(load_dataset(os.path.join(out, "data.txt"))) == 150
    assert "gen-data: wrote" in capsys.readouterr().out


def test_usage_errors_exit_1():
    assert main([]) == 1
    assert main(["query", "--engine", "tpf"]) == 1  # missing required flags
    assert main(["bench", "nonsense", "--config", "x", "--out", "y"]) == 1


def test_serve_missing_file_exits_2(tmp_path, capsys):
    assert main(["serve", "--data", str(tmp_path / "absent.txt")]) == 2
    assert "error:" in capsys.readouterr().err


def test_query_end_to_end(served, workload_dir, tmp_path, capsys):
    metrics_path = str(tmp_path / "metrics.csv")
    code = main(
        [
            "query",
            "--engine", "brtpf",
            "--endpoint", served.url,
            "--query", os.path.join(workload_dir, "queries.txt"),
            "--max-mpr", "10",
            "--metrics", metrics_path,
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "# Q01: requests=" in out
    assert "?s=<urn:ex:e0>" in out  # at least one solution line
    lines = open(metrics_path).read().splitlines()
    assert lines[0] == "query,numRequests,dataRecv,wallTimeMs,resultCount,timedOut"
    assert len(lines) == 1 + 26


def test_query_zero_result_exits_0(served, tmp_path, capsys):
    query_path = str(tmp_path / "none.txt")
    write_queries(
        [BgpQuery((TriplePattern(variable("s"), iri("urn:nothing"), variable("o")),), "Z")],
        query_path,
    )
    metrics_path = str(tmp_path / "m.csv")
    assert main(
        ["query", "--engine", "tpf", "--endpoint", served.url, "--query", query_path, "--metrics", metrics_path]
    ) == 0
    out = capsys.readouterr().out
    assert out.startswith("# Z: requests=1 ")  # no solution lines before the metrics line
    assert len(open(metrics_path).read().splitlines()) == 2


def test_query_verify_against_oracle(served, workload_dir, tmp_path, capsys):
    args = [
        "query",
        "--engine", "brtpf",
        "--endpoint", served.url,
        "--query", os.path.join(workload_dir, "queries.txt"),
        "--quiet",
    ]
    assert main(args + ["--verify", os.path.join(workload_dir, "data.txt")]) == 0
    # verifying against a *different* dataset must flag a mismatch
    other = str(tmp_path / "other.txt")
    write_dataset([Triple(iri("urn:ex:e0"), iri("urn:ex:type"), iri("urn:ex:c1"))], other)
    assert main(args + ["--verify", other]) == 3
    assert "diverges from the oracle" in capsys.readouterr().err


def test_query_unreachable_endpoint_exits_2(workload_dir, capsys):
    code = main(
        [
            "query",
            "--engine", "tpf",
            "--endpoint", "http://127.0.0.1:9",  # discard port, nothing listens
            "--query", os.path.join(workload_dir, "queries.txt"),
        ]
    )
    assert code == 2
    assert "error:" in capsys.readouterr().err


def _bench_config(workload_dir, tmp_path, **extra):
    lines = {
        "data": os.path.join(workload_dir, "data.txt"),
        "queries": os.path.join(workload_dir, "queries.txt"),
        "maxMpRs": "5,30",
        "pageSizes": "20",
        "clients": "2",
        "durationMs": "200",
        "cacheCapacities": "10,unlimited",
    }
    lines.update(extra)
    path = str(tmp_path / "bench.cfg")
    with open(path, "w") as fh:
        fh.write("# experiment configuration\n")
        for k, v in lines.items():
            fh.write(f"{k}={v}\n")
    return path

def test_bench_network_command(workload_dir, tmp_path, capsys):
    cfg = _bench_config(workload_dir, tmp_path)
    out = str(tmp_path / "out")
    assert main(["bench", "network", "--config", cfg, "--out", out, "--seed", "1"]) == 0
    assert os.path.exists(os.path.join(out, "network_sweep.csv"))
    assert "bench network: wrote" in capsys.readouterr().out


def test_bench_throughput_command(workload_dir, tmp_path):
    cfg = _bench_config(workload_dir, tmp_path)
    out = str(tmp_path / "out")
    assert main(["bench", "throughput", "--config", cfg, "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "throughput.csv"))


def test_bench_cache_command(workload_dir, tmp_path):
    cfg = _bench_config(workload_dir, tmp_path)
    out = str(tmp_path / "out")
    assert main(["bench", "cache", "--config", cfg, "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "throughput_cache.csv"))
    assert any(name.startswith("cache_") for name in os.listdir(out))


def test_cache_sim_command(tmp_path):
    trace = str(tmp_path / "trace.txt")
    with open(trace, "w") as fh:
        fh.write("/fragment?a\n/fragment?a\n/fragment?b\n")
    out = str(tmp_path / "stats.csv")
    assert main(["cache-sim", "--trace", trace, "--capacities", "1,unlimited", "--out", out]) == 0
    lines = open(out).read().splitlines()
    assert lines[0] == "capacity,hits,misses,hitRate"
    assert len(lines) == 3


def test_bench_bad_config_exits_2(tmp_path):
    cfg = str(tmp_path / "bad.cfg")
    with open(cfg, "w") as fh:
        fh.write("data=/nonexistent\nqueries=/nonexistent\n")
    assert main(["bench", "network", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
