"""HTTP service for the combined TPF/brTPF interface.

Requests without a bindings parameter are plain TPF requests; requests
with one are bindings-restricted.  The response body is the line-oriented
page format from the fragment module, so identical request strings always
produce byte-identical bodies (the dataset is immutable and page building
is pure).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import urlsplit

from .fragment import FRAGMENT_PATH, RequestParseError, build_page, parse_request, serialize_page_body
from .store import Dataset, load_dataset
from .terms import BindingError

HEALTH_PATH = "/health"

DEFAULT_PAGE_SIZE = 100
DEFAULT_MAX_MPR = 30
DEFAULT_URI_LIMIT = 8000


@dataclass(frozen=True)
class ServerConfig:
    data: str | None = None
    page_size: int = DEFAULT_PAGE_SIZE
    max_mpr: int = DEFAULT_MAX_MPR
    uri_limit: int = DEFAULT_URI_LIMIT
    host: str = "127.0.0.1"
    port: int = 0
    meta_base: int = 3

    def __post_init__(self) -> None:
        if self.page_size < 1 or self.max_mpr < 1 or self.uri_limit < 1:
            raise ValueError("pageSize, maxMpR, and uriLimit must be positive")

    @classmethod
    def from_kv(cls, kv: dict[str, str]) -> "ServerConfig":
        known = {
            "data": ("data", str),
            "pageSize": ("page_size", int),
            "maxMpR": ("max_mpr", int),
            "uriLimit": ("uri_limit", int),
            "host": ("host", str),
            "port": ("port", int),
            "metaBase": ("meta_base", int),
        }
        fields = {}
        for key, value in kv.items():
            if key not in known:
                raise ValueError(f"unknown server config key: {key}")
            name, conv = known[key]
            fields[name] = conv(value)
        return cls(**fields)


def read_kv(path: str) -> dict[str, str]:
    """Read a `key=value` file; blank lines and `#` comments are skipped."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{line_no}: expected key=value")
            out[key.strip()] = value.strip()
    return out


def answer(dataset: Dataset, config: ServerConfig, target: str) -> tuple[int, str]:
    """Pure request handler shared by the HTTP server and in-process endpoints."""
    if len(target.encode("utf-8")) > config.uri_limit:
        return 414, "error=uri-too-long\n"
    path = urlsplit(target).path
    if path == HEALTH_PATH:
        return 200, f"triples={len(dataset)}\n"
    if path != FRAGMENT_PATH:
        return 404, "error=not-found\n"
    try:
        req = parse_request(target)
    except RequestParseError:
        return 400, "error=malformed-query\n"
    if len(req.bindings) > config.max_mpr:
        return 400, "error=maxMpR-exceeded\n"
    try:
        page = build_page(dataset, req, config.page_size, config.meta_base)
    except BindingError:
        return 400, "error=ill-typed-bindings\n"
    return 200, serialize_page_body(page)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "brtpf-server/0.1"

    def do_GET(self) -> None:  # noqa: N802 (http.server API)
        status, body = answer(self.server.dataset, self.server.config, self.path)
        payload = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "text/plain; charset=utf-8")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args) -> None:
        pass


class _HttpServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, dataset: Dataset, config: ServerConfig):
        super().__init__(address, _Handler)
        self.dataset = dataset
        self.config = config


class ServerHandle:
    """A running fragment server; shut down explicitly or use as a context manager."""

    def __init__(self, dataset: Dataset, config: ServerConfig):
        self.dataset = dataset
        self._http = _HttpServer((config.host, config.port), dataset, config)
        self.config = replace(config, port=self._http.server_address[1])
        self._thread = threading.Thread(target=self._http.serve_forever, daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        return f"http://{self.config.host}:{self.config.port}"

    def shutdown(self) -> None:
        self._http.shutdown()
        self._http.server_close()
        self._thread.join(timeout=10)

    def join(self) -> None:
        self._thread.join()

    def __enter__(self) -> "ServerHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()


def serve(config: ServerConfig) -> ServerHandle:
    """Load the dataset and start serving; load or bind failures raise immediately."""
    if not config.data:
        raise ValueError("server config needs a dataset path")
    dataset = load_dataset(config.data)
    return ServerHandle(dataset, config)
