"""Fragment identity, paging, and the page wire format.

A fragment is identified by its request: a triple pattern, an optional
sequence of solution mappings (empty means a plain TPF request), and a
1-based page number.  `serialize_request` produces the canonical GET
target, which doubles as the cache key; it is injective, and
`parse_request` is its exact inverse.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional
from urllib.parse import parse_qs, quote, unquote, urlsplit

from .store import CardinalityEstimate, Dataset
from .terms import (
    EMPTY_SEQUENCE,
    MappingSequence,
    SolutionMapping,
    Term,
    Triple,
    TriplePattern,
    WireFormatError,
    parse_term,
    parse_triple_line,
)

FRAGMENT_PATH = "/fragment"

# Hypermedia control descriptor telling clients how to form requests.
REQUEST_TEMPLATE = "/fragment{?s,p,o,page,bindings}"

# Non-data triples serialized with every page: one for the cardinality
# estimate, one for the request template control, one for the page's
# self-description.  Next/prev links add one each.
META_BASE_TRIPLES = 3


class RequestParseError(ValueError):
    """A GET target does not parse as a canonical fragment request."""


@dataclass(frozen=True)
class FragmentRequest:
    pattern: TriplePattern
    bindings: MappingSequence = EMPTY_SEQUENCE
    page: int = 1

    def __post_init__(self) -> None:
        if self.page < 1:
            raise ValueError("page numbers are 1-based")

    def with_page(self, page: int) -> "FragmentRequest":
        return FragmentRequest(self.pattern, self.bindings, page)

    @property
    def is_bound(self) -> bool:
        return bool(self.bindings)


@dataclass(frozen=True)
class ControlSet:
    template: str = REQUEST_TEMPLATE
    next_page: Optional[str] = None
    prev_page: Optional[str] = None


@dataclass(frozen=True)
class FragmentPage:
    request: FragmentRequest
    data: tuple[Triple, ...]
    estimate: CardinalityEstimate
    has_next: bool
    controls: ControlSet
    metadata_triple_count: int


def _enc(s: str) -> str:
    return quote(s, safe="")


def _encode_bindings(bindings: MappingSequence) -> str:
    # Pair components are percent-encoded individually so the `;` `,` `=`
    # separators can never collide with characters inside a term.
    mappings = []
    for mu in bindings:
        mappings.append(",".join(f"{_enc(name)}={_enc(term.wire())}" for name, term in mu.bindings))
    return ";".join(mappings)


def _decode_bindings(encoded: str) -> MappingSequence:
    mappings = []
    for chunk in encoded.split(";"):
        pairs: dict[str, Term] = {}
        if chunk:
            for pair in chunk.split(","):
                name_enc, sep, term_enc = pair.partition("=")
                if not sep or not name_enc:
                    raise RequestParseError(f"malformed binding pair: {pair!r}")
                name = unquote(name_enc)
                term = parse_term(unquote(term_enc))
                if name in pairs:
                    raise RequestParseError(f"duplicate variable in binding: ?{name}")
                if term.is_variable:
                    raise RequestParseError(f"binding value may not be a variable: {term.wire()}")
                pairs[name] = term
        mappings.append(SolutionMapping(tuple(sorted(pairs.items()))))
    try:
        return MappingSequence(tuple(mappings))
    except ValueError as exc:
        raise RequestParseError(str(exc)) from exc


def serialize_request(req: FragmentRequest) -> str:
    """Canonical GET target for a fragment request (also the cache key)."""
    parts = [
        f"s={_enc(req.pattern.subject.wire())}",
        f"p={_enc(req.pattern.predicate.wire())}",
        f"o={_enc(req.pattern.object.wire())}",
        f"page={req.page}",
    ]
    if req.bindings:
        parts.append(f"bindings={_enc(_encode_bindings(req.bindings))}")
    return FRAGMENT_PATH + "?" + "&".join(parts)


def parse_request(target: str) -> FragmentRequest:
    """Inverse of serialize_request; also accepts a missing page (meaning 1)."""
    split = urlsplit(target)
    if split.path != FRAGMENT_PATH:
        raise RequestParseError(f"not a fragment target: {target!r}")
    try:
        params = parse_qs(split.query, keep_blank_values=True, strict_parsing=True)
    except ValueError as exc:
        raise RequestParseError(f"bad query string: {split.query!r}") from exc
    unknown = set(params) - {"s", "p", "o", "page", "bindings"}
    if unknown:
        raise RequestParseError(f"unknown parameters: {sorted(unknown)}")
    for key in ("s", "p", "o"):
        if key not in params:
            raise RequestParseError(f"missing parameter: {key}")
    if any(len(v) != 1 for v in params.values()):
        raise RequestParseError("repeated parameter")
    try:
        pattern = TriplePattern(
            parse_term(params["s"][0]), parse_term(params["p"][0]), parse_term(params["o"][0])
        )
    except (WireFormatError, ValueError) as exc:
        raise RequestParseError(str(exc)) from exc
    page = 1
    if "page" in params:
        raw = params["page"][0]
        if not raw.isdigit() or int(raw) < 1:
            raise RequestParseError(f"bad page number: {raw!r}")
        page = int(raw)
    bindings = EMPTY_SEQUENCE
    if "bindings" in params:
        bindings = _decode_bindings(params["bindings"][0])
    return FragmentRequest(pattern, bindings, page)


def paginate(all_data: list[Triple], page_size: int, page: int) -> tuple[list[Triple], bool]:
    """Slice `all_data` into its 1-based page; out-of-range pages are empty."""
    if page_size < 1:
        raise ValueError("page_size must be positive")
    if page < 1:
        raise ValueError("page must be positive")
    start = (page - 1) * page_size
    return all_data[start : start + page_size], page * page_size < len(all_data)


def build_page(ds: Dataset, req: FragmentRequest, page_size: int, meta_base: int = META_BASE_TRIPLES) -> FragmentPage:
    """Evaluate the request's selector against ds and slice out one page."""
    full = ds.select_bound(req.pattern, req.bindings)
    data, has_next = paginate(full, page_size, req.page)
    next_uri = serialize_request(req.with_page(req.page + 1)) if has_next else None
    prev_uri = serialize_request(req.with_page(req.page - 1)) if req.page > 1 else None
    meta = meta_base + (1 if next_uri else 0) + (1 if prev_uri else 0)
    return FragmentPage(
        request=req,
        data=tuple(data),
        estimate=CardinalityEstimate(len(full)),
        has_next=has_next,
        controls=ControlSet(next_page=next_uri, prev_page=prev_uri),
        metadata_triple_count=meta,
    )


def serialize_page_body(page: FragmentPage) -> str:
    """Bit-exact line-oriented response body for a fragment page."""
    lines = [f"count={page.estimate.count}", f"hasNext={'true' if page.has_next else 'false'}"]
    if page.controls.next_page is not None:
        lines.append(f"next={page.controls.next_page}")
    if page.controls.prev_page is not None:
        lines.append(f"prev={page.controls.prev_page}")
    lines.append(f"meta={page.metadata_triple_count}")
    lines.append("")
    lines.extend(t.wire() for t in page.data)
    return "".join(line + "\n" for line in lines)


class PageParseError(ValueError):
    """A response body does not follow the page wire format."""


def parse_page_body(req: FragmentRequest, body: str) -> FragmentPage:
    """Parse a response body back into a FragmentPage for the given request."""
    lines = body.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    else:
        raise PageParseError("body must end with a newline")

    def take(prefix: str, optional: bool = False) -> Optional[str]:
        if lines and lines[0].startswith(prefix):
            return lines.pop(0)[len(prefix) :]
        if optional:
            return None
        raise PageParseError(f"expected line starting with {prefix!r}")

    count_raw = take("count=")
    has_next_raw = take("hasNext=")
    next_uri = take("next=", optional=True)
    prev_uri = take("prev=", optional=True)
    meta_raw = take("meta=")
    if not lines or lines.pop(0) != "":
        raise PageParseError("expected blank separator line")
    if not count_raw.isdigit() or not meta_raw.isdigit() or has_next_raw not in ("true", "false"):
        raise PageParseError("malformed metadata block")
    try:
        data = tuple(parse_triple_line(line) for line in lines)
    except WireFormatError as exc:
        raise PageParseError(str(exc)) from exc
    return FragmentPage(
        request=req,
        data=data,
        estimate=CardinalityEstimate(int(count_raw)),
        has_next=has_next_raw == "true",
        controls=ControlSet(next_page=next_uri, prev_page=prev_uri),
        metadata_triple_count=int(meta_raw),
    )
