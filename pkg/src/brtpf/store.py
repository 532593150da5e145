"""Indexed in-memory triple store.

A Dataset is immutable after load and keeps three sorted orderings (SPO,
POS, OSP) for prefix lookup.  `select()` answers a plain triple pattern in
canonical (subject, predicate, object) wire-string order; `select_bound()`
additionally restricts the result to triples that can join with a sequence
of solution mappings, using the instantiate-dedupe-concatenate procedure
whose output order is the server's page order.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Iterable, TextIO

from .terms import (
    EMPTY_SEQUENCE,
    MappingSequence,
    Triple,
    TriplePattern,
    WireFormatError,
    apply_mapping,
    matches,
    parse_triple_line,
)


class LoadError(ValueError):
    """A dataset source line failed to parse or violated load-time invariants."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class CardinalityEstimate:
    """Exact-by-construction cardinality metadata (error bound epsilon = 0)."""

    count: int
    epsilon: int = 0

    def __post_init__(self) -> None:
        if self.count < 0 or self.epsilon < 0:
            raise ValueError("cardinality fields must be non-negative")


class Dataset:
    """A deduplicated, blank-node-free set of triples with prefix indexes."""

    def __init__(self, triples: Iterable[Triple]):
        unique = {t.wire_key(): t for t in triples}
        for t in unique.values():
            if t.has_blank:
                raise ValueError(f"blank node in dataset triple: {t.wire()}")
        self.triples: tuple[Triple, ...] = tuple(unique[k] for k in sorted(unique))
        self._spo = [t.wire_key() + (t,) for t in self.triples]
        self._pos = sorted(((p, o, s, t) for (s, p, o, t) in self._spo), key=lambda r: r[:3])
        self._osp = sorted(((o, s, p, t) for (s, p, o, t) in self._spo), key=lambda r: r[:3])

    def __len__(self) -> int:
        return len(self.triples)

    def _scan(self, index: list, prefix: tuple[str, ...]) -> list[Triple]:
        lo = bisect.bisect_left(index, prefix)
        out = []
        for row in index[lo:]:
            if row[: len(prefix)] != prefix:
                break
            out.append(row[3])
        return out

    def _candidates(self, tp: TriplePattern) -> tuple[list[Triple], bool]:
        """Matching candidates plus whether they already arrive in canonical order.

        Every prefix scan except the predicate-only one happens to enumerate
        in ascending (s, p, o) order, so only that case needs a re-sort.
        """
        s = tp.subject.wire() if not tp.subject.is_variable else None
        p = tp.predicate.wire() if not tp.predicate.is_variable else None
        o = tp.object.wire() if not tp.object.is_variable else None
        if s is not None:
            if p is None and o is not None:
                return self._scan(self._osp, (o, s)), True
            prefix = (s,) if p is None else ((s, p) if o is None else (s, p, o))
            return self._scan(self._spo, prefix), True
        if p is not None:
            if o is None:
                return self._scan(self._pos, (p,)), False
            return self._scan(self._pos, (p, o)), True
        if o is not None:
            return self._scan(self._osp, (o,)), True
        return list(self.triples), True

    def select(self, tp: TriplePattern) -> list[Triple]:
        """All triples matching tp, ascending by canonical (s, p, o) order."""
        candidates, ordered = self._candidates(tp)
        out = [t for t in candidates if matches(t, tp)]
        if not ordered:
            out.sort(key=Triple.wire_key)
        return out

    def select_bound(self, tp: TriplePattern, bindings: MappingSequence = EMPTY_SEQUENCE) -> list[Triple]:
        """Triples matching tp that join with at least one mapping in `bindings`.

        An empty sequence degrades to a plain `select`.  Otherwise each
        mapping is applied to tp in sequence order, duplicate instantiated
        patterns are dropped, each surviving pattern is evaluated, and the
        result streams are concatenated with duplicate triples removed
        keeping the first occurrence.  That concatenation order is the
        deterministic page order.
        """
        if not bindings:
            return self.select(tp)
        instantiated: list[TriplePattern] = []
        seen_patterns = set()
        for mu in bindings:
            candidate = apply_mapping(mu, tp)
            if candidate not in seen_patterns:
                seen_patterns.add(candidate)
                instantiated.append(candidate)
        out: list[Triple] = []
        seen_triples: set[tuple[str, str, str]] = set()
        for pattern in instantiated:
            for t in self.select(pattern):
                key = t.wire_key()
                if key not in seen_triples:
                    seen_triples.add(key)
                    out.append(t)
        return out

    def count(self, tp: TriplePattern) -> CardinalityEstimate:
        return CardinalityEstimate(len(self.select(tp)))

    def count_bound(self, tp: TriplePattern, bindings: MappingSequence = EMPTY_SEQUENCE) -> CardinalityEstimate:
        return CardinalityEstimate(len(self.select_bound(tp, bindings)))


def read_triples(lines: Iterable[str]) -> Iterable[Triple]:
    """Parse a line-oriented triple stream; `#` starts a comment line."""
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            triple = parse_triple_line(line)
        except WireFormatError as exc:
            raise LoadError(line_no, str(exc)) from exc
        if triple.has_blank:
            raise LoadError(line_no, f"blank node not allowed in dataset: {line}")
        yield triple


def load_dataset(source: str | TextIO) -> Dataset:
    """Load a dataset from a path or an open text stream (duplicates collapse)."""
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            return Dataset(read_triples(fh))
    return Dataset(read_triples(source))


def write_dataset(triples: Iterable[Triple], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(t.wire() + "\n")
