"""RDF terms, triples, triple patterns, and solution mappings.

Everything here is an immutable value type.  Literals carry only a lexical
form (no datatype or language tag); equality is plain string equality on
(kind, lexical).  The canonical wire form defined in this module (`<iri>`,
`"literal"`, `?var`, `_:blank`) is the bit-exact serialization used for
cache keys, request URIs, and data files.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional

IRI = "iri"
LITERAL = "literal"
BLANK = "blank"
VARIABLE = "var"

_KINDS = (IRI, LITERAL, BLANK, VARIABLE)


class WireFormatError(ValueError):
    """A string does not parse as a canonical-wire-form term, triple, or pattern."""


class BindingError(ValueError):
    """A substitution would produce an ill-typed pattern (e.g. literal subject)."""


class IncompatibleMappingsError(ValueError):
    """merge() was called on mappings that disagree on a shared variable."""


def _has_whitespace(s: str) -> bool:
    return any(c.isspace() for c in s)


@dataclass(frozen=True)
class Term:
    kind: str
    lexical: str

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown term kind: {self.kind!r}")
        if not self.lexical:
            raise ValueError("empty lexical form")
        if self.kind == IRI:
            if ":" not in self.lexical:
                raise ValueError(f"IRI is not absolute (missing scheme): {self.lexical!r}")
            if _has_whitespace(self.lexical) or any(c in self.lexical for c in '<>"'):
                raise ValueError(f"IRI contains forbidden characters: {self.lexical!r}")
        elif self.kind in (VARIABLE, BLANK) and _has_whitespace(self.lexical):
            raise ValueError(f"{self.kind} name contains whitespace: {self.lexical!r}")

    @property
    def is_variable(self) -> bool:
        return self.kind == VARIABLE

    def wire(self) -> str:
        """Canonical wire form of this term."""
        if self.kind == IRI:
            return f"<{self.lexical}>"
        if self.kind == LITERAL:
            return '"' + _escape_literal(self.lexical) + '"'
        if self.kind == VARIABLE:
            return f"?{self.lexical}"
        return f"_:{self.lexical}"

    def __repr__(self) -> str:
        return f"Term({self.wire()})"


def iri(value: str) -> Term:
    return Term(IRI, value)


def literal(value: str) -> Term:
    return Term(LITERAL, value)


def variable(name: str) -> Term:
    return Term(VARIABLE, name)


def blank(label: str) -> Term:
    return Term(BLANK, label)


_LITERAL_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_LITERAL_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}


def _escape_literal(s: str) -> str:
    return "".join(_LITERAL_ESCAPES.get(c, c) for c in s)


def _unescape_literal(s: str) -> str:
    out = []
    i = 0
    while i < len(s):
        c = s[i]
        if c == "\\":
            if i + 1 >= len(s) or s[i + 1] not in _LITERAL_UNESCAPES:
                raise WireFormatError(f"bad escape sequence in literal: {s!r}")
            out.append(_LITERAL_UNESCAPES[s[i + 1]])
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def parse_term(token: str) -> Term:
    """Parse one term from its canonical wire form."""
    if not token:
        raise WireFormatError("empty term token")
    try:
        if token[0] == "<":
            if not token.endswith(">") or len(token) < 3:
                raise WireFormatError(f"unterminated IRI: {token!r}")
            return iri(token[1:-1])
        if token[0] == '"':
            i = 1
            while i < len(token):
                if token[i] == "\\":
                    i += 2
                elif token[i] == '"':
                    break
                else:
                    i += 1
            if i != len(token) - 1:
                raise WireFormatError(f"unterminated literal: {token!r}")
            return literal(_unescape_literal(token[1:-1]))
        if token[0] == "?":
            return variable(token[1:])
        if token.startswith("_:"):
            return blank(token[2:])
    except ValueError as exc:
        if isinstance(exc, WireFormatError):
            raise
        raise WireFormatError(str(exc)) from exc
    raise WireFormatError(f"unrecognized term: {token!r}")


def _tokenize(line: str) -> list[str]:
    tokens = []
    i = 0
    n = len(line)
    while i < n:
        c = line[i]
        if c.isspace():
            i += 1
            continue
        if c == "<":
            end = line.find(">", i)
            if end < 0:
                raise WireFormatError(f"unterminated IRI in line: {line!r}")
            tokens.append(line[i : end + 1])
            i = end + 1
        elif c == '"':
            j = i + 1
            while j < n:
                if line[j] == "\\":
                    j += 2
                elif line[j] == '"':
                    break
                else:
                    j += 1
            if j >= n:
                raise WireFormatError(f"unterminated literal in line: {line!r}")
            tokens.append(line[i : j + 1])
            i = j + 1
        else:
            j = i
            while j < n and not line[j].isspace():
                j += 1
            tokens.append(line[i:j])
            i = j
    return tokens


@dataclass(frozen=True)
class Triple:
    """A ground RDF statement: no position holds a variable."""

    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self) -> None:
        if self.subject.kind not in (IRI, BLANK):
            raise ValueError(f"triple subject must be an IRI or blank node: {self.subject!r}")
        if self.predicate.kind != IRI:
            raise ValueError(f"triple predicate must be an IRI: {self.predicate!r}")
        if self.object.kind not in (IRI, LITERAL, BLANK):
            raise ValueError(f"triple object must be ground: {self.object!r}")

    @property
    def has_blank(self) -> bool:
        return self.subject.kind == BLANK or self.object.kind == BLANK

    def wire_key(self) -> tuple[str, str, str]:
        # memoized: triples are immutable and this is the hot sort/index key
        key = self.__dict__.get("_wire_key")
        if key is None:
            key = (self.subject.wire(), self.predicate.wire(), self.object.wire())
            self.__dict__["_wire_key"] = key
        return key

    def wire(self) -> str:
        """One-triple-per-line data file form, ` .`-terminated."""
        return f"{self.subject.wire()} {self.predicate.wire()} {self.object.wire()} ."

    def __repr__(self) -> str:
        return f"Triple({self.wire()})"


@dataclass(frozen=True)
class TriplePattern:
    """A statement with variables allowed in any position (predicate: never a literal)."""

    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self) -> None:
        if self.predicate.kind == LITERAL:
            raise ValueError("pattern predicate may not be a literal")
        if self.predicate.kind == BLANK:
            raise ValueError("pattern predicate may not be a blank node")

    def positions(self) -> tuple[Term, Term, Term]:
        return (self.subject, self.predicate, self.object)

    def variables(self) -> frozenset[str]:
        return frozenset(t.lexical for t in self.positions() if t.is_variable)

    def is_ground(self) -> bool:
        return not any(t.is_variable for t in self.positions())

    def wire(self) -> str:
        """Space-separated wire form, without the data file's ` .` terminator."""
        return f"{self.subject.wire()} {self.predicate.wire()} {self.object.wire()}"

    def __repr__(self) -> str:
        return f"TriplePattern({self.wire()})"


def parse_triple_line(line: str) -> Triple:
    """Parse one ` .`-terminated data line into a ground triple."""
    tokens = _tokenize(line)
    if len(tokens) != 4 or tokens[3] != ".":
        raise WireFormatError(f"expected `s p o .`: {line!r}")
    terms = [parse_term(t) for t in tokens[:3]]
    if any(t.is_variable for t in terms):
        raise WireFormatError(f"variable in data triple: {line!r}")
    try:
        return Triple(*terms)
    except ValueError as exc:
        raise WireFormatError(str(exc)) from exc


def parse_pattern_line(line: str) -> TriplePattern:
    """Parse a triple pattern line; a trailing ` .` is tolerated."""
    tokens = _tokenize(line)
    if len(tokens) == 4 and tokens[3] == ".":
        tokens = tokens[:3]
    if len(tokens) != 3:
        raise WireFormatError(f"expected three terms: {line!r}")
    try:
        return TriplePattern(*(parse_term(t) for t in tokens))
    except ValueError as exc:
        if isinstance(exc, WireFormatError):
            raise
        raise WireFormatError(str(exc)) from exc


@dataclass(frozen=True)
class SolutionMapping:
    """A partial binding of variable names to ground terms.

    Stored as a name-sorted tuple of pairs, so equality and hashing coincide
    with set-equality of the (variable, term) pairs.
    """

    bindings: tuple[tuple[str, Term], ...] = ()

    def __post_init__(self) -> None:
        names = [n for n, _ in self.bindings]
        if names != sorted(names):
            raise ValueError("bindings must be sorted by variable name")
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable in mapping")
        for _, term in self.bindings:
            if term.is_variable:
                raise ValueError("mapping values must be ground terms")

    @classmethod
    def of(cls, pairs: Mapping[str, Term] | Iterable[tuple[str, Term]] = (), **kw: Term) -> "SolutionMapping":
        merged = dict(pairs)
        merged.update(kw)
        return cls(tuple(sorted(merged.items())))

    def get(self, name: str) -> Optional[Term]:
        for n, t in self.bindings:
            if n == name:
                return t
        return None

    @property
    def domain(self) -> frozenset[str]:
        return frozenset(n for n, _ in self.bindings)

    def as_dict(self) -> dict[str, Term]:
        return dict(self.bindings)

    def project(self, names: frozenset[str] | set[str]) -> "SolutionMapping":
        return SolutionMapping(tuple(p for p in self.bindings if p[0] in names))

    def __len__(self) -> int:
        return len(self.bindings)

    def __repr__(self) -> str:
        inner = ", ".join(f"?{n}={t.wire()}" for n, t in self.bindings)
        return "{" + inner + "}"


EMPTY_MAPPING = SolutionMapping()


@dataclass(frozen=True)
class MappingSequence:
    """An ordered, duplicate-free sequence of solution mappings.

    The order is significant: it drives the server's deterministic page order
    for bindings-restricted requests.
    """

    mappings: tuple[SolutionMapping, ...] = ()

    def __post_init__(self) -> None:
        if len(set(self.mappings)) != len(self.mappings):
            raise ValueError("mapping sequence contains duplicates")

    def __len__(self) -> int:
        return len(self.mappings)

    def __iter__(self) -> Iterator[SolutionMapping]:
        return iter(self.mappings)

    def __bool__(self) -> bool:
        return bool(self.mappings)


EMPTY_SEQUENCE = MappingSequence()


def compatible(a: SolutionMapping, b: SolutionMapping) -> bool:
    """True iff a and b agree on every shared variable."""
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    for name, term in small.bindings:
        other = large.get(name)
        if other is not None and other != term:
            return False
    return True


def merge(a: SolutionMapping, b: SolutionMapping) -> SolutionMapping:
    """Union of two compatible mappings."""
    out = dict(a.bindings)
    for name, term in b.bindings:
        seen = out.get(name)
        if seen is not None and seen != term:
            raise IncompatibleMappingsError(f"?{name} bound to both {seen.wire()} and {term.wire()}")
        out[name] = term
    return SolutionMapping(tuple(sorted(out.items())))


def apply_mapping(mu: SolutionMapping, tp: TriplePattern) -> TriplePattern:
    """Substitute bound variables of tp; unbound variables remain in place."""

    def subst(term: Term) -> Term:
        if term.is_variable:
            bound = mu.get(term.lexical)
            if bound is not None:
                return bound
        return term

    subject, predicate, object_ = (subst(t) for t in tp.positions())
    if subject.kind == LITERAL:
        raise BindingError(f"binding puts a literal in subject position: {subject.wire()}")
    if predicate.kind in (LITERAL, BLANK):
        raise BindingError(f"binding puts a {predicate.kind} in predicate position: {predicate.wire()}")
    return TriplePattern(subject, predicate, object_)


def applicable(mu: SolutionMapping, tp: TriplePattern) -> bool:
    """True iff apply_mapping(mu, tp) produces a well-typed pattern.

    A mapping that fails this cannot contribute to any join over tp: no RDF
    triple carries a literal subject or a non-IRI predicate.
    """
    for position, term in enumerate(tp.positions()):
        if not term.is_variable:
            continue
        bound = mu.get(term.lexical)
        if bound is None:
            continue
        if position == 0 and bound.kind == LITERAL:
            return False
        if position == 1 and bound.kind in (LITERAL, BLANK):
            return False
    return True


def mapping_from_triple(tp: TriplePattern, t: Triple) -> Optional[SolutionMapping]:
    """The unique mapping mu with dom(mu) = vars(tp) and apply(mu, tp) = t, or None."""
    out: dict[str, Term] = {}
    for pat, val in zip(tp.positions(), (t.subject, t.predicate, t.object)):
        if pat.is_variable:
            seen = out.get(pat.lexical)
            if seen is not None and seen != val:
                return None
            out[pat.lexical] = val
        elif pat != val:
            return None
    return SolutionMapping(tuple(sorted(out.items())))


def matches(t: Triple, tp: TriplePattern) -> bool:
    """True iff t is a matching triple for tp (repeated variables must agree)."""
    return mapping_from_triple(tp, t) is not None
