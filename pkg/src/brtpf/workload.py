"""Synthetic workload generation and the brute-force BGP oracle.

The generator emits a seeded dataset mixing star, path, and snowflake
structure with controllable join selectivity, plus a fixed family of
1-to-5-pattern queries over it.  A sizable share of the queries reuses
the same class-membership pattern verbatim, so request overlap across
query executions is realistic.  The oracle is an exhaustive nested-loop
join used to check both query engines; it is deliberately independent of
the store's indexes and the fragment machinery.
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass

from .client import BgpQuery, write_queries
from .store import Dataset, write_dataset
from .terms import (
    EMPTY_MAPPING,
    SolutionMapping,
    Triple,
    TriplePattern,
    compatible,
    iri,
    literal,
    mapping_from_triple,
    merge,
    variable,
)

ORACLE_GUARD_PAIRS = 100_000


class OracleGuardError(RuntimeError):
    """The dataset/query combination is too large for the nested-loop oracle."""


def oracle_bgp(ds: Dataset, query: BgpQuery) -> list[SolutionMapping]:
    """Exhaustive nested-loop BGP evaluation; duplicate-free, canonically sorted."""
    if len(ds) * len(query.patterns) > ORACLE_GUARD_PAIRS:
        raise OracleGuardError(
            f"{len(ds)} triples x {len(query.patterns)} patterns exceeds the "
            f"{ORACLE_GUARD_PAIRS}-pair oracle guard"
        )
    partial = [EMPTY_MAPPING]
    for tp in query.patterns:
        extended = []
        for t in ds.triples:
            mu_t = mapping_from_triple(tp, t)
            if mu_t is None:
                continue
            for mu in partial:
                if compatible(mu, mu_t):
                    extended.append(merge(mu, mu_t))
        partial = extended
    qvars = query.variables()
    unique = {mu.project(qvars) for mu in partial}
    return sorted(unique, key=lambda m: tuple((n, t.wire()) for n, t in m.bindings))


def _e(i: int):
    return iri(f"urn:ex:e{i}")


def _c(k: int):
    return iri(f"urn:ex:c{k}")


def _p(k: int):
    return iri(f"urn:ex:p{k}")


_TYPE = iri("urn:ex:type")
_NEXT = iri("urn:ex:next")
_LABEL = iri("urn:ex:label")

N_CLASSES = 5
N_LINK_PREDICATES = 3


@dataclass(frozen=True)
class WorkloadShape:
    """Fanout knobs for the generator."""

    entity_fraction: float = 0.22  # entities per triple of target size
    chain_fraction: float = 0.75  # chain edges per entity
    star_out_degree: int = 2  # link edges per entity
    target_pool_divisor: int = 8  # link targets drawn from the first E/divisor entities


def generate_triples(seed: int, size: int, shape: WorkloadShape = WorkloadShape()) -> list[Triple]:
    """Exactly `size` distinct triples: typing + chain + star links + label filler."""
    if size < 10:
        raise ValueError("workload size must be at least 10")
    rng = random.Random(seed)
    n_entities = max(10, int(size * shape.entity_fraction))
    n_chain = min(int(n_entities * shape.chain_fraction), n_entities - 1)
    pool = max(1, n_entities // shape.target_pool_divisor)

    triples: list[Triple] = []
    seen: set[Triple] = set()

    def add(t: Triple) -> None:
        if t not in seen and len(triples) < size:
            seen.add(t)
            triples.append(t)

    for i in range(n_entities):
        add(Triple(_e(i), _TYPE, _c(i % N_CLASSES)))
    for i in range(n_chain):
        add(Triple(_e(i), _NEXT, _e(i + 1)))
    for i in range(n_entities):
        for _ in range(shape.star_out_degree):
            k = rng.randrange(N_LINK_PREDICATES)
            target = rng.randrange(pool)
            add(Triple(_e(i), _p(k), _e(target)))
    j = 0
    while len(triples) < size:
        add(Triple(_e(j % n_entities), _LABEL, literal(f"L{j}")))
        j += 1
    return triples


def generate_queries(seed: int, size: int, shape: WorkloadShape = WorkloadShape()) -> list[BgpQuery]:
    """The fixed query family; anchored entities are drawn from the link-target pool."""
    rng = random.Random(seed + 1)
    n_entities = max(10, int(size * shape.entity_fraction))
    pool = max(1, n_entities // shape.target_pool_divisor)
    hub = _e(rng.randrange(pool))
    hub2 = _e(rng.randrange(pool))
    s, o, o2, lbl = variable("s"), variable("o"), variable("o2"), variable("l")
    a, b, c, d = variable("a"), variable("b"), variable("c"), variable("d")
    t, t2, u = variable("t"), variable("t2"), variable("u")

    def q(name: str, *patterns: tuple) -> BgpQuery:
        return BgpQuery(tuple(TriplePattern(*p) for p in patterns), name)

    shared_type = (s, _TYPE, _c(0))
    return [
        # singles
        q("Q01", shared_type),
        q("Q02", (s, _p(0), o)),
        q("Q03", (hub, _p(0), o)),
        q("Q04", (s, _LABEL, literal("L5"))),
        # stars around one subject
        q("Q05", shared_type, (s, _p(0), o)),
        q("Q06", shared_type, (s, _p(1), o)),
        q("Q07", shared_type, (s, _p(0), o), (s, _p(1), o2)),
        q("Q08", (s, _TYPE, _c(1)), (s, _p(2), o)),
        q("Q09", shared_type, (s, _LABEL, lbl)),
        q("Q10", (s, _TYPE, _c(2)), (s, _p(0), o), (s, _LABEL, lbl)),
        # paths along the chain
        q("Q11", (a, _NEXT, b), (b, _NEXT, c)),
        q("Q12", (a, _NEXT, b), (b, _NEXT, c), (c, _NEXT, d)),
        q("Q13", (a, _NEXT, b), (a, _TYPE, _c(0))),
        q("Q14", (a, _NEXT, b), (b, _TYPE, _c(1))),
        # entity-to-entity joins and snowflakes
        q("Q15", (s, _p(0), t), (t, _TYPE, _c(0))),
        q("Q16", shared_type, (s, _p(0), t), (t, _TYPE, _c(1))),
        q("Q17", shared_type, (s, _p(0), t), (t, _p(1), u)),
        q("Q18", shared_type, (s, _p(0), t), (t, _p(1), u), (u, _TYPE, _c(2))),
        q("Q19", shared_type, (s, _p(0), t), (s, _p(1), t2), (t, _TYPE, _c(1)), (t2, _TYPE, _c(2))),
        q("Q20", (s, _TYPE, _c(3)), (s, _p(2), t), (t, _LABEL, lbl)),
        # selective and empty
        q("Q21", shared_type, (s, _p(0), iri("urn:ex:absent"))),
        q("Q22", (hub2, _p(0), t), (t, _p(1), u)),
        q("Q23", (a, _NEXT, b), (b, _NEXT, c), (c, _TYPE, _c(4))),
        q("Q24", (s, _LABEL, literal("L7")), (s, _p(0), t)),
        q("Q25", (s, _TYPE, _c(1)), (s, _p(1), t), (t, _NEXT, u)),
        q("Q26", (a, _p(1), t), (t, _NEXT, u)),
    ]


def is_join_heavy(query: BgpQuery) -> bool:
    return len(query.patterns) >= 2


def gen_data(seed: int, size: int, out_dir: str, shape: WorkloadShape = WorkloadShape()) -> tuple[str, str]:
    """Write `data.txt` and `queries.txt` under out_dir; returns both paths."""
    os.makedirs(out_dir, exist_ok=True)
    data_path = os.path.join(out_dir, "data.txt")
    query_path = os.path.join(out_dir, "queries.txt")
    write_dataset(generate_triples(seed, size, shape), data_path)
    write_queries(generate_queries(seed, size, shape), query_path)
    return data_path, query_path
