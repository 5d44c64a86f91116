"""Query representation and random benchmark query generation.

A query is a set of tables with known cardinalities plus predicates with
selectivities. Cardinality of a joined table set is the product of table
cardinalities and the selectivities of every predicate whose referenced
tables are all present. Correlated predicate groups contribute a correction
factor once all their members apply.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from enum import Enum


class JoinGraphKind(Enum):
    CHAIN = "chain"
    STAR = "star"
    CYCLE = "cycle"


@dataclass(frozen=True)
class Table:
    id: int
    name: str
    cardinality: float

    def __post_init__(self):
        if self.cardinality < 1:
            raise ValueError(f"table {self.name}: cardinality must be >= 1")


@dataclass(frozen=True)
class Predicate:
    """A predicate over one or more tables.

    refs is the ordered tuple of referenced table ids. Binary predicates
    (two refs) are the common case; unary and n-ary refs are supported by
    the formulation extensions. columns optionally names the columns the
    predicate reads (used by the projection extension).
    """

    id: int
    refs: tuple[int, ...]
    selectivity: float
    eval_cost_per_tuple: float = 0.0
    columns: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.refs:
            raise ValueError(f"predicate {self.id}: refs must be non-empty")
        if len(set(self.refs)) != len(self.refs):
            raise ValueError(f"predicate {self.id}: duplicate table refs")
        if not (0.0 < self.selectivity <= 1.0):
            raise ValueError(f"predicate {self.id}: selectivity must be in (0, 1]")
        if self.eval_cost_per_tuple < 0:
            raise ValueError(f"predicate {self.id}: eval cost must be >= 0")


@dataclass(frozen=True)
class CorrelatedGroup:
    """Correction factor applied once all member predicates are applicable.

    correction_selectivity times the product of member selectivities gives
    the intended joint selectivity; the correction itself may exceed 1.
    """

    id: int
    members: frozenset[int]
    correction_selectivity: float

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError(f"group {self.id}: needs at least 2 member predicates")
        if self.correction_selectivity <= 0:
            raise ValueError(f"group {self.id}: correction must be > 0")


@dataclass(frozen=True)
class Column:
    id: int
    table: int
    byte_size: int
    name: str = ""

    def __post_init__(self):
        if self.byte_size <= 0:
            raise ValueError(f"column {self.id}: byte size must be > 0")


@dataclass(frozen=True)
class Query:
    tables: tuple[Table, ...]
    predicates: tuple[Predicate, ...] = ()
    groups: tuple[CorrelatedGroup, ...] = ()
    columns: tuple[Column, ...] = ()
    output_columns: frozenset[int] = frozenset()

    def __post_init__(self):
        if len(self.tables) < 1:
            raise ValueError("query needs at least one table")
        for i, t in enumerate(self.tables):
            if t.id != i:
                raise ValueError(f"table ids must be dense 0..n-1, got {t.id} at {i}")
        n = len(self.tables)
        for i, p in enumerate(self.predicates):
            if p.id != i:
                raise ValueError("predicate ids must be dense")
            for r in p.refs:
                if not (0 <= r < n):
                    raise ValueError(f"predicate {p.id}: unknown table id {r}")
        pred_ids = set(range(len(self.predicates)))
        for i, g in enumerate(self.groups):
            if g.id != i:
                raise ValueError("group ids must be dense")
            if not g.members <= pred_ids:
                raise ValueError(f"group {g.id}: unknown member predicate")
            joint = g.correction_selectivity * math.prod(
                self.predicates[p].selectivity for p in g.members)
            if joint > 1.0 + 1e-9:
                raise ValueError(f"group {g.id}: joint selectivity {joint} exceeds 1")
        for i, c in enumerate(self.columns):
            if c.id != i:
                raise ValueError("column ids must be dense")
            if not (0 <= c.table < n):
                raise ValueError(f"column {c.id}: unknown table id {c.table}")
        col_ids = set(range(len(self.columns)))
        if not self.output_columns <= col_ids:
            raise ValueError("output columns must reference existing columns")
        for p in self.predicates:
            if not set(p.columns) <= col_ids:
                raise ValueError(f"predicate {p.id}: unknown column reference")

    @property
    def n(self) -> int:
        return len(self.tables)

    def total_cardinality(self) -> float:
        """Product of all table cardinalities (upper bound on any join size)."""
        return math.prod(t.cardinality for t in self.tables)


def applicable_predicates(query: Query, tables: set[int]) -> set[int]:
    """Predicates whose referenced tables are all contained in `tables`."""
    _check_table_set(query, tables, allow_empty=True)
    return {p.id for p in query.predicates if set(p.refs) <= tables}


def true_cardinality(query: Query, tables: set[int]) -> float:
    """Exact cardinality estimate of the join over `tables`.

    Product of table cardinalities, selectivities of applicable predicates,
    and correction factors of groups whose members are all applicable.
    """
    _check_table_set(query, tables, allow_empty=False)
    card = math.prod(query.tables[t].cardinality for t in tables)
    applicable = applicable_predicates(query, tables)
    for pid in applicable:
        card *= query.predicates[pid].selectivity
    for g in query.groups:
        if g.members <= applicable:
            card *= g.correction_selectivity
    return card


def _check_table_set(query, tables, allow_empty):
    if not tables and not allow_empty:
        raise ValueError("table set must be non-empty")
    for t in tables:
        if not (0 <= t < query.n):
            raise ValueError(f"unknown table id {t}")


def _topology(n: int, kind: JoinGraphKind) -> list[tuple[int, int]]:
    if kind is JoinGraphKind.CHAIN:
        return [(i, i + 1) for i in range(n - 1)]
    if kind is JoinGraphKind.STAR:
        return [(0, i) for i in range(1, n)]
    if kind is JoinGraphKind.CYCLE:
        return [(i, i + 1) for i in range(n - 1)] + [(n - 1, 0)]
    raise ValueError(f"unknown join graph kind {kind!r}")


def generate_random_query(n: int, kind: JoinGraphKind, seed: int,
                          card_range: tuple[float, float] = (10.0, 1e5),
                          sel_range: tuple[float, float] = (1e-3, 1.0)) -> Query:
    """Random query with the given join graph shape.

    Cardinalities and selectivities are drawn log-uniformly from the given
    ranges; the draw is fully determined by the seed.
    """
    if isinstance(kind, str):
        kind = JoinGraphKind(kind)
    if n < 2:
        raise ValueError("need at least 2 tables")
    clo, chi = card_range
    if not (1 <= clo <= chi):
        raise ValueError(f"invalid cardinality range [{clo}, {chi}]")
    slo, shi = sel_range
    if not (0 < slo <= shi <= 1):
        raise ValueError(f"invalid selectivity range [{slo}, {shi}]")

    rng = random.Random(seed)

    def log_uniform(lo, hi):
        if lo == hi:
            return lo
        return math.exp(rng.uniform(math.log(lo), math.log(hi)))

    tables = tuple(Table(i, f"t{i}", log_uniform(clo, chi)) for i in range(n))
    edges = _topology(n, kind)
    predicates = tuple(
        Predicate(i, (a, b), log_uniform(slo, shi)) for i, (a, b) in enumerate(edges))
    return Query(tables=tables, predicates=predicates)


def classify_join_graph(query: Query) -> str:
    """Best-effort classification of the predicate topology."""
    n = query.n
    edges = sorted(tuple(sorted(p.refs)) for p in query.predicates
                   if len(p.refs) == 2)
    for kind in (JoinGraphKind.CHAIN, JoinGraphKind.STAR, JoinGraphKind.CYCLE):
        if n >= 2 and edges == sorted(tuple(sorted(e)) for e in _topology(n, kind)):
            return kind.value
    return "other"


# ---------------------------------------------------------------------------
# JSON serialization


def query_to_dict(query: Query) -> dict:
    doc = {
        "tables": [{"name": t.name, "cardinality": t.cardinality}
                   for t in query.tables],
        "predicates": [],
        "groups": [{"members": sorted(g.members),
                    "correctionSelectivity": g.correction_selectivity}
                   for g in query.groups],
        "columns": [{"table": c.table, "byteSize": c.byte_size, "name": c.name}
                    for c in query.columns],
        "outputColumns": sorted(query.output_columns),
    }
    for p in query.predicates:
        entry = {"refs": list(p.refs), "selectivity": p.selectivity,
                 "evalCost": p.eval_cost_per_tuple}
        if p.columns:
            entry["columns"] = list(p.columns)
        doc["predicates"].append(entry)
    return doc


def query_from_dict(doc: dict) -> Query:
    tables = tuple(Table(i, t["name"], float(t["cardinality"]))
                   for i, t in enumerate(doc["tables"]))
    predicates = tuple(
        Predicate(i, tuple(p["refs"]), float(p["selectivity"]),
                  float(p.get("evalCost", 0.0)),
                  tuple(p.get("columns", ())))
        for i, p in enumerate(doc.get("predicates", ())))
    groups = tuple(
        CorrelatedGroup(i, frozenset(g["members"]),
                        float(g["correctionSelectivity"]))
        for i, g in enumerate(doc.get("groups", ())))
    columns = tuple(
        Column(i, int(c["table"]), int(c["byteSize"]), c.get("name", ""))
        for i, c in enumerate(doc.get("columns", ())))
    return Query(tables=tables, predicates=predicates, groups=groups,
                 columns=columns,
                 output_columns=frozenset(doc.get("outputColumns", ())))


def query_to_json(query: Query) -> str:
    return json.dumps(query_to_dict(query), indent=2)


def query_from_json(text: str) -> Query:
    return query_from_dict(json.loads(text))
