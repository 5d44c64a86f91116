import json
import math

import pytest

from joinmilp import (CorrelatedGroup, JoinGraphKind, Predicate, Query, Table,
                      classify_join_graph, generate_random_query,
                      query_from_json, query_to_dict, query_to_json,
                      true_cardinality)
from joinmilp.query_model import applicable_predicates


def simple_query():
    return Query(
        tables=(Table(0, "R", 10), Table(1, "S", 1000), Table(2, "T", 100)),
        predicates=(Predicate(0, (0, 1), 0.1),))


def test_table_validation():
    with pytest.raises(ValueError):
        Table(0, "bad", 0)
    with pytest.raises(ValueError):
        Predicate(0, (0, 1), 0.0)
    with pytest.raises(ValueError):
        Predicate(0, (0, 1), 1.5)


def test_query_dense_ids():
    with pytest.raises(ValueError):
        Query(tables=(Table(1, "a", 10),), predicates=())
    with pytest.raises(ValueError):
        Query(tables=(Table(0, "a", 10), Table(1, "b", 10)),
              predicates=(Predicate(0, (0, 5), 0.5),))


def test_true_cardinality_and_applicability():
    q = simple_query()
    assert true_cardinality(q, {0}) == 10
    assert true_cardinality(q, {0, 1}) == pytest.approx(10 * 1000 * 0.1)
    assert true_cardinality(q, {0, 2}) == pytest.approx(10 * 100)
    assert true_cardinality(q, {0, 1, 2}) == pytest.approx(1e5)
    assert applicable_predicates(q, {0, 1}) == {0}
    assert applicable_predicates(q, {0, 2}) == set()


def test_group_correction_all_or_nothing():
    q = Query(
        tables=(Table(0, "a", 10), Table(1, "b", 10), Table(2, "c", 10)),
        predicates=(Predicate(0, (0, 1), 0.1), Predicate(1, (1, 2), 0.1)),
        groups=(CorrelatedGroup(0, frozenset({0, 1}), 5.0),))
    # only one member applicable: no correction
    assert true_cardinality(q, {0, 1}) == pytest.approx(10.0)
    # both applicable: correction applies once
    assert true_cardinality(q, {0, 1, 2}) == pytest.approx(1000 * 0.01 * 5.0)


def test_joint_selectivity_must_stay_probability():
    with pytest.raises(ValueError):
        Query(
            tables=(Table(0, "a", 10), Table(1, "b", 10)),
            predicates=(Predicate(0, (0, 1), 0.9), Predicate(1, (0, 1), 0.9)),
            groups=(CorrelatedGroup(0, frozenset({0, 1}), 5.0),))


def test_generator_deterministic_and_shapes():
    for kind, edges in (("chain", {(0, 1), (1, 2), (2, 3)}),
                        ("star", {(0, 1), (0, 2), (0, 3)}),
                        ("cycle", {(0, 1), (1, 2), (2, 3), (0, 3)})):
        q1 = generate_random_query(4, kind, seed=7)
        q2 = generate_random_query(4, kind, seed=7)
        assert query_to_dict(q1) == query_to_dict(q2)
        got = {tuple(sorted(p.refs)) for p in q1.predicates}
        assert got == edges
        assert classify_join_graph(q1) == kind


def test_generator_ranges():
    q = generate_random_query(6, JoinGraphKind.STAR, seed=3,
                              card_range=(5, 50), sel_range=(0.2, 0.9))
    assert all(5 <= t.cardinality <= 50 for t in q.tables)
    assert all(0.2 <= p.selectivity <= 0.9 for p in q.predicates)


def test_json_round_trip():
    q = generate_random_query(5, "cycle", seed=11)
    back = query_from_json(query_to_json(q))
    assert query_to_dict(back) == query_to_dict(q)
    doc = json.loads(query_to_json(q))
    assert len(doc["tables"]) == 5
    assert all("refs" in p for p in doc["predicates"])


def test_total_cardinality():
    q = simple_query()
    assert q.total_cardinality() == pytest.approx(10 * 1000 * 100)
    assert math.log10(q.total_cardinality()) == pytest.approx(6.0)
