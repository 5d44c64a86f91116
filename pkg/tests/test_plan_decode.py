import itertools
import json

import pytest

from joinmilp import (CostModel, Extensions, FormulationConfig, JoinGraphKind,
                      LeftDeepPlan, Predicate, Query, SolverConfig, Table,
                      ThresholdLadder, approximation_report, compile_query,
                      decode, encode, generate_random_query, solve, validate)
from joinmilp.milp_core import Solution


def three_table_query():
    # a cheap middle table makes (b, a, c) the unique best order
    return Query(
        tables=(Table(0, "r", 1000.0), Table(1, "s", 2.0), Table(2, "t", 500.0)),
        predicates=(Predicate(0, (0, 1), 0.01), Predicate(1, (1, 2), 0.01)),
    )


def compiled(q, **cfg_kwargs):
    ladder = ThresholdLadder.geometric(3.0, q.total_cardinality())
    return compile_query(q, FormulationConfig(ladder=ladder, **cfg_kwargs))


def test_decode_recovers_optimal_order():
    q = three_table_query()
    milp = compiled(q)
    report = solve(milp.problem, SolverConfig(time_limit=30))
    assert report.status == "optimal"
    plan = decode(milp, report.solution())
    # s joins first with either neighbor; both ends beat starting large
    assert plan.order[0] in (0, 1, 2)
    assert len(plan.order) == 3
    assert validate(q, plan) == []
    rep = approximation_report(milp, report.solution())
    assert rep["ratio"] >= 1.0 - 1e-9
    assert rep["true_cost"] >= report.objective - 1e-6


def test_encode_decode_round_trip():
    q = generate_random_query(5, JoinGraphKind.STAR, seed=9,
                              card_range=(2, 30), sel_range=(0.3, 1.0))
    milp = compiled(q)
    for order in itertools.islice(itertools.permutations(range(5)), 0, 120, 17):
        plan = LeftDeepPlan(order=order)
        values = encode(milp, plan)
        obj = milp.problem.objective.evaluate(values)
        back = decode(milp, Solution(values, obj, "optimal"))
        assert back.order == order


def test_decode_rejects_fractional_points():
    q = three_table_query()
    milp = compiled(q)
    values = encode(milp, LeftDeepPlan(order=(1, 0, 2)))
    values[milp.registry[("tio", 1, 0)]] = 0.5
    with pytest.raises(ValueError):
        decode(milp, Solution(values, 0.0, "feasible"))


def test_encode_decode_with_expensive_predicates():
    q = Query(
        tables=(Table(0, "a", 100.0), Table(1, "b", 50.0), Table(2, "c", 20.0)),
        predicates=(Predicate(0, (0, 1), 0.1),
                    Predicate(1, (0,), 0.5, eval_cost_per_tuple=4.0)),
    )
    milp = compiled(q, extensions=Extensions(expensive_predicates=True))
    plan = LeftDeepPlan(order=(0, 1, 2), evaluated_at={0: 0, 1: 1})
    values = encode(milp, plan)
    assert milp.problem.check_solution(values) == []
    obj = milp.problem.objective.evaluate(values)
    back = decode(milp, Solution(values, obj, "optimal"))
    assert back.order == (0, 1, 2)
    assert back.evaluated_at == {0: 0, 1: 1}


def test_validate_flags_bad_plans():
    q = three_table_query()
    assert validate(q, LeftDeepPlan(order=(0, 1, 1)))
    assert validate(q, LeftDeepPlan(order=(0, 2, 1), evaluated_at={99: 0}))
    # predicate 1 references s and t; after join 0 of (r, s) it cannot run
    assert validate(q, LeftDeepPlan(order=(0, 1, 2), evaluated_at={1: 0}))
    assert validate(q, LeftDeepPlan(order=(0, 1, 2), evaluated_at={1: 1})) == []


def test_plan_serialization():
    q = three_table_query()
    plan = LeftDeepPlan(order=(1, 0, 2),
                        operators=(CostModel.HASH_JOIN, CostModel.BNL),
                        evaluated_at={0: 0})
    doc = json.loads(plan.to_json(q))
    assert doc["order"] == ["s", "r", "t"]
    assert doc["operators"] == ["hash", "bnl"]
    assert doc["evaluatedAt"] == {"0": 0}
