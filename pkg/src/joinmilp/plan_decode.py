"""Reading left-deep plans out of MILP solutions, and back.

decode() recovers the join order from the table-selection binaries, plus
operators, deferred predicate evaluations, and retained columns when the
corresponding variable families exist. encode() is the inverse used to
evaluate candidate plans against a formulation without solving it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .formulation import JOIN_IMPLEMENTATIONS, CostModel, JoinOrderMilp
from .query_model import Query


@dataclass(frozen=True)
class LeftDeepPlan:
    """A left-deep join order over table ids, with optional per-join
    operator choices, deferred predicate evaluation joins, and per-join
    retained output columns."""

    order: tuple[int, ...]
    operators: tuple[CostModel, ...] | None = None
    evaluated_at: dict[int, int] | None = None
    retained_columns: tuple[frozenset[int], ...] | None = None

    def __post_init__(self):
        if len(self.order) < 2:
            raise ValueError("a plan joins at least 2 tables")
        if self.operators is not None and len(self.operators) != len(self.order) - 1:
            raise ValueError("need one operator per join")

    def to_dict(self, query: Query | None = None) -> dict:
        names = ([query.tables[t].name for t in self.order]
                 if query else list(self.order))
        d = {"order": names}
        if self.operators is not None:
            d["operators"] = [op.value for op in self.operators]
        if self.evaluated_at is not None:
            d["evaluatedAt"] = {str(k): v for k, v in self.evaluated_at.items()}
        return d

    def to_json(self, query: Query | None = None) -> str:
        return json.dumps(self.to_dict(query), indent=2)


def _binary_value(values, vid, context: str) -> int:
    v = values[vid]
    if abs(v - round(v)) > 1e-4 or round(v) not in (0, 1):
        raise ValueError(f"non-integral binary in {context}: {v}")
    return int(round(v))


def decode(milp: JoinOrderMilp, solution) -> LeftDeepPlan:
    """Recover the plan from a feasible solution's variable values."""
    values = solution.values if hasattr(solution, "values") else solution
    if values is None:
        raise ValueError("solution carries no variable assignment")
    reg = milp.registry
    n = milp.n
    # sanity-check integrality of the table-selection binaries
    for j in milp.joins:
        for t in range(n):
            for fam in ("tio", "tii"):
                v = values[reg[(fam, t, j)]]
                if min(abs(v), abs(v - 1.0)) > 1e-4:
                    raise ValueError(
                        f"fractional {fam} value {v} at table {t}, join {j}")
    first = [t for t in range(n)
             if _binary_value(values, reg[("tio", t, 0)], "tio") == 1]
    if len(first) != 1:
        raise ValueError("exactly one table must open the plan")
    order = list(first)
    for j in milp.joins:
        inner = [t for t in range(n)
                 if _binary_value(values, reg[("tii", t, j)], "tii") == 1]
        if len(inner) != 1:
            raise ValueError(f"join {j} must have a single inner table")
        order.append(inner[0])
    if sorted(order) != list(range(n)):
        raise ValueError("decoded order is not a permutation")

    operators = None
    if any(k[0] == "jos" for k, _ in reg.items()):
        operators = []
        for j in milp.joins:
            chosen = [impl for impl in JOIN_IMPLEMENTATIONS
                      if ("jos", impl.value, j) in reg
                      and _binary_value(values, reg[("jos", impl.value, j)],
                                        "jos") == 1]
            if len(chosen) != 1:
                raise ValueError(f"join {j} must select one operator")
            operators.append(chosen[0])
        operators = tuple(operators)

    evaluated_at = None
    if any(k[0] == "pco" for k, _ in reg.items()):
        evaluated_at = {}
        for p in milp.query.predicates:
            evals = [j for j in milp.joins
                     if _binary_value(values, reg[("pco", p.id, j)], "pco") == 1]
            if len(evals) != 1:
                raise ValueError(f"predicate {p.id} must be evaluated exactly once")
            evaluated_at[p.id] = evals[0]

    retained = None
    if any(k[0] == "clo" for k, _ in reg.items()):
        retained = tuple(
            frozenset(c.id for c in milp.query.columns
                      if _binary_value(values, reg[("clo", c.id, j)], "clo") == 1)
            for j in milp.joins)

    return LeftDeepPlan(tuple(order), operators, evaluated_at, retained)


def encode(milp: JoinOrderMilp, plan: LeftDeepPlan) -> dict[int, float]:
    """Variable assignment representing the plan, suitable for
    MilpProblem.check_solution and objective evaluation. Supports the core
    encoding, cardinality, page counts and fixed single-cost models;
    raises for operator selection and projection variables."""
    reg, cfg, query = milp.registry, milp.config, milp.query
    n = query.n
    if any(k[0] in ("jos", "clo") for k, _ in reg.items()):
        raise ValueError("encode does not support operator selection or "
                         "projection formulations")
    values = {vid: 0.0 for _, vid in reg.items()}

    outer_tables = {plan.order[0]}
    for j in milp.joins:
        for t in outer_tables:
            values[reg[("tio", t, j)]] = 1.0
        values[reg[("tii", plan.order[j + 1], j)]] = 1.0
        outer_tables.add(plan.order[j + 1])

    expensive = any(k[0] == "pco" for k, _ in reg.items())
    for p in query.predicates:
        ej = None
        if expensive:
            ej = (plan.evaluated_at or {}).get(p.id)
            if ej is None:
                # natural timing: evaluated at the join producing the first
                # result containing all referenced tables
                ej = max(0, max(plan.order.index(t) for t in p.refs) - 1)
            values[reg[("pco", p.id, ej)]] = 1.0
        for j in milp.joins:
            if expensive:
                applies = j > ej
            else:
                applies = all(plan.order.index(t) <= j for t in p.refs)
            values[reg[("pao", p.id, j)]] = 1.0 if applies else 0.0
            if ("pai", p.id, j) in reg:
                values[reg[("pai", p.id, j)]] = (
                    1.0 if plan.order[j + 1] == p.refs[0] else 0.0)

    for g in query.groups:
        if ("pao_group", g.id, 0) not in reg:
            continue
        for j in milp.joins:
            on = all(values[reg[("pao", pid, j)]] == 1.0 for pid in g.members)
            values[reg[("pao_group", g.id, j)]] = 1.0 if on else 0.0

    # cardinality chain
    for j in milp.joins:
        values[reg[("ci", j)]] = query.tables[plan.order[j + 1]].cardinality
        lco = sum(cfg.log(query.tables[t].cardinality)
                  for t in range(n) if values[reg[("tio", t, j)]] == 1.0)
        lco += sum(cfg.log(p.selectivity) for p in query.predicates
                   if values[reg[("pao", p.id, j)]] == 1.0)
        for g in query.groups:
            key = ("pao_group", g.id, j)
            if key in reg and values[reg[key]] == 1.0:
                lco += cfg.log(g.correction_selectivity)
        values[reg[("lco", j)]] = lco
        co = 0.0
        eps = cfg.boundary_epsilon
        for r, theta in enumerate(cfg.ladder.thresholds):
            flag = 1.0 if lco >= cfg.log(theta) - eps else 0.0
            values[reg[("cto", r, j)]] = flag
            if flag:
                co = theta
        values[reg[("co", j)]] = co
        if ("pgo", j) in reg:
            pgo = cfg.pages(co) if co > 0 else 0
            values[reg[("pgo", j)]] = float(pgo)
            values[reg[("pgi", j)]] = float(
                cfg.pages(query.tables[plan.order[j + 1]].cardinality))
        if ("blocks", j) in reg:
            blocks = values[reg[("pgo", j)]] / cfg.buffer
            values[reg[("blocks", j)]] = blocks
            for t in range(n):
                if ("bnlz", t, j) in reg:
                    values[reg[("bnlz", t, j)]] = (
                        blocks if values[reg[("tii", t, j)]] == 1.0 else 0.0)
    for p in query.predicates:
        for j in milp.joins:
            key = ("pcoz", p.id, j)
            if key in reg:
                values[reg[key]] = (values[reg[("co", j)]]
                                    if values[reg[("pco", p.id, j)]] == 1.0
                                    else 0.0)
    return values


def validate(query: Query, plan: LeftDeepPlan) -> list[str]:
    """Structural checks; empty list means the plan is well-formed."""
    issues = []
    if sorted(plan.order) != list(range(query.n)):
        issues.append("order is not a permutation of the query's table ids")
        return issues
    if plan.evaluated_at is not None:
        for pid, j in plan.evaluated_at.items():
            if pid >= len(query.predicates) or pid < 0:
                issues.append(f"unknown predicate {pid}")
                continue
            if not 0 <= j <= query.n - 2:
                issues.append(f"predicate {pid} evaluated at invalid join {j}")
                continue
            p = query.predicates[pid]
            # refs must all be present in the output of the evaluating join
            if not all(plan.order.index(t) <= j + 1 for t in p.refs):
                issues.append(
                    f"predicate {pid} evaluated at join {j} before all "
                    f"referenced tables are joined")
    if plan.retained_columns is not None:
        for j, cols in enumerate(plan.retained_columns):
            for cid in cols:
                if cid >= len(query.columns):
                    issues.append(f"unknown column {cid} at join {j}")
        if query.output_columns and plan.retained_columns:
            last = plan.retained_columns[-1]
            inner_last = plan.order[-1]
            for cid in query.output_columns:
                col = query.columns[cid]
                if cid not in last and col.table != inner_last:
                    issues.append(f"output column {cid} dropped before the "
                                  f"final result")
    return issues


def approximation_report(milp: JoinOrderMilp, solution,
                         cost_model: CostModel | None = None) -> dict:
    """Compare the MILP's floor-approximated objective with the true cost
    of the decoded plan. ratio = true_cost / milp_objective (>= 1 whenever
    the floor approximation underestimates)."""
    from .baseline import CostModelExact, exact_plan_cost

    plan = decode(milp, solution)
    cm = cost_model or milp.config.cost_model
    true_cost = exact_plan_cost(
        milp.query, plan.order, cm, operators=plan.operators,
        evaluated_at=plan.evaluated_at,
        exact=CostModelExact.from_config(milp.config))
    obj = solution.objective
    ratio = true_cost / obj if obj > 0 else math.inf
    return {
        "plan": plan,
        "milp_objective": obj,
        "true_cost": true_cost,
        "ratio": ratio,
    }
