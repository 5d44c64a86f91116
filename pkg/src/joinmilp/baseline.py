"""Exact plan costing and classical optimal join-order search.

Costs here use true cardinalities and exact page ceilings, with no
threshold-ladder approximation, so they double as the ground truth against
which MILP solutions are measured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .formulation import CostModel, FormulationConfig
from .query_model import Query


@dataclass(frozen=True)
class CostModelExact:
    """Page/buffer geometry for exact join cost evaluation."""

    tup_size: int = 100
    page_size: int = 8192
    buffer: int = 64

    @classmethod
    def from_config(cls, config: FormulationConfig) -> "CostModelExact":
        return cls(config.tup_size, config.page_size, config.buffer)

    def pages(self, tuples: float) -> int:
        return math.ceil(tuples * self.tup_size / self.page_size)

    def join_cost(self, impl: CostModel, outer_card: float,
                  inner_card: float) -> float:
        pgo = self.pages(outer_card)
        pgi = self.pages(inner_card)
        if impl is CostModel.HASH_JOIN:
            return 3.0 * (pgo + pgi)
        if impl is CostModel.SORT_MERGE:
            lo = math.ceil(math.log2(pgo)) if pgo > 1 else 0
            li = math.ceil(math.log2(pgi)) if pgi > 1 else 0
            return 2.0 * pgo * lo + 2.0 * pgi * li + pgo + pgi
        if impl is CostModel.BNL:
            return pgi * pgo / self.buffer
        raise ValueError(f"not a join implementation: {impl}")


def _prefix_cardinalities(query: Query, order, evaluated_at=None):
    """Intermediate result cardinality after each join of a left-deep plan.

    Returns (cards, pending_eval) where cards[j] is the cardinality after
    join j and pending_eval maps join index -> list of predicates whose
    (deferred) evaluation happens there."""
    n = query.n
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the table ids")
    in_result = set()
    applied_groups = set()
    cards = []
    card = query.tables[order[0]].cardinality
    in_result.add(order[0])
    eval_join = {}
    if evaluated_at:
        for pid, j in evaluated_at.items():
            eval_join.setdefault(j, []).append(pid)
    applied = set()
    for j in range(n - 1):
        inner = order[j + 1]
        card *= query.tables[inner].cardinality
        in_result.add(inner)
        for p in query.predicates:
            if p.id in applied or (evaluated_at and p.id in evaluated_at):
                continue
            # natural evaluation: as soon as all referenced tables joined
            if all(t in in_result for t in p.refs):
                card *= p.selectivity
                applied.add(p.id)
        for pid in eval_join.get(j, ()):
            card *= query.predicates[pid].selectivity
            applied.add(pid)
        for g in query.groups:
            if g.id in applied_groups:
                continue
            ready = all(
                all(t in in_result for t in query.predicates[pid].refs)
                and (not evaluated_at or pid not in evaluated_at
                     or evaluated_at[pid] <= j)
                for pid in g.members)
            if ready:
                card *= g.correction_selectivity
                applied_groups.add(g.id)
        cards.append(card)
    return cards


def exact_plan_cost(query: Query, order, cost_model: CostModel = CostModel.COUT,
                    operators=None, evaluated_at=None,
                    exact: CostModelExact | None = None) -> float:
    """True cost of a left-deep plan given by a table-id order.

    For C_out this is the sum of intermediate (non-final) result
    cardinalities. Page-based models charge every join using the true
    operand sizes; `operators` selects a per-join implementation when the
    model is OPERATOR_CHOICE. Deferred predicate evaluation (evaluated_at:
    predicate id -> join index) adds eval_cost_per_tuple times the result
    cardinality of the join where evaluation happens.
    """
    exact = exact or CostModelExact()
    cards = _prefix_cardinalities(query, order, evaluated_at)
    n = query.n
    if cost_model is CostModel.COUT:
        cost = sum(cards[:-1])
    else:
        cost = 0.0
        outer = query.tables[order[0]].cardinality
        for j in range(n - 1):
            inner = query.tables[order[j + 1]].cardinality
            if cost_model is CostModel.OPERATOR_CHOICE:
                if operators is None:
                    raise ValueError("operator choice model needs operators")
                impl = operators[j]
            else:
                impl = cost_model
            cost += exact.join_cost(impl, outer, inner)
            outer = cards[j]
    if evaluated_at:
        base_card = query.tables[order[0]].cardinality
        for pid, j in evaluated_at.items():
            p = query.predicates[pid]
            if p.eval_cost_per_tuple > 0:
                # evaluation scans the outer operand of the evaluating join
                outer_card = base_card if j == 0 else cards[j - 1]
                cost += p.eval_cost_per_tuple * outer_card
    return cost


def optimize_bruteforce(query: Query, cost_model: CostModel = CostModel.COUT,
                        exact: CostModelExact | None = None):
    """Exhaustive search over all left-deep orders, sharing prefix work.

    Bounded to n <= 8. Ties break toward the lexicographically smallest
    order. Returns (order, cost)."""
    n = query.n
    if n > 8:
        raise ValueError(f"brute force limited to 8 tables, got {n}")
    exact = exact or CostModelExact()
    page_based = cost_model is not CostModel.COUT
    if cost_model is CostModel.OPERATOR_CHOICE:
        raise ValueError("use optimize_dp for operator choice")
    cards = [t.cardinality for t in query.tables]
    preds_by_table = {t: [] for t in range(n)}
    for p in query.predicates:
        for t in p.refs:
            preds_by_table[t].append(p)
    best = [None, math.inf]

    def recurse(order, mask, card, cost):
        depth = len(order)
        if depth == n:
            if cost < best[1]:
                best[0], best[1] = tuple(order), cost
            return
        for t in range(n):
            bit = 1 << t
            if mask & bit:
                continue
            new_card = card * cards[t]
            for p in preds_by_table[t]:
                if all(r == t or (mask >> r) & 1 for r in p.refs):
                    new_card *= p.selectivity
            for g in query.groups:
                refs = set()
                for pid in g.members:
                    refs |= set(query.predicates[pid].refs)
                if t in refs and refs <= (set(order) | {t}):
                    new_card *= g.correction_selectivity
            if depth == 0:
                recurse(order + [t], mask | bit, new_card, cost)
                continue
            if page_based:
                step = exact.join_cost(cost_model, card, cards[t])
            else:
                step = new_card if depth < n - 1 else 0.0
            new_cost = cost + step
            if new_cost < best[1]:
                recurse(order + [t], mask | bit, new_card, new_cost)

    recurse([], 0, 1.0, 0.0)
    return best[0], best[1]


def optimize_dp(query: Query, cost_model: CostModel = CostModel.COUT,
                exact: CostModelExact | None = None):
    """Dynamic programming over table subsets (left-deep, cross products
    allowed). Returns (order, cost, operators) where operators is None
    unless the cost model is OPERATOR_CHOICE.

    Bounded to n <= 30 (the subset tables take 2^n entries)."""
    n = query.n
    if n > 30:
        raise ValueError(f"subset DP limited to 30 tables, got {n}")
    exact = exact or CostModelExact()
    cards = [t.cardinality for t in query.tables]
    choice = cost_model is CostModel.OPERATOR_CHOICE
    impls = (CostModel.HASH_JOIN, CostModel.SORT_MERGE, CostModel.BNL)

    # predicates grouped by their highest-id reference for the incremental
    # cardinality recurrence card[S] = card[S \ {low}] * |low| * sels
    preds_low = {t: [] for t in range(n)}
    for p in query.predicates:
        preds_low[min(p.refs)].append(p)
    groups_low = {t: [] for t in range(n)}
    for g in query.groups:
        refs = set()
        for pid in g.members:
            refs |= set(query.predicates[pid].refs)
        groups_low[min(refs)].append((g, refs))

    full = (1 << n) - 1
    card = [0.0] * (full + 1)
    card[0] = 1.0
    for mask in range(1, full + 1):
        low = (mask & -mask).bit_length() - 1
        c = card[mask ^ (1 << low)] * cards[low]
        for p in preds_low[low]:
            if all((mask >> r) & 1 for r in p.refs):
                c *= p.selectivity
        for g, refs in groups_low[low]:
            if all((mask >> r) & 1 for r in refs):
                c *= g.correction_selectivity
        card[mask] = c

    INF = math.inf
    cost = [INF] * (full + 1)
    parent = [-1] * (full + 1)
    op = [None] * (full + 1) if choice else None
    for t in range(n):
        cost[1 << t] = 0.0
        parent[1 << t] = t
    for mask in range(1, full + 1):
        if cost[mask] == INF:
            continue
        base = cost[mask]
        outer_card = card[mask]
        rest = full & ~mask
        sub = rest
        while sub:
            bit = sub & -sub
            sub ^= bit
            t = bit.bit_length() - 1
            new = mask | bit
            if choice:
                best_step, best_impl = INF, None
                for impl in impls:
                    s = exact.join_cost(impl, outer_card, cards[t])
                    if s < best_step:
                        best_step, best_impl = s, impl
                step = best_step
            elif cost_model is CostModel.COUT:
                step = card[new] if new != full else 0.0
            else:
                step = exact.join_cost(cost_model, outer_card, cards[t])
            total = base + step
            if total < cost[new]:
                cost[new] = total
                parent[new] = t
                if choice:
                    op[new] = best_impl

    order = []
    operators = [] if choice else None
    mask = full
    while mask:
        t = parent[mask]
        order.append(t)
        if choice and mask.bit_count() > 1:
            operators.append(op[mask])
        mask ^= 1 << t
    order.reverse()
    if choice:
        operators.reverse()
    return tuple(order), cost[full], operators
