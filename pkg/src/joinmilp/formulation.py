"""Compiles a query into a join-ordering MILP.

Left-deep plans are encoded with per-join table selection binaries; operand
cardinalities go through a log-space sum and a geometric threshold ladder
that floors the cardinality onto its highest reached rung. Cost models
(C_out, hash join, sort-merge, block nested loop) and optional extensions
(correlated predicates, expensive predicates, projection, operator
selection, result properties) layer on top.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum

from .milp_core import (BINARY, Continuous, LinearExpr, MilpProblem,
                        linearize_product)
from .query_model import Query


class CostModel(Enum):
    COUT = "cout"
    HASH_JOIN = "hash"
    SORT_MERGE = "sortmerge"
    BNL = "bnl"
    OPERATOR_CHOICE = "choice"


JOIN_IMPLEMENTATIONS = (CostModel.HASH_JOIN, CostModel.SORT_MERGE, CostModel.BNL)


@dataclass(frozen=True)
class ThresholdLadder:
    """Geometric cardinality cut-points theta_0 < theta_1 < ... used to
    translate log-cardinality back into an (under-)approximate cardinality."""

    thresholds: tuple[float, ...]
    ratio: float

    def __post_init__(self):
        if not self.thresholds or self.ratio <= 1:
            raise ValueError("ladder needs thresholds and ratio > 1")
        if self.thresholds[0] < 1:
            raise ValueError("first threshold must be >= 1")
        for a, b in zip(self.thresholds, self.thresholds[1:]):
            if not math.isclose(b / a, self.ratio, rel_tol=1e-9):
                raise ValueError("thresholds must be geometric with the given ratio")

    @classmethod
    def geometric(cls, ratio: float, max_card: float) -> "ThresholdLadder":
        """Ladder from 1 upward until max_card is covered."""
        if ratio <= 1:
            raise ValueError("ratio must be > 1")
        thresholds = [1.0]
        while thresholds[-1] < max_card * (1 - 1e-12):
            thresholds.append(thresholds[-1] * ratio)
        return cls(tuple(thresholds), ratio)

    def __len__(self):
        return len(self.thresholds)

    @property
    def top(self) -> float:
        return self.thresholds[-1]

    def floor_value(self, card: float, epsilon: float = 1e-6) -> float:
        """Highest rung reached by card; boundary-inclusive within epsilon
        of a rung in log10 space. Returns 0 if even the first rung is missed."""
        if card <= 0:
            return 0.0
        lc = math.log10(card)
        best = 0.0
        for t in self.thresholds:
            if lc >= math.log10(t) - epsilon:
                best = t
            else:
                break
        return best


@dataclass(frozen=True)
class Extensions:
    nary: bool = False
    correlated: bool = False
    expensive_predicates: bool = False
    projection: bool = False
    properties: bool = False


@dataclass(frozen=True)
class FormulationConfig:
    ladder: ThresholdLadder
    log_base: float = 10.0
    cost_model: CostModel = CostModel.COUT
    operator_choices: tuple[CostModel, ...] = JOIN_IMPLEMENTATIONS
    extensions: Extensions = field(default_factory=Extensions)
    tup_size: int = 100
    page_size: int = 8192
    buffer: int = 64
    boundary_epsilon: float = 1e-6

    def __post_init__(self):
        if min(self.tup_size, self.page_size, self.buffer) <= 0:
            raise ValueError("tup_size, page_size and buffer must be positive")

    def log(self, x: float) -> float:
        return math.log(x) / math.log(self.log_base)

    def pages(self, tuples: float) -> int:
        """Disk pages consumed by `tuples` rows at the fixed tuple size."""
        return math.ceil(tuples * self.tup_size / self.page_size)


class VarRegistry:
    """Bijection between structured formulation keys and variable ids.

    Keys are tuples like ("tio", t, j) or ("cto", r, j)."""

    def __init__(self):
        self._by_key: dict[tuple, int] = {}

    def add(self, key: tuple, vid: int):
        if key in self._by_key:
            raise ValueError(f"duplicate registry key {key!r}")
        self._by_key[key] = vid

    def __getitem__(self, key: tuple) -> int:
        return self._by_key[key]

    def __contains__(self, key: tuple) -> bool:
        return key in self._by_key

    def get(self, key: tuple, default=None):
        return self._by_key.get(key, default)

    def items(self):
        return self._by_key.items()

    def keys_with_prefix(self, family: str):
        return [k for k in self._by_key if k[0] == family]

    def to_sidecar(self, problem: MilpProblem) -> dict[str, str]:
        """Serializable key -> variable-name map (for mapping solver output
        columns back to structured keys)."""
        return {":".join(str(p) for p in key): problem.variables[vid].name
                for key, vid in self._by_key.items()}


@dataclass
class JoinOrderMilp:
    problem: MilpProblem
    registry: VarRegistry
    query: Query
    config: FormulationConfig
    # defining-equality constraint ids, keyed like registry entries
    defs: dict[tuple, int] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.query.n

    @property
    def j_max(self) -> int:
        return self.n - 2

    @property
    def joins(self) -> range:
        return range(self.n - 1)


# ---------------------------------------------------------------------------
# core join-order encoding


def build_join_order_core(query: Query, config: FormulationConfig) -> JoinOrderMilp:
    """Table-selection binaries and the constraints pinning them to valid
    complete left-deep plans."""
    n = query.n
    if n < 2:
        raise ValueError("need at least 2 tables to order joins")
    problem = MilpProblem("join_order")
    reg = VarRegistry()
    milp = JoinOrderMilp(problem, reg, query, config)

    for j in milp.joins:
        for t in range(n):
            reg.add(("tio", t, j), problem.add_binary(f"tio_t{t}_j{j}"))
        for t in range(n):
            reg.add(("tii", t, j), problem.add_binary(f"tii_t{t}_j{j}"))

    # one table opens the plan
    problem.add_constraint(
        LinearExpr([(1.0, reg[("tio", t, 0)]) for t in range(n)]),
        "=", 1.0, "outer0_single")
    # every inner operand is a single table
    for j in milp.joins:
        problem.add_constraint(
            LinearExpr([(1.0, reg[("tii", t, j)]) for t in range(n)]),
            "=", 1.0, f"inner_single_j{j}")
    # operands never overlap
    for j in milp.joins:
        for t in range(n):
            problem.add_constraint(
                LinearExpr([(1.0, reg[("tio", t, j)]), (1.0, reg[("tii", t, j)])]),
                "<=", 1.0, f"no_overlap_t{t}_j{j}")
    # outer operand accumulates the previous join's operands
    for j in range(1, n - 1):
        for t in range(n):
            problem.add_constraint(
                LinearExpr([(1.0, reg[("tio", t, j)]),
                            (-1.0, reg[("tio", t, j - 1)]),
                            (-1.0, reg[("tii", t, j - 1)])]),
                "=", 0.0, f"accumulate_t{t}_j{j}")
    return milp


def add_predicate_applicability(milp: JoinOrderMilp):
    """Binaries flagging, per join, whether each predicate applies to the
    outer operand; forced to zero while any referenced table is missing."""
    problem, reg = milp.problem, milp.registry
    for p in milp.query.predicates:
        for j in milp.joins:
            pao = problem.add_binary(f"pao_p{p.id}_j{j}")
            reg.add(("pao", p.id, j), pao)
            for t in p.refs:
                problem.add_constraint(
                    LinearExpr([(1.0, pao), (-1.0, reg[("tio", t, j)])]),
                    "<=", 0.0, f"pao_p{p.id}_t{t}_j{j}")
            if len(p.refs) == 1:
                # unary predicates may also apply to the single-table inner side
                pai = problem.add_binary(f"pai_p{p.id}_j{j}")
                reg.add(("pai", p.id, j), pai)
                problem.add_constraint(
                    LinearExpr([(1.0, pai), (-1.0, reg[("tii", p.refs[0], j)])]),
                    "<=", 0.0, f"pai_p{p.id}_j{j}")


def add_cardinality(milp: JoinOrderMilp):
    """Inner cardinality, log-cardinality of the outer operand, threshold
    flags, and the rung-floor cardinality approximation."""
    problem, reg, cfg = milp.problem, milp.registry, milp.config
    query = milp.query
    ladder = cfg.ladder
    total = query.total_cardinality()
    if ladder.top < total * (1 - 1e-9):
        raise ValueError(
            f"ladder top {ladder.top} does not cover the maximal join "
            f"cardinality {total}")

    log_cards = [cfg.log(t.cardinality) for t in query.tables]
    sum_log_card = sum(log_cards)
    lco_lo = sum(min(0.0, cfg.log(p.selectivity)) for p in query.predicates)
    max_card = max(t.cardinality for t in query.tables)
    eps = cfg.boundary_epsilon

    for j in milp.joins:
        ci = problem.add_continuous(f"ci_j{j}", 0.0, max_card)
        reg.add(("ci", j), ci)
        expr = LinearExpr([(query.tables[t].cardinality, reg[("tii", t, j)])
                           for t in range(query.n)])
        expr.add_term(-1.0, ci)
        milp.defs[("ci", j)] = problem.add_constraint(expr, "=", 0.0, f"def_ci_j{j}")

        lco = problem.add_continuous(f"lco_j{j}", lco_lo, sum_log_card)
        reg.add(("lco", j), lco)
        expr = LinearExpr([(log_cards[t], reg[("tio", t, j)])
                           for t in range(query.n)])
        for p in query.predicates:
            expr.add_term(cfg.log(p.selectivity), reg[("pao", p.id, j)])
        expr.add_term(-1.0, lco)
        milp.defs[("lco", j)] = problem.add_constraint(expr, "=", 0.0, f"def_lco_j{j}")

        for r, theta in enumerate(ladder.thresholds):
            cto = problem.add_binary(f"cto_r{r}_j{j}")
            reg.add(("cto", r, j), cto)
            log_theta = cfg.log(theta)
            big_m = sum_log_card - log_theta + 1.0
            problem.add_constraint(
                LinearExpr([(1.0, lco), (-big_m, cto)]),
                "<=", log_theta - eps, f"cto_r{r}_j{j}_activate")

        co = problem.add_continuous(f"co_j{j}", 0.0, ladder.top)
        reg.add(("co", j), co)
        expr = LinearExpr()
        prev = 0.0
        for r, theta in enumerate(ladder.thresholds):
            expr.add_term(theta - prev, reg[("cto", r, j)])
            prev = theta
        expr.add_term(-1.0, co)
        milp.defs[("co", j)] = problem.add_constraint(expr, "=", 0.0, f"def_co_j{j}")


# ---------------------------------------------------------------------------
# cost models


def add_cout_objective(milp: JoinOrderMilp):
    """Sum of intermediate-result cardinalities (outer operands of joins >= 1)."""
    reg = milp.registry
    expr = LinearExpr([(1.0, reg[("co", j)]) for j in milp.joins if j >= 1])
    milp.problem.add_objective(expr)


def add_page_counts(milp: JoinOrderMilp):
    """Disk pages of both operands, derived from the threshold flags for the
    outer side and from per-table constants for the inner side."""
    problem, reg, cfg = milp.problem, milp.registry, milp.config
    query = milp.query
    ladder = cfg.ladder
    pages_top = cfg.pages(ladder.top)
    table_pages = [cfg.pages(t.cardinality) for t in query.tables]

    for j in milp.joins:
        pgo = problem.add_continuous(f"pgo_j{j}", 0.0, pages_top)
        reg.add(("pgo", j), pgo)
        expr = LinearExpr()
        prev_pages = 0
        for r, theta in enumerate(ladder.thresholds):
            pr = cfg.pages(theta)
            # sum_r pages(theta_r) * (cto_r - cto_{r+1}), with the row past the
            # top rung identically zero, rearranged per-flag
            expr.add_term(pr - prev_pages, reg[("cto", r, j)])
            prev_pages = pr
        expr.add_term(-1.0, pgo)
        milp.defs[("pgo", j)] = problem.add_constraint(expr, "=", 0.0, f"def_pgo_j{j}")

        pgi = problem.add_continuous(f"pgi_j{j}", 0.0, max(table_pages))
        reg.add(("pgi", j), pgi)
        expr = LinearExpr([(float(table_pages[t]), reg[("tii", t, j)])
                           for t in range(query.n)])
        expr.add_term(-1.0, pgi)
        milp.defs[("pgi", j)] = problem.add_constraint(expr, "=", 0.0, f"def_pgi_j{j}")


def _log2ceil(pages: int) -> int:
    return math.ceil(math.log2(pages)) if pages > 1 else 0


def _hash_cost_expr(milp: JoinOrderMilp, j: int) -> LinearExpr:
    reg = milp.registry
    return LinearExpr([(3.0, reg[("pgo", j)]), (3.0, reg[("pgi", j)])])


def _sort_merge_cost_expr(milp: JoinOrderMilp, j: int) -> LinearExpr:
    """2*pgo*ceil(log2 pgo) + 2*pgi*ceil(log2 pgi) + pgo + pgi, with the
    log-linear parts precomputed on threshold rungs / inner tables."""
    reg, cfg = milp.registry, milp.config
    expr = LinearExpr([(1.0, reg[("pgo", j)]), (1.0, reg[("pgi", j)])])
    prev_w = 0.0
    for r, theta in enumerate(cfg.ladder.thresholds):
        pr = cfg.pages(theta)
        w = 2.0 * pr * _log2ceil(pr)
        expr.add_term(w - prev_w, reg[("cto", r, j)])
        prev_w = w
    for t in milp.query.tables:
        pt = cfg.pages(t.cardinality)
        expr.add_term(2.0 * pt * _log2ceil(pt), reg[("tii", t.id, j)])
    return expr


def _ensure_blocks(milp: JoinOrderMilp, j: int) -> int:
    """Continuous outer-loop iteration count pgo/buffer for join j."""
    reg, cfg, problem = milp.registry, milp.config, milp.problem
    if ("blocks", j) in reg:
        return reg[("blocks", j)]
    upper = cfg.pages(cfg.ladder.top) / cfg.buffer
    blocks = problem.add_continuous(f"blocks_j{j}", 0.0, upper)
    reg.add(("blocks", j), blocks)
    expr = LinearExpr([(1.0 / cfg.buffer, reg[("pgo", j)]), (-1.0, blocks)])
    milp.defs[("blocks", j)] = problem.add_constraint(
        expr, "=", 0.0, f"def_blocks_j{j}")
    return blocks


def _bnl_cost_expr(milp: JoinOrderMilp, j: int) -> LinearExpr:
    """sum_t pages(t) * tii_tj * blocks_j, linearized once per table."""
    reg, cfg, problem = milp.registry, milp.config, milp.problem
    blocks = _ensure_blocks(milp, j)
    expr = LinearExpr()
    for t in milp.query.tables:
        z = linearize_product(problem, reg[("tii", t.id, j)], blocks,
                              name=f"bnlz_t{t.id}_j{j}")
        reg.add(("bnlz", t.id, j), z)
        expr.add_term(float(cfg.pages(t.cardinality)), z)
    return expr


_COST_EXPRS = {
    CostModel.HASH_JOIN: _hash_cost_expr,
    CostModel.SORT_MERGE: _sort_merge_cost_expr,
    CostModel.BNL: _bnl_cost_expr,
}


def add_hash_join_cost(milp: JoinOrderMilp):
    for j in milp.joins:
        milp.problem.add_objective(_hash_cost_expr(milp, j))


def add_sort_merge_cost(milp: JoinOrderMilp):
    for j in milp.joins:
        milp.problem.add_objective(_sort_merge_cost_expr(milp, j))


def add_bnl_cost(milp: JoinOrderMilp):
    for j in milp.joins:
        milp.problem.add_objective(_bnl_cost_expr(milp, j))


def _cost_upper_bound(milp: JoinOrderMilp, impl: CostModel) -> float:
    cfg = milp.config
    pages_top = cfg.pages(cfg.ladder.top)
    max_tp = max(cfg.pages(t.cardinality) for t in milp.query.tables)
    if impl is CostModel.HASH_JOIN:
        return 3.0 * (pages_top + max_tp)
    if impl is CostModel.SORT_MERGE:
        return (2.0 * pages_top * _log2ceil(pages_top) + pages_top
                + 2.0 * max_tp * _log2ceil(max_tp) + max_tp)
    if impl is CostModel.BNL:
        return max_tp * pages_top / cfg.buffer
    raise ValueError(f"not a join implementation: {impl}")


def add_operator_selection(milp: JoinOrderMilp,
                           implementations: tuple[CostModel, ...]):
    """Per-join operator choice: exactly one implementation is selected and
    only the selected implementation's cost is charged."""
    problem, reg = milp.problem, milp.registry
    impls = tuple(implementations)
    if len(impls) < 2:
        raise ValueError("operator selection needs at least 2 implementations")
    for impl in impls:
        if impl not in _COST_EXPRS:
            raise ValueError(f"not a join implementation: {impl}")

    for j in milp.joins:
        jos_vars = []
        for impl in impls:
            jos = problem.add_binary(f"jos_{impl.value}_j{j}")
            reg.add(("jos", impl.value, j), jos)
            jos_vars.append(jos)
        problem.add_constraint(
            LinearExpr([(1.0, v) for v in jos_vars]), "=", 1.0,
            f"one_operator_j{j}")
        for impl in impls:
            upper = _cost_upper_bound(milp, impl)
            pjc = problem.add_continuous(f"pjc_{impl.value}_j{j}", 0.0, upper)
            reg.add(("pjc", impl.value, j), pjc)
            expr = _COST_EXPRS[impl](milp, j)
            expr.add_term(-1.0, pjc)
            milp.defs[("pjc", impl.value, j)] = problem.add_constraint(
                expr, "=", 0.0, f"def_pjc_{impl.value}_j{j}")
            ajc = linearize_product(problem, reg[("jos", impl.value, j)], pjc,
                                    name=f"ajc_{impl.value}_j{j}")
            reg.add(("ajc", impl.value, j), ajc)
            problem.add_objective(LinearExpr([(1.0, ajc)]))


# ---------------------------------------------------------------------------
# extensions


def add_correlated_group(milp: JoinOrderMilp, group_id: int):
    """Activation flag for a correlated predicate group; its correction
    selectivity enters the log-cardinality once all members apply."""
    problem, reg, cfg = milp.problem, milp.registry, milp.config
    group = milp.query.groups[group_id]
    members = sorted(group.members)
    log_corr = cfg.log(group.correction_selectivity)
    for j in milp.joins:
        for p in members:
            if ("pao", p, j) not in reg:
                raise ValueError("predicate applicability must be built first")
        gao = problem.add_binary(f"pao_g{group_id}_j{j}")
        reg.add(("pao_group", group_id, j), gao)
        # forced to one when every member applies
        expr = LinearExpr([(1.0, reg[("pao", p, j)]) for p in members])
        expr.add_term(-1.0, gao)
        problem.add_constraint(expr, "<=", float(len(members) - 1),
                               f"group{group_id}_on_j{j}")
        # forced to zero when any member is off
        for p in members:
            problem.add_constraint(
                LinearExpr([(1.0, gao), (-1.0, reg[("pao", p, j)])]),
                "<=", 0.0, f"group{group_id}_off_p{p}_j{j}")
        # fold the correction into the lco defining equality
        cid = milp.defs[("lco", j)]
        milp.problem.constraints[cid].expr.add_term(log_corr, gao)
        _widen_continuous(problem, reg[("lco", j)],
                          min(0.0, log_corr), max(0.0, log_corr))


def _widen_continuous(problem: MilpProblem, vid: int, dlo: float, dhi: float):
    var = problem.variables[vid]
    dom = var.domain
    problem.variables[vid] = replace(
        var, domain=Continuous(dom.lower + dlo, dom.upper + dhi))


def add_expensive_predicates(milp: JoinOrderMilp):
    """Per-join evaluation flags and evaluation cost for predicates whose
    application is no longer free.

    Applicability becomes monotone across joins (an evaluated predicate
    stays evaluated), nothing is evaluated before the first join, and any
    predicate still pending at the last join is evaluated there.
    """
    problem, reg = milp.problem, milp.registry
    j_max = milp.j_max
    for p in milp.query.predicates:
        problem.add_constraint(
            LinearExpr([(1.0, reg[("pao", p.id, 0)])]), "=", 0.0,
            f"pao_p{p.id}_initial")
        for j in range(j_max):
            problem.add_constraint(
                LinearExpr([(1.0, reg[("pao", p.id, j)]),
                            (-1.0, reg[("pao", p.id, j + 1)])]),
                "<=", 0.0, f"pao_p{p.id}_mono_j{j}")
        for j in milp.joins:
            pco = problem.add_binary(f"pco_p{p.id}_j{j}")
            reg.add(("pco", p.id, j), pco)
            if j < j_max:
                problem.add_constraint(
                    LinearExpr([(1.0, pco), (-1.0, reg[("pao", p.id, j + 1)]),
                                (1.0, reg[("pao", p.id, j)])]),
                    "=", 0.0, f"def_pco_p{p.id}_j{j}")
            else:
                # virtual all-evaluated row past the last join
                problem.add_constraint(
                    LinearExpr([(1.0, pco), (1.0, reg[("pao", p.id, j)])]),
                    "=", 1.0, f"def_pco_p{p.id}_j{j}")
            if p.eval_cost_per_tuple > 0:
                z = linearize_product(problem, pco, reg[("co", j)],
                                      name=f"pcoz_p{p.id}_j{j}")
                reg.add(("pcoz", p.id, j), z)
                problem.add_objective(
                    LinearExpr([(p.eval_cost_per_tuple, z)]))


def add_projection(milp: JoinOrderMilp):
    """Column retention binaries and operand byte sizes.

    A column may only be present where its table is; it can enter when its
    table enters and never reappears after being dropped; output columns
    must survive into the final result; predicate columns must be retained
    while the predicate's evaluation needs them.
    """
    problem, reg, cfg = milp.problem, milp.registry, milp.config
    query = milp.query
    if not query.columns:
        raise ValueError("query has no columns to project")
    j_max = milp.j_max
    expensive = any(("pco", p.id, 0) in reg for p in query.predicates)

    for col in query.columns:
        for j in milp.joins:
            clo = problem.add_binary(f"clo_l{col.id}_j{j}")
            reg.add(("clo", col.id, j), clo)
            problem.add_constraint(
                LinearExpr([(1.0, clo), (-1.0, reg[("tio", col.table, j)])]),
                "<=", 0.0, f"clo_table_l{col.id}_j{j}")
            cli = problem.add_binary(f"cli_l{col.id}_j{j}")
            reg.add(("cli", col.id, j), cli)
            problem.add_constraint(
                LinearExpr([(1.0, cli), (-1.0, reg[("tii", col.table, j)])]),
                "<=", 0.0, f"cli_table_l{col.id}_j{j}")
        # a dropped column cannot reappear: presence in the next outer operand
        # requires presence in either operand of the previous join
        for j in range(j_max):
            problem.add_constraint(
                LinearExpr([(1.0, reg[("clo", col.id, j + 1)]),
                            (-1.0, reg[("clo", col.id, j)]),
                            (-1.0, reg[("cli", col.id, j)])]),
                "<=", 0.0, f"clo_persist_l{col.id}_j{j}")
        if col.id in query.output_columns:
            problem.add_constraint(
                LinearExpr([(1.0, reg[("clo", col.id, j_max)]),
                            (1.0, reg[("cli", col.id, j_max)])]),
                ">=", 1.0, f"output_l{col.id}")

    # predicates hold on to the columns they read
    for p in query.predicates:
        for lid in p.columns:
            for j in milp.joins:
                need = reg[("pco", p.id, j)] if expensive else reg[("pao", p.id, j)]
                problem.add_constraint(
                    LinearExpr([(1.0, reg[("clo", lid, j)]), (-1.0, need)]),
                    ">=", 0.0, f"pred_col_p{p.id}_l{lid}_j{j}")

    # operand byte sizes
    total_bytes = sum(c.byte_size for c in query.columns)
    for j in milp.joins:
        out_expr = LinearExpr()
        for col in query.columns:
            z = linearize_product(problem, reg[("clo", col.id, j)],
                                  reg[("co", j)], name=f"cloz_l{col.id}_j{j}")
            reg.add(("cloz", col.id, j), z)
            out_expr.add_term(float(col.byte_size), z)
        bytes_out = problem.add_continuous(
            f"bytes_out_j{j}", 0.0, total_bytes * cfg.ladder.top)
        reg.add(("bytes_out", j), bytes_out)
        out_expr.add_term(-1.0, bytes_out)
        milp.defs[("bytes_out", j)] = problem.add_constraint(
            out_expr, "=", 0.0, f"def_bytes_out_j{j}")

        in_expr = LinearExpr()
        in_upper = 0.0
        for col in query.columns:
            weight = col.byte_size * query.tables[col.table].cardinality
            in_expr.add_term(weight, reg[("cli", col.id, j)])
            in_upper += weight
        bytes_in = problem.add_continuous(f"bytes_in_j{j}", 0.0, in_upper)
        reg.add(("bytes_in", j), bytes_in)
        in_expr.add_term(-1.0, bytes_in)
        milp.defs[("bytes_in", j)] = problem.add_constraint(
            in_expr, "=", 0.0, f"def_bytes_in_j{j}")


def add_result_properties(milp: JoinOrderMilp, properties,
                          requires=(), produces=None, table_provides=None):
    """Physical-property flags on outer operands.

    requires: (implementation, property) pairs gating operator choice.
    produces: property -> set of implementations whose output has it.
    table_provides: property -> set of tables that provide it natively
    (connects join 0, whose outer operand is a base table).
    """
    problem, reg = milp.problem, milp.registry
    produces = produces or {}
    table_provides = table_provides or {}
    props = list(properties)
    for x in props:
        for j in milp.joins:
            reg.add(("ohp", x, j), problem.add_binary(f"ohp_{x}_j{j}"))
    for impl, x in requires:
        key = impl.value if isinstance(impl, CostModel) else impl
        for j in milp.joins:
            problem.add_constraint(
                LinearExpr([(1.0, reg[("jos", key, j)]),
                            (-1.0, reg[("ohp", x, j)])]),
                "<=", 0.0, f"requires_{key}_{x}_j{j}")
    for x in props:
        producers = [i.value if isinstance(i, CostModel) else i
                     for i in produces.get(x, ())]
        for j in range(milp.j_max):
            expr = LinearExpr([(1.0, reg[("ohp", x, j + 1)])])
            for key in producers:
                expr.add_term(-1.0, reg[("jos", key, j)])
            problem.add_constraint(expr, "=", 0.0, f"produce_{x}_j{j + 1}")
        expr = LinearExpr([(1.0, reg[("ohp", x, 0)])])
        for t in table_provides.get(x, ()):
            expr.add_term(-1.0, reg[("tio", t, 0)])
        problem.add_constraint(expr, "=", 0.0, f"provide_{x}_j0")


# ---------------------------------------------------------------------------
# orchestration and counting


def compile_query(query: Query, config: FormulationConfig) -> JoinOrderMilp:
    """Full formulation: core, applicability, cardinality, the configured
    cost model, and enabled extensions."""
    ext = config.extensions
    milp = build_join_order_core(query, config)
    add_predicate_applicability(milp)
    add_cardinality(milp)
    if ext.correlated:
        for g in query.groups:
            add_correlated_group(milp, g.id)
    elif query.groups:
        warnings.warn("query has correlated groups but the extension is off; "
                      "corrections ignored by the formulation")

    cm = config.cost_model
    if cm is CostModel.COUT:
        add_cout_objective(milp)
    elif cm is CostModel.HASH_JOIN:
        add_page_counts(milp)
        add_hash_join_cost(milp)
    elif cm is CostModel.SORT_MERGE:
        add_page_counts(milp)
        add_sort_merge_cost(milp)
    elif cm is CostModel.BNL:
        add_page_counts(milp)
        add_bnl_cost(milp)
    elif cm is CostModel.OPERATOR_CHOICE:
        add_page_counts(milp)
        add_operator_selection(milp, config.operator_choices)
    else:
        raise ValueError(f"unknown cost model {cm!r}")

    if ext.expensive_predicates:
        add_expensive_predicates(milp)
    elif any(p.eval_cost_per_tuple > 0 for p in query.predicates):
        warnings.warn("predicates carry evaluation cost but the "
                      "expensive-predicates extension is off")
    if ext.projection and query.columns:
        add_projection(milp)
    return milp


def branch_priorities(milp: JoinOrderMilp) -> dict[int, tuple[int, float]]:
    """Variable branching hints for the solver: decide the plan structure
    (table selection) first, then resolve threshold flags top rung first
    (each flag's objective impact is roughly its rung value)."""
    prio: dict[int, tuple[int, float]] = {}
    for key, vid in milp.registry.items():
        if key[0] in ("tio", "tii"):
            prio[vid] = (1, 1.0)
        elif key[0] == "cto":
            prio[vid] = (0, milp.config.ladder.thresholds[key[1]])
    return prio


def count_model(n: int, m: int, l: int) -> tuple[int, int]:
    """Closed-form variable/constraint counts of the base model (no
    extensions, C_out objective) for n tables, m binary predicates and l
    cardinality thresholds."""
    if n < 2:
        raise ValueError("need at least 2 tables")
    j = n - 1
    num_vars = j * (2 * n + m + l + 3)
    num_cons = 1 + j * (1 + n) + n * (j - 1) + 2 * m * j + 3 * j + l * j
    return num_vars, num_cons
