"""Generic MILP data model: variables, linear constraints, objective.

Problems are built incrementally and stay plain data; solving lives in
the solver module. Includes the standard binary-times-continuous product
linearization and writers/readers for MPS (free format) and LP text.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Binary:
    pass


@dataclass(frozen=True)
class Continuous:
    lower: float
    upper: float

    def __post_init__(self):
        if not (self.lower <= self.upper):
            raise ValueError(f"continuous bounds [{self.lower}, {self.upper}] invalid")


BINARY = Binary()


@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    domain: Binary | Continuous


@dataclass
class LinearExpr:
    """Sum of coefficient*variable terms plus a constant."""

    terms: list[tuple[float, int]] = field(default_factory=list)
    constant: float = 0.0

    def add_term(self, coef: float, var: int) -> "LinearExpr":
        self.terms.append((float(coef), var))
        return self

    def normalized(self) -> "LinearExpr":
        """Merge duplicate variables and drop zero coefficients."""
        acc: dict[int, float] = {}
        for coef, var in self.terms:
            acc[var] = acc.get(var, 0.0) + coef
        terms = [(c, v) for v, c in sorted(acc.items()) if c != 0.0]
        return LinearExpr(terms, self.constant)

    def evaluate(self, values) -> float:
        return self.constant + sum(c * values[v] for c, v in self.terms)

    def copy(self) -> "LinearExpr":
        return LinearExpr(list(self.terms), self.constant)


@dataclass
class Constraint:
    expr: LinearExpr
    sense: str  # "<=", "=", ">="
    rhs: float
    name: str = ""

    def violation(self, values, ) -> float:
        lhs = self.expr.evaluate(values)
        if self.sense == "<=":
            return max(0.0, lhs - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass
class Solution:
    values: list[float] | None
    objective: float
    status: str  # "optimal" | "feasible" | "infeasible" | "timed_out"
    gap: float | None = None


SENSES = ("<=", "=", ">=")

FEASIBILITY_TOL = 1e-6
INTEGRALITY_TOL = 1e-6


class MilpProblem:
    """Minimization MILP: variables, linear constraints, linear objective."""

    def __init__(self, name: str = "milp"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: LinearExpr = LinearExpr()
        self._by_name: dict[str, int] = {}

    # -- variables ---------------------------------------------------------

    def add_variable(self, name: str, domain: Binary | Continuous) -> int:
        if name in self._by_name:
            raise ValueError(f"duplicate variable name {name!r}")
        if isinstance(domain, Continuous):
            if not (math.isfinite(domain.lower) and math.isfinite(domain.upper)):
                raise ValueError(f"variable {name!r}: bounds must be finite")
        elif not isinstance(domain, Binary):
            raise ValueError(f"variable {name!r}: unsupported domain {domain!r}")
        vid = len(self.variables)
        self.variables.append(Variable(vid, name, domain))
        self._by_name[name] = vid
        return vid

    def add_binary(self, name: str) -> int:
        return self.add_variable(name, BINARY)

    def add_continuous(self, name: str, lower: float, upper: float) -> int:
        return self.add_variable(name, Continuous(lower, upper))

    def variable_by_name(self, name: str) -> int:
        return self._by_name[name]

    def bounds(self, vid: int) -> tuple[float, float]:
        dom = self.variables[vid].domain
        if isinstance(dom, Binary):
            return 0.0, 1.0
        return dom.lower, dom.upper

    # -- constraints and objective ------------------------------------------

    def _check_expr(self, expr: LinearExpr):
        for coef, var in expr.terms:
            if not (0 <= var < len(self.variables)):
                raise ValueError(f"unknown variable id {var}")
            if not math.isfinite(coef):
                raise ValueError(f"non-finite coefficient {coef} on variable {var}")

    def add_constraint(self, expr: LinearExpr, sense: str, rhs: float,
                       name: str = "") -> int:
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        if not math.isfinite(rhs):
            raise ValueError(f"non-finite rhs {rhs}")
        self._check_expr(expr)
        cid = len(self.constraints)
        self.constraints.append(Constraint(expr, sense, rhs, name or f"c{cid}"))
        return cid

    def add_objective(self, expr: LinearExpr):
        """Accumulate terms into the (minimized) objective."""
        self._check_expr(expr)
        self.objective.terms.extend(expr.terms)
        self.objective.constant += expr.constant

    def num_variables(self) -> int:
        return len(self.variables)

    def num_constraints(self) -> int:
        return len(self.constraints)

    # -- solution checking ---------------------------------------------------

    def check_solution(self, values, tol: float = FEASIBILITY_TOL) -> list[str]:
        """List of violation messages for a candidate point (empty if feasible)."""
        problems = []
        if len(values) != len(self.variables):
            return [f"expected {len(self.variables)} values, got {len(values)}"]
        for var in self.variables:
            v = values[var.id]
            lo, hi = self.bounds(var.id)
            if v < lo - tol or v > hi + tol:
                problems.append(f"{var.name}={v} outside bounds [{lo}, {hi}]")
            if isinstance(var.domain, Binary) and min(abs(v), abs(v - 1)) > INTEGRALITY_TOL:
                problems.append(f"{var.name}={v} not integral")
        scale_tol = tol
        for con in self.constraints:
            viol = con.violation(values)
            scale = max(1.0, abs(con.rhs),
                        max((abs(c) * max(1.0, abs(values[v]))
                             for c, v in con.expr.terms), default=1.0))
            if viol > scale_tol * scale:
                problems.append(f"constraint {con.name} violated by {viol}")
        return problems


def linearize_product(problem: MilpProblem, b: int, x: int,
                      name: str | None = None) -> int:
    """New variable z constrained to equal b*x for binary b, continuous x.

    Requires x in [0, U] with finite U. Adds z in [0, U] and the four
    constraints z <= U*b, z <= x, z >= x - U*(1-b), z >= 0.
    """
    bvar = problem.variables[b]
    xvar = problem.variables[x]
    if not isinstance(bvar.domain, Binary):
        raise ValueError(f"{bvar.name} is not binary")
    if not isinstance(xvar.domain, Continuous):
        raise ValueError(f"{xvar.name} is not continuous")
    lo, hi = xvar.domain.lower, xvar.domain.upper
    if lo < 0:
        raise ValueError(f"{xvar.name}: lower bound must be non-negative")
    if not math.isfinite(hi):
        raise ValueError(f"{xvar.name}: needs a finite upper bound")
    upper = hi
    zname = name or f"prod_{bvar.name}_{xvar.name}"
    z = problem.add_continuous(zname, 0.0, upper)
    # z <= U*b
    problem.add_constraint(LinearExpr([(1.0, z), (-upper, b)]), "<=", 0.0,
                           f"{zname}_ub_b")
    # z <= x
    problem.add_constraint(LinearExpr([(1.0, z), (-1.0, x)]), "<=", 0.0,
                           f"{zname}_ub_x")
    # z >= x - U*(1-b)  <=>  z - x - U*b >= -U
    problem.add_constraint(LinearExpr([(1.0, z), (-1.0, x), (-upper, b)]),
                           ">=", -upper, f"{zname}_lb_x")
    # z >= 0 (redundant with the bound; kept explicit)
    problem.add_constraint(LinearExpr([(1.0, z)]), ">=", 0.0, f"{zname}_lb0")
    return z


# ---------------------------------------------------------------------------
# MPS free format


def _num(v: float) -> str:
    return f"{v:.12g}"


_NAME_RE = re.compile(r"[^A-Za-z0-9_.]")


def _safe_names(names):
    seen = {}
    out = []
    for name in names:
        base = _NAME_RE.sub("_", name) or "x"
        cand = base
        k = 1
        while cand in seen:
            cand = f"{base}.{k}"
            k += 1
        seen[cand] = True
        out.append(cand)
    return out


def export_mps(problem: MilpProblem) -> str:
    """Free-format MPS text.

    Binaries are declared inside INTORG/INTEND markers with bounds [0, 1].
    A constant in the objective is carried as the negated RHS of the
    objective row (standard MPS convention).
    """
    vnames = _safe_names(v.name for v in problem.variables)
    cnames = _safe_names(c.name for c in problem.constraints)

    lines = ["* objective constant carried as negated RHS on the OBJ row",
             f"NAME {_NAME_RE.sub('_', problem.name) or 'milp'}",
             "ROWS",
             " N OBJ"]
    sense_code = {"<=": "L", ">=": "G", "=": "E"}
    for con, cname in zip(problem.constraints, cnames):
        lines.append(f" {sense_code[con.sense]} {cname}")

    # per-variable column entries
    col_entries: list[list[tuple[str, float]]] = [[] for _ in problem.variables]
    obj = problem.objective.normalized()
    obj_coefs = {v: c for c, v in obj.terms}
    for con, cname in zip(problem.constraints, cnames):
        for coef, var in con.expr.normalized().terms:
            col_entries[var].append((cname, coef))

    lines.append("COLUMNS")
    int_open = False
    marker = 0
    for var, vname in zip(problem.variables, vnames):
        want_int = isinstance(var.domain, Binary)
        if want_int and not int_open:
            lines.append(f"    MARKER{marker} 'MARKER' 'INTORG'")
            marker += 1
            int_open = True
        elif not want_int and int_open:
            lines.append(f"    MARKER{marker} 'MARKER' 'INTEND'")
            marker += 1
            int_open = False
        entries = list(col_entries[var.id])
        # always mention the column so import preserves the variable count
        entries.insert(0, ("OBJ", obj_coefs.get(var.id, 0.0)))
        for row, coef in entries:
            lines.append(f"    {vname} {row} {_num(coef)}")
    if int_open:
        lines.append(f"    MARKER{marker} 'MARKER' 'INTEND'")

    lines.append("RHS")
    if problem.objective.constant != 0.0:
        lines.append(f"    RHS OBJ {_num(-problem.objective.constant)}")
    for con, cname in zip(problem.constraints, cnames):
        rhs = con.rhs - con.expr.constant
        if rhs != 0.0:
            lines.append(f"    RHS {cname} {_num(rhs)}")

    lines.append("BOUNDS")
    for var, vname in zip(problem.variables, vnames):
        if isinstance(var.domain, Binary):
            lines.append(f" BV BND {vname}")
        else:
            lines.append(f" LO BND {vname} {_num(var.domain.lower)}")
            lines.append(f" UP BND {vname} {_num(var.domain.upper)}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def import_mps(text: str) -> MilpProblem:
    """Parse the MPS subset produced by export_mps."""
    lines = [ln for ln in text.splitlines()
             if ln.strip() and not ln.lstrip().startswith("*")]
    if not lines:
        raise ValueError("empty MPS text")

    problem = MilpProblem()
    section = None
    seen = []
    order = ["NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"]
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    obj_row = None
    col_ids: dict[str, int] = {}
    col_integer: dict[str, bool] = {}
    col_terms: dict[str, list[tuple[str, float]]] = {}
    obj_terms: dict[str, float] = {}
    rhs_map: dict[str, float] = {}
    bounds_lo: dict[str, float] = {}
    bounds_up: dict[str, float] = {}
    bv: set[str] = set()
    int_open = False

    for ln in lines:
        tokens = ln.split()
        head = tokens[0].upper()
        if head in order and (len(tokens) <= 2 or head == "NAME"):
            if seen and order.index(head) < order.index(seen[-1]):
                raise ValueError(f"section {head} out of order")
            seen.append(head)
            section = head
            continue
        if section == "ROWS":
            code, rname = tokens[0].upper(), tokens[1]
            if code == "N":
                obj_row = rname
            elif code in ("L", "G", "E"):
                row_sense[rname] = {"L": "<=", "G": ">=", "E": "="}[code]
                row_order.append(rname)
            else:
                raise ValueError(f"unknown row type {code}")
        elif section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1] == "'MARKER'":
                int_open = tokens[2] == "'INTORG'"
                continue
            cname = tokens[0]
            if cname not in col_ids:
                col_ids[cname] = len(col_ids)
                col_integer[cname] = int_open
                col_terms[cname] = []
            pairs = tokens[1:]
            for row, val in zip(pairs[::2], pairs[1::2]):
                coef = float(val)
                if row == obj_row:
                    obj_terms[cname] = obj_terms.get(cname, 0.0) + coef
                elif row in row_sense:
                    col_terms[cname].append((row, coef))
                else:
                    raise ValueError(f"unknown row reference {row!r}")
        elif section == "RHS":
            pairs = tokens[1:]
            for row, val in zip(pairs[::2], pairs[1::2]):
                if row != obj_row and row not in row_sense:
                    raise ValueError(f"unknown row reference {row!r}")
                rhs_map[row] = float(val)
        elif section == "BOUNDS":
            btype = tokens[0].upper()
            vname = tokens[2]
            if btype == "BV":
                bv.add(vname)
            elif btype == "LO":
                bounds_lo[vname] = float(tokens[3])
            elif btype == "UP":
                bounds_up[vname] = float(tokens[3])
            elif btype == "FX":
                bounds_lo[vname] = bounds_up[vname] = float(tokens[3])
            else:
                raise ValueError(f"unsupported bound type {btype}")
        elif section in ("NAME", "ENDATA"):
            continue
        else:
            raise ValueError(f"data line before any section: {ln!r}")

    if "ROWS" not in seen or "COLUMNS" not in seen:
        raise ValueError("MPS text missing ROWS or COLUMNS section")

    for cname, _ in sorted(col_ids.items(), key=lambda kv: kv[1]):
        if col_integer[cname] or cname in bv:
            lo = bounds_lo.get(cname, 0.0)
            up = bounds_up.get(cname, 1.0)
            if (lo, up) != (0.0, 1.0):
                raise ValueError(f"integer variable {cname}: only binary supported")
            problem.add_binary(cname)
        else:
            lo = bounds_lo.get(cname, 0.0)
            up = bounds_up.get(cname, math.inf)
            problem.add_continuous(cname, lo, up)

    for rname in row_order:
        expr = LinearExpr()
        for cname, cid in col_ids.items():
            for row, coef in col_terms[cname]:
                if row == rname:
                    expr.add_term(coef, cid)
        problem.add_constraint(expr.normalized(), row_sense[rname],
                               rhs_map.get(rname, 0.0), rname)

    obj = LinearExpr()
    for cname, coef in obj_terms.items():
        if coef != 0.0:
            obj.add_term(coef, col_ids[cname])
    obj.constant = -rhs_map.get(obj_row, 0.0) if obj_row else 0.0
    problem.add_objective(obj.normalized())
    return problem


def write_lp(problem: MilpProblem) -> str:
    """CPLEX-LP style text for eyeballing small problems."""
    vnames = _safe_names(v.name for v in problem.variables)

    def fmt(expr: LinearExpr) -> str:
        parts = []
        for coef, var in expr.normalized().terms:
            sign = "-" if coef < 0 else ("+" if parts else "")
            mag = abs(coef)
            piece = vnames[var] if mag == 1.0 else f"{_num(mag)} {vnames[var]}"
            parts.append(f"{sign} {piece}".strip())
        return " ".join(parts) if parts else "0"

    out = ["Minimize", f" obj: {fmt(problem.objective)}"]
    if problem.objective.constant:
        out[-1] += f" + {_num(problem.objective.constant)}"
    out.append("Subject To")
    op = {"<=": "<=", ">=": ">=", "=": "="}
    for i, con in enumerate(problem.constraints):
        rhs = con.rhs - con.expr.constant
        out.append(f" c{i}: {fmt(con.expr)} {op[con.sense]} {_num(rhs)}")
    out.append("Bounds")
    for var, vname in zip(problem.variables, vnames):
        if isinstance(var.domain, Continuous):
            out.append(f" {_num(var.domain.lower)} <= {vname} <= {_num(var.domain.upper)}")
    binaries = [vnames[v.id] for v in problem.variables
                if isinstance(v.domain, Binary)]
    if binaries:
        out.append("Binary")
        out.append(" " + " ".join(binaries))
    out.append("End")
    return "\n".join(out) + "\n"
