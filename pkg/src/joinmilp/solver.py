"""Branch-and-bound MILP solver on top of LP relaxations.

LP relaxations are solved with scipy's HiGHS interface; the integer search
(branching, bounding, incumbent heuristics, anytime trace) lives here.
Also provides a bridge to an external MILP solver via MPS files.
"""

from __future__ import annotations

import heapq
import math
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .milp_core import Binary, MilpProblem, Solution, export_mps


class SolverError(Exception):
    pass


@dataclass
class SolverConfig:
    time_limit: float = 60.0
    gap_tolerance: float = 1e-6
    node_limit: int | None = None
    node_selection: str = "best"  # "best" (bound-first) or "depth" (DFS)
    branch_rule: str = "most_fractional"  # or "first_fractional"
    # optional variable id -> (tier, weight); branching considers the highest
    # tier containing a fractional binary and picks max fractionality*weight
    # within it (lets callers prioritize structurally decisive binaries)
    branch_priority: dict | None = None
    seed: int = 0
    heuristics: bool = True
    trace_interval: float = 1.0
    integrality_tol: float = 1e-6
    callback: object = None  # callable(elapsed, incumbent, bound) or None

    def __post_init__(self):
        if self.node_selection not in ("best", "depth"):
            raise ValueError("node_selection must be 'best' or 'depth'")
        if self.branch_rule not in ("most_fractional", "first_fractional"):
            raise ValueError("branch_rule must be 'most_fractional' or "
                             "'first_fractional'")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")


@dataclass
class SolveReport:
    status: str  # "optimal" | "feasible" | "infeasible" | "timed_out"
    objective: float
    lower_bound: float
    gap: float | None
    values: list[float] | None
    nodes: int
    elapsed: float
    trace: list[tuple[float, float, float]] = field(default_factory=list)

    def solution(self) -> Solution:
        return Solution(self.values, self.objective, self.status, self.gap)


class _LpData:
    """Constraint matrices, bounds and objective vector built once per
    problem; node LPs only swap variable bounds."""

    def __init__(self, problem: MilpProblem):
        self.problem = problem
        nvars = problem.num_variables()
        self.c = np.zeros(nvars)
        for coef, var in problem.objective.normalized().terms:
            self.c[var] = coef
        self.c0 = problem.objective.constant

        ub_rows, ub_cols, ub_vals, self.b_ub = [], [], [], []
        eq_rows, eq_cols, eq_vals, self.b_eq = [], [], [], []
        for con in problem.constraints:
            expr = con.expr.normalized()
            rhs = con.rhs - expr.constant
            if con.sense == "=":
                r = len(self.b_eq)
                for coef, var in expr.terms:
                    eq_rows.append(r)
                    eq_cols.append(var)
                    eq_vals.append(coef)
                self.b_eq.append(rhs)
            else:
                sign = 1.0 if con.sense == "<=" else -1.0
                r = len(self.b_ub)
                for coef, var in expr.terms:
                    ub_rows.append(r)
                    ub_cols.append(var)
                    ub_vals.append(sign * coef)
                self.b_ub.append(sign * rhs)

        def mat(rows, cols, vals, nr):
            if nr == 0:
                return None
            return sparse.csr_matrix((vals, (rows, cols)), shape=(nr, nvars))

        self.A_ub = mat(ub_rows, ub_cols, ub_vals, len(self.b_ub))
        self.A_eq = mat(eq_rows, eq_cols, eq_vals, len(self.b_eq))
        self.b_ub = np.array(self.b_ub) if self.b_ub else None
        self.b_eq = np.array(self.b_eq) if self.b_eq else None
        self.base_bounds = [problem.bounds(v.id) for v in problem.variables]
        self.binaries = [v.id for v in problem.variables
                         if isinstance(v.domain, Binary)]

    def solve(self, fixings: dict[int, float] | None = None):
        """LP relaxation under optional variable fixings.

        Returns (objective, x) or (inf, None) when infeasible."""
        bounds = self.base_bounds
        if fixings:
            bounds = list(bounds)
            for vid, val in fixings.items():
                bounds[vid] = (val, val)
        res = linprog(self.c, A_ub=self.A_ub, b_ub=self.b_ub,
                      A_eq=self.A_eq, b_eq=self.b_eq, bounds=bounds,
                      method="highs")
        if res.status == 0:
            return res.fun + self.c0, res.x
        if "Model error" in (res.message or ""):
            raise SolverError(
                "LP backend rejected the model (coefficients too large; "
                "keep the ladder's cardinality coverage below ~1e15)")
        if res.status == 4:
            raise SolverError(f"LP backend numerical failure: {res.message}")
        return math.inf, None


def lp_relax(problem: MilpProblem) -> Solution:
    """Root LP relaxation (integrality dropped)."""
    data = _LpData(problem)
    obj, x = data.solve()
    if x is None:
        return Solution(None, math.inf, "infeasible")
    return Solution(list(x), obj, "optimal")


def _most_fractional(data: _LpData, x, tol: float):
    """Binary farthest from integrality, or None if all integral."""
    best, best_frac = None, tol
    for vid in data.binaries:
        frac = min(abs(x[vid]), abs(x[vid] - 1.0))
        if frac > best_frac:
            best, best_frac = vid, frac
    return best


def _pick_branch(data: _LpData, x, config: SolverConfig):
    """Branching variable under the configured rule, or None if integral."""
    tol = config.integrality_tol
    if config.branch_rule == "first_fractional":
        for vid in data.binaries:
            if min(abs(x[vid]), abs(x[vid] - 1.0)) > tol:
                return vid
        return None
    prio = config.branch_priority
    if not prio:
        return _most_fractional(data, x, tol)
    best, best_key = None, None
    for vid in data.binaries:
        frac = min(abs(x[vid]), abs(x[vid] - 1.0))
        if frac <= tol:
            continue
        tier, weight = prio.get(vid, (0, 1.0))
        key = (tier, frac * weight)
        if best_key is None or key > best_key:
            best, best_key = vid, key
    return best


def _round_up_completion(data: _LpData, x, fixings, tol):
    """Fix every binary (fractional values rounded up) and re-solve the LP
    over the continuous variables. Returns (objective, values) or None."""
    fixed = dict(fixings) if fixings else {}
    for vid in data.binaries:
        if vid in fixed:
            continue
        v = x[vid]
        fixed[vid] = 0.0 if v <= tol else 1.0
    obj, xs = data.solve(fixed)
    if xs is None:
        return None
    return obj, list(xs)


def _dive(data: _LpData, x0, obj0, deadline, config: SolverConfig):
    """Root diving heuristic: repeatedly fix the most fractional binary to
    its rounded value (flipping on infeasibility), attempting a round-up
    completion at every step. Returns (objective, values) or None."""
    tol = config.integrality_tol
    fixings: dict[int, float] = {}
    x, obj = x0, obj0
    best = None
    flips = 0
    for _ in range(len(data.binaries) + 8):
        if time.monotonic() > deadline:
            break
        cand = _round_up_completion(data, x, fixings, tol)
        if cand is not None and (best is None or cand[0] < best[0]):
            best = cand
        branch = _pick_branch(data, x, config)
        if branch is None:
            if best is None or obj < best[0]:
                best = (obj, list(x))
            break
        val = 1.0 if x[branch] >= 0.5 else 0.0
        fixings[branch] = val
        obj, x_new = data.solve(fixings)
        if x_new is None:
            flips += 1
            if flips > 3:
                break
            fixings[branch] = 1.0 - val
            obj, x_new = data.solve(fixings)
            if x_new is None:
                break
        x = x_new
    return best


def solve(problem: MilpProblem, config: SolverConfig | None = None) -> SolveReport:
    """Branch and bound over LP relaxations.

    Nodes carry variable fixings; bounds are inherited lazily from the
    parent LP. Branching picks the most fractional binary. The trace
    records (elapsed seconds, incumbent, global lower bound) samples.
    """
    config = config or SolverConfig()
    tol = config.integrality_tol
    start = time.monotonic()
    deadline = start + config.time_limit
    data = _LpData(problem)

    trace: list[tuple[float, float, float]] = []
    incumbent = math.inf
    incumbent_x: list[float] | None = None
    global_lb = -math.inf
    last_sample = -math.inf

    def record(force=False):
        nonlocal last_sample, global_lb
        now = time.monotonic() - start
        if not force and now - last_sample < config.trace_interval:
            return
        lb = min(global_lb, incumbent)
        trace.append((now, incumbent, lb))
        last_sample = now
        if config.callback is not None:
            config.callback(now, incumbent, lb)

    def accept(obj, xs):
        nonlocal incumbent, incumbent_x
        if obj < incumbent - 1e-12:
            incumbent = obj
            incumbent_x = xs
            record(force=True)

    root_obj, root_x = data.solve()
    if root_x is None:
        return SolveReport("infeasible", math.inf, math.inf, None, None, 0,
                           time.monotonic() - start, trace)
    global_lb = root_obj

    if config.heuristics:
        dived = _dive(data, root_x, root_obj, deadline, config)
        if dived is not None:
            accept(*dived)

    counter = 0
    # entries: (bound, tiebreak, fixings)
    open_nodes: list = [(root_obj, counter, {})]
    nodes_explored = 0
    status = None

    def prune_bound():
        return incumbent - 1e-9 * max(1.0, abs(incumbent))

    while open_nodes:
        if time.monotonic() > deadline:
            status = "timed_out"
            break
        if config.node_limit is not None and nodes_explored >= config.node_limit:
            status = "feasible" if incumbent_x is not None else "timed_out"
            break
        if config.node_selection == "best":
            bound, _, fixings = heapq.heappop(open_nodes)
            global_lb = max(global_lb, min(bound, incumbent))
        else:
            bound, _, fixings = open_nodes.pop()
        if bound >= prune_bound():
            continue
        obj, x = data.solve(fixings)
        nodes_explored += 1
        record()
        if x is None or obj >= prune_bound():
            continue
        branch = _pick_branch(data, x, config)
        if branch is None:
            accept(obj, list(x))
            if config.node_selection == "best" and open_nodes:
                global_lb = max(global_lb, min(open_nodes[0][0], incumbent))
            gap = (incumbent - global_lb) / max(abs(incumbent), 1.0)
            if config.node_selection == "best" and gap <= config.gap_tolerance:
                status = "optimal"
                break
            continue
        if config.heuristics and all(
                x[v] < 0.5 or x[v] > 1.0 - tol for v in data.binaries):
            cand = _round_up_completion(data, x, fixings, tol)
            if cand is not None:
                accept(*cand)
        for val in (0.0, 1.0):
            child = dict(fixings)
            child[branch] = val
            counter += 1
            if config.node_selection == "best":
                heapq.heappush(open_nodes, (obj, counter, child))
            else:
                open_nodes.append((obj, counter, child))

    elapsed = time.monotonic() - start
    if status is None:
        # search space exhausted
        status = "optimal" if incumbent_x is not None else "infeasible"
    if status == "optimal":
        global_lb = incumbent
    lb = min(global_lb, incumbent)
    gap = None
    if incumbent_x is not None:
        gap = max(0.0, (incumbent - lb) / max(abs(incumbent), 1.0))
    record(force=True)
    return SolveReport(status, incumbent, lb, gap, incumbent_x,
                       nodes_explored, elapsed, trace)


def external_solve(problem: MilpProblem, command_template: str,
                   timeout: float = 300.0) -> Solution:
    """Solve through an external command.

    The template's {in} and {out} placeholders are replaced with paths to
    an MPS input file and a solution output file. The output must contain
    "name value" lines ('#' starts a comment); variables left out default
    to 0. The returned point is validated against the problem before being
    trusted; its status is "feasible" (optimality is the external solver's
    claim, not ours).
    """
    from .milp_core import _safe_names

    with tempfile.TemporaryDirectory(prefix="joinmilp_") as tmp:
        inpath = Path(tmp) / "problem.mps"
        outpath = Path(tmp) / "solution.txt"
        inpath.write_text(export_mps(problem))
        cmd = command_template.format(**{"in": str(inpath), "out": str(outpath)})
        try:
            proc = subprocess.run(shlex.split(cmd), capture_output=True,
                                  text=True, timeout=timeout)
        except subprocess.TimeoutExpired as exc:
            raise SolverError(f"external solver timed out after {timeout}s") from exc
        if proc.returncode != 0:
            raise SolverError(
                f"external solver failed (rc={proc.returncode}): "
                f"{proc.stderr.strip()[:500]}")
        if not outpath.exists():
            raise SolverError("external solver produced no output file")
        text = outpath.read_text()

    name_to_vid = {n: v.id for n, v in
                   zip(_safe_names(v.name for v in problem.variables),
                       problem.variables)}
    values = [0.0] * problem.num_variables()
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        parts = ln.split()
        if len(parts) != 2:
            raise SolverError(f"malformed solution line: {ln!r}")
        name, val = parts
        if name not in name_to_vid:
            raise SolverError(f"unknown variable in solution: {name!r}")
        values[name_to_vid[name]] = float(val)

    issues = problem.check_solution(values)
    if issues:
        raise SolverError("external solution infeasible: " +
                          "; ".join(issues[:5]))
    obj = problem.objective.evaluate(values)
    return Solution(values, obj, "feasible")
