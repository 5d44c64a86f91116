"""Benchmark and utility command line for the join-order MILP package.

Subcommands: generate random queries, formulate (MPS export), solve with
the internal branch-and-bound (or an external solver command), dp for the
classical dynamic-programming optimum, compare to produce a CSV of solver
quality against ground truth, and solve-mps so this package can itself act
as an external solver over MPS files.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .baseline import CostModelExact, exact_plan_cost, optimize_dp
from .formulation import (CostModel, FormulationConfig, ThresholdLadder,
                          branch_priorities, compile_query)
from .milp_core import import_mps
from .plan_decode import decode
from .query_model import (Query, classify_join_graph, generate_random_query,
                          query_from_json, query_to_json)
from .solver import SolverConfig, external_solve, solve

EXTERNAL_SOLVER_ENV = "JOINMILP_EXTERNAL_SOLVER"

EXIT_CODES = {"optimal": 0, "feasible": 2, "timed_out": 3, "infeasible": 4}

CSV_FIELDS = ["query_id", "kind", "n", "method", "preset", "elapsed_s",
              "incumbent", "lower_bound", "cost_over_lb", "true_cost",
              "status"]


@dataclass(frozen=True)
class PrecisionPreset:
    """Approximation precision: the threshold ladder ratio bounds how far
    the floored cardinalities sit below the truth."""

    name: str
    ratio: float


PRESETS = {
    "high": PrecisionPreset("high", 3.0),
    "medium": PrecisionPreset("medium", 10.0),
    "low": PrecisionPreset("low", 100.0),
}

COST_MODELS = {
    "cout": CostModel.COUT,
    "hash": CostModel.HASH_JOIN,
    "sortmerge": CostModel.SORT_MERGE,
    "bnl": CostModel.BNL,
    "choice": CostModel.OPERATOR_CHOICE,
}


def make_config(query: Query, preset: PrecisionPreset,
                cost_model: CostModel = CostModel.COUT) -> FormulationConfig:
    """Configuration whose ladder covers the query's maximal join result."""
    ladder = ThresholdLadder.geometric(preset.ratio, query.total_cardinality())
    return FormulationConfig(ladder=ladder, cost_model=cost_model)


def _load_query(path: str) -> Query:
    return query_from_json(Path(path).read_text())


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        q = generate_random_query(args.n, args.kind, seed=args.seed + i,
                                  card_range=(args.min_card, args.max_card))
        path = outdir / f"query_{args.kind}_n{args.n}_{i:03d}.json"
        path.write_text(query_to_json(q))
        print(path)
    return 0


def cmd_formulate(args) -> int:
    from .milp_core import export_mps

    query = _load_query(args.query)
    config = make_config(query, PRESETS[args.preset], COST_MODELS[args.cost_model])
    milp = compile_query(query, config)
    mps = export_mps(milp.problem)
    if args.out:
        Path(args.out).write_text(mps)
        if args.registry:
            Path(args.registry).write_text(
                json.dumps(milp.registry.to_sidecar(milp.problem), indent=2))
    else:
        sys.stdout.write(mps)
    print(f"# variables={milp.problem.num_variables()} "
          f"constraints={milp.problem.num_constraints()}", file=sys.stderr)
    return 0


def cmd_solve(args) -> int:
    query = _load_query(args.query)
    config = make_config(query, PRESETS[args.preset], COST_MODELS[args.cost_model])
    milp = compile_query(query, config)

    external = args.external or os.environ.get(EXTERNAL_SOLVER_ENV)
    trace = []
    if external:
        sol = external_solve(milp.problem, external, timeout=args.time_limit)
        status, incumbent, lb = sol.status, sol.objective, -math.inf
        values = sol.values
        elapsed = float("nan")
    else:
        report = solve(milp.problem, SolverConfig(
            time_limit=args.time_limit, trace_interval=1.0,
            branch_priority=branch_priorities(milp)))
        status, incumbent, lb = report.status, report.objective, report.lower_bound
        values = report.values
        elapsed = report.elapsed
        trace = report.trace

    out = {"status": status, "objective": incumbent,
           "lower_bound": None if lb == -math.inf else lb,
           "elapsed_s": elapsed}
    if values is not None:
        plan = decode(milp, report.solution() if not external else sol)
        out["plan"] = plan.to_dict(query)
        out["true_cost"] = exact_plan_cost(
            query, plan.order, config.cost_model, operators=plan.operators,
            evaluated_at=plan.evaluated_at,
            exact=CostModelExact.from_config(config))
    print(json.dumps(out, indent=2))
    if args.trace and trace:
        with open(args.trace, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["elapsed_s", "incumbent", "lower_bound", "cost_over_lb"])
            for t, inc, bnd in trace:
                if math.isinf(inc):
                    w.writerow([t, "", bnd, ""])
                else:
                    ratio = inc / bnd if bnd > 0 else ""
                    w.writerow([t, inc, bnd, ratio])
    return EXIT_CODES.get(status, 1)


def cmd_dp(args) -> int:
    query = _load_query(args.query)
    order, cost, operators = optimize_dp(query, COST_MODELS[args.cost_model])
    out = {"order": [query.tables[t].name for t in order], "cost": cost}
    if operators:
        out["operators"] = [op.value for op in operators]
    print(json.dumps(out, indent=2))
    return 0


def _compare_one(task) -> list[dict]:
    n, kind, seed, preset_name, time_limit, cost_model_name = task
    preset = PRESETS[preset_name]
    cost_model = COST_MODELS[cost_model_name]
    query = generate_random_query(n, kind, seed=seed)
    qid = f"{kind}_n{n}_s{seed}"
    rows = []

    true_cost = ""
    ratio = ""
    try:
        config = make_config(query, preset, cost_model)
        milp = compile_query(query, config)
        report = solve(milp.problem, SolverConfig(
            time_limit=time_limit, trace_interval=1.0,
            branch_priority=branch_priorities(milp)))
        if report.values is not None:
            plan = decode(milp, report.solution())
            true_cost = exact_plan_cost(
                query, plan.order, cost_model, operators=plan.operators,
                exact=CostModelExact.from_config(config))
            if report.lower_bound > 0:
                ratio = true_cost / report.lower_bound
        rows.append({
            "query_id": qid, "kind": classify_join_graph(query), "n": n,
            "method": "milp", "preset": preset_name,
            "elapsed_s": round(report.elapsed, 3),
            "incumbent": report.objective if report.values is not None else "",
            "lower_bound": report.lower_bound, "cost_over_lb": ratio,
            "true_cost": true_cost, "status": report.status,
        })
    except Exception as exc:  # failures become rows, not batch aborts
        rows.append({
            "query_id": qid, "kind": classify_join_graph(query), "n": n,
            "method": "milp", "preset": preset_name, "elapsed_s": "",
            "incumbent": "", "lower_bound": "", "cost_over_lb": "",
            "true_cost": "", "status": f"error: {exc}",
        })

    if n <= 30:
        import time as _time
        t0 = _time.monotonic()
        order, dp_cost, operators = optimize_dp(query, cost_model)
        dp_elapsed = _time.monotonic() - t0
        rows.append({
            "query_id": qid, "kind": classify_join_graph(query), "n": n,
            "method": "dp", "preset": preset_name,
            "elapsed_s": round(dp_elapsed, 3), "incumbent": "",
            "lower_bound": "", "cost_over_lb": "", "true_cost": dp_cost,
            "status": "optimal",
        })
    return rows


def cmd_compare(args) -> int:
    tasks = [(args.n, args.kind, args.seed + i, args.preset,
              args.time_limit, args.cost_model)
             for i in range(args.count)]
    all_rows = []
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            for rows in pool.map(_compare_one, tasks):
                all_rows.extend(rows)
    else:
        for task in tasks:
            all_rows.extend(_compare_one(task))

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=CSV_FIELDS)
        w.writeheader()
        w.writerows(all_rows)
    finally:
        if args.out:
            out.close()
    return 0


def cmd_solve_mps(args) -> int:
    """Solve an arbitrary MPS file and write "name value" solution lines."""
    problem = import_mps(Path(args.input).read_text())
    report = solve(problem, SolverConfig(time_limit=args.time_limit))
    if report.values is None:
        print(f"no solution: {report.status}", file=sys.stderr)
        return EXIT_CODES.get(report.status, 1)
    lines = [f"# objective {report.objective}", f"# status {report.status}"]
    for var, val in zip(problem.variables, report.values):
        lines.append(f"{var.name} {val:.12g}")
    Path(args.output).write_text("\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="joinmilp",
                                description=__doc__.strip().splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add_common_solve(sp):
        sp.add_argument("--preset", choices=PRESETS, default="medium")
        sp.add_argument("--cost", dest="cost_model", choices=COST_MODELS,
                        default="cout")
        sp.add_argument("--time-limit", type=float, default=60.0)

    g = sub.add_parser("generate", help="write random query JSON files")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--kind", choices=["chain", "star", "cycle"], default="chain")
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--min-card", type=float, default=10.0)
    g.add_argument("--max-card", type=float, default=1e5)
    g.add_argument("--out", default="queries")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("formulate", help="compile a query and export MPS")
    f.add_argument("--query", required=True)
    f.add_argument("--out", default=None)
    f.add_argument("--registry", default=None,
                   help="also write the variable-key sidecar JSON")
    add_common_solve(f)
    f.set_defaults(func=cmd_formulate)

    s = sub.add_parser("solve", help="optimize a query via the MILP")
    s.add_argument("--query", required=True)
    s.add_argument("--external-solver", dest="external", default=None,
                   help="external solver command with {in}/{out} placeholders "
                        f"(or set ${EXTERNAL_SOLVER_ENV})")
    s.add_argument("--trace", default=None, help="write anytime trace CSV here")
    add_common_solve(s)
    s.set_defaults(func=cmd_solve)

    d = sub.add_parser("dp", help="classical dynamic-programming optimum")
    d.add_argument("--query", required=True)
    d.add_argument("--cost", dest="cost_model", choices=COST_MODELS,
                   default="cout")
    d.set_defaults(func=cmd_dp)

    c = sub.add_parser("compare", help="benchmark MILP against DP, CSV out")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--kind", choices=["chain", "star", "cycle"], default="chain")
    c.add_argument("--count", type=int, default=20)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--out", default=None)
    add_common_solve(c)
    c.set_defaults(func=cmd_compare)

    m = sub.add_parser("solve-mps", help="solve an MPS file, write name/value "
                                         "solution lines")
    m.add_argument("input")
    m.add_argument("output")
    m.add_argument("--time-limit", type=float, default=300.0)
    m.set_defaults(func=cmd_solve_mps)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
