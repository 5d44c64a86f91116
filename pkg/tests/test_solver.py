import sys
import textwrap

import pytest

from joinmilp import (FormulationConfig, JoinGraphKind, LinearExpr,
                      MilpProblem, SolverConfig, SolverError, ThresholdLadder,
                      compile_query, external_solve, generate_random_query,
                      lp_relax, optimize_bruteforce, solve)


def knapsack():
    """max 5a+4b+3c s.t. 2a+3b+c <= 3, binaries -> minimize the negation."""
    p = MilpProblem("knapsack")
    a, b, c = (p.add_binary(n) for n in "abc")
    p.add_constraint(LinearExpr([(2.0, a), (3.0, b), (1.0, c)]), "<=", 3.0)
    p.add_objective(LinearExpr([(-5.0, a), (-4.0, b), (-3.0, c)]))
    return p


def join_problem(n=4, seed=0):
    q = generate_random_query(n, JoinGraphKind.CHAIN, seed=seed,
                              card_range=(2, 40), sel_range=(0.2, 1.0))
    ladder = ThresholdLadder.geometric(3.0, q.total_cardinality())
    return q, compile_query(q, FormulationConfig(ladder=ladder))


def test_lp_relax_bounds_the_milp():
    p = knapsack()
    rel = lp_relax(p)
    report = solve(p)
    assert report.status == "optimal"
    assert report.objective == pytest.approx(-8.0)  # a + c
    assert rel.objective <= report.objective + 1e-9
    assert [round(v) for v in report.values] == [1, 0, 1]


def test_infeasible_detected():
    p = MilpProblem()
    x = p.add_continuous("x", 0.0, 1.0)
    p.add_constraint(LinearExpr([(1.0, x)]), ">=", 2.0)
    report = solve(p)
    assert report.status == "infeasible"
    assert report.values is None


def test_solver_matches_bruteforce_on_join_instances():
    for seed in range(3):
        q, milp = join_problem(4, seed)
        report = solve(milp.problem, SolverConfig(time_limit=30))
        assert report.status == "optimal"
        _, best = optimize_bruteforce(q)
        # the rung-floor approximation can only undershoot the true optimum
        assert report.objective <= best + 1e-6


def test_determinism():
    _, milp = join_problem(4, seed=5)
    r1 = solve(milp.problem, SolverConfig(time_limit=30, seed=3))
    r2 = solve(milp.problem, SolverConfig(time_limit=30, seed=3))
    assert r1.objective == r2.objective
    assert r1.values == r2.values
    assert r1.nodes == r2.nodes


@pytest.mark.parametrize("selection", ["best", "depth"])
@pytest.mark.parametrize("rule", ["most_fractional", "first_fractional"])
def test_search_options_agree(selection, rule):
    _, milp = join_problem(4, seed=2)
    report = solve(milp.problem,
                   SolverConfig(time_limit=30, node_selection=selection,
                                branch_rule=rule))
    baseline = solve(milp.problem, SolverConfig(time_limit=30))
    assert report.status == "optimal"
    assert report.objective == pytest.approx(baseline.objective, abs=1e-7)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(node_selection="bogus")
    with pytest.raises(ValueError):
        SolverConfig(branch_rule="bogus")
    with pytest.raises(ValueError):
        SolverConfig(time_limit=0)


def test_callback_and_trace():
    seen = []
    _, milp = join_problem(4, seed=1)
    report = solve(milp.problem,
                   SolverConfig(time_limit=30, trace_interval=0.0,
                                callback=lambda e, inc, lb: seen.append((e, inc, lb))))
    assert report.status == "optimal"
    assert seen, "callback never fired"
    assert report.trace, "trace is empty"
    for elapsed, inc, lb in report.trace:
        if inc is not None and lb is not None:
            assert lb <= inc + 1e-6


def test_time_limit_times_out():
    _, milp = join_problem(7, seed=0)
    report = solve(milp.problem, SolverConfig(time_limit=0.05))
    assert report.status in ("timed_out", "feasible", "optimal")
    assert report.elapsed <= 5.0
    if report.status == "timed_out" and report.values is not None:
        assert report.lower_bound <= report.objective + 1e-6


def test_node_limit():
    _, milp = join_problem(5, seed=4)
    report = solve(milp.problem,
                   SolverConfig(time_limit=60, node_limit=1, heuristics=False))
    assert report.nodes <= 2
    assert report.status in ("timed_out", "feasible")


# -- external solver bridge ---------------------------------------------------

SELF_ADAPTER = f"{sys.executable} -m joinmilp.bench_cli solve-mps {{in}} {{out}}"


def test_external_solve_round_trip():
    p = knapsack()
    sol = external_solve(p, SELF_ADAPTER, timeout=120)
    assert sol.status == "feasible"
    assert sol.objective == pytest.approx(-8.0)
    assert p.check_solution(sol.values) == []


def test_external_solve_rejects_missing_output(tmp_path):
    p = knapsack()
    with pytest.raises(SolverError, match="no output"):
        external_solve(p, f"{sys.executable} -c pass", timeout=60)


def test_external_solve_rejects_infeasible_claims(tmp_path):
    cheat = tmp_path / "cheat.py"
    cheat.write_text(textwrap.dedent("""
        import sys
        with open(sys.argv[2], "w") as f:
            f.write("# bogus claim\\na 1\\nb 1\\nc 1\\n")
    """))
    p = knapsack()
    with pytest.raises(SolverError, match="infeasible"):
        external_solve(p, f"{sys.executable} {cheat} {{in}} {{out}}", timeout=60)


def test_external_solve_rejects_failing_command():
    p = knapsack()
    with pytest.raises(SolverError, match="failed"):
        external_solve(p, f"{sys.executable} -c 'raise SystemExit(3)' "
                          "{in} {out}", timeout=60)
