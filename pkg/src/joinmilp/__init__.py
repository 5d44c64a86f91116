"""Join ordering via mixed integer linear programming.

Queries over a join graph are compiled into a MILP whose optimum encodes a
cost-minimal left-deep plan; an internal branch-and-bound solver, classical
dynamic-programming baselines, and plan decoding round out the toolkit.
"""

from .baseline import (CostModelExact, exact_plan_cost, optimize_bruteforce,
                       optimize_dp)
from .formulation import (CostModel, Extensions, FormulationConfig,
                          JoinOrderMilp, ThresholdLadder, VarRegistry,
                          branch_priorities, compile_query, count_model)
from .milp_core import (BINARY, Binary, Constraint, Continuous, LinearExpr,
                        MilpProblem, Solution, Variable, export_mps,
                        import_mps, linearize_product, write_lp)
from .plan_decode import (LeftDeepPlan, approximation_report, decode, encode,
                          validate)
from .query_model import (Column, CorrelatedGroup, JoinGraphKind, Predicate,
                          Query, Table, classify_join_graph,
                          generate_random_query, query_from_dict,
                          query_from_json, query_to_dict, query_to_json,
                          true_cardinality)
from .solver import (SolveReport, SolverConfig, SolverError, external_solve,
                     lp_relax, solve)

__all__ = [
    "BINARY", "Binary", "Column", "Constraint", "Continuous", "CorrelatedGroup",
    "CostModel", "CostModelExact", "Extensions", "FormulationConfig",
    "JoinGraphKind", "JoinOrderMilp", "LeftDeepPlan", "LinearExpr",
    "MilpProblem", "Predicate", "Query", "Solution", "SolveReport",
    "SolverConfig", "SolverError", "Table", "ThresholdLadder", "VarRegistry",
    "approximation_report", "branch_priorities", "classify_join_graph",
    "compile_query",
    "count_model", "decode", "encode", "exact_plan_cost", "export_mps",
    "external_solve", "generate_random_query", "import_mps",
    "linearize_product", "lp_relax", "optimize_bruteforce", "optimize_dp",
    "query_from_dict", "query_from_json", "query_to_dict", "query_to_json",
    "solve", "true_cardinality", "validate", "write_lp",
]

__version__ = "0.1.0"
