"""Box-constrained task allocation on agent graphs.

Library surface: build an :class:`AllocationProblem` from a graph and
per-agent cost models, then

* :func:`solve_lambda` for the clamped optimum (water-filling),
* :func:`simulate` for the distributed replicator dynamics,
* :func:`kkt_check` / :func:`monte_carlo_min` / :func:`grid_min` to
  verify optimality independently.
"""

from .costs import (
    EXPONENTIAL,
    QUADRATIC,
    CostModel,
    exponential,
    quadratic,
    quadratic_from_vertex_form,
)
from .drd import (
    DrdConfig,
    Trajectory,
    default_start,
    drd_step,
    local_mean_fitness,
    lyapunov_value,
    nash_residual,
    simulate,
    write_trace_csv,
)
from .graph import Graph, diameter, edge_list, from_edge_list, is_connected, neighbors
from .instances import BundledInstance, get_instance, instance_ids
from .lambda_solver import (
    Breakpoint,
    BreakpointTable,
    SolverResult,
    aggregate_allocation,
    allocate_from_lambda,
    breakpoints,
    compare_and_select,
    select_final,
    solve_lambda,
)
from .problem import (
    Allocation,
    AllocationProblem,
    in_feasible_set,
    in_simplex,
    load_problem,
    parse_problem,
    save_problem,
    serialize_problem,
    total_cost,
)
from .verify import KktCertificate, OracleResult, grid_min, is_nash, kkt_check, monte_carlo_min

__all__ = [
    "EXPONENTIAL",
    "QUADRATIC",
    "Allocation",
    "AllocationProblem",
    "Breakpoint",
    "BreakpointTable",
    "BundledInstance",
    "CostModel",
    "DrdConfig",
    "Graph",
    "KktCertificate",
    "OracleResult",
    "SolverResult",
    "Trajectory",
    "aggregate_allocation",
    "allocate_from_lambda",
    "breakpoints",
    "compare_and_select",
    "default_start",
    "diameter",
    "drd_step",
    "edge_list",
    "exponential",
    "from_edge_list",
    "get_instance",
    "grid_min",
    "in_feasible_set",
    "in_simplex",
    "instance_ids",
    "is_connected",
    "is_nash",
    "kkt_check",
    "load_problem",
    "local_mean_fitness",
    "lyapunov_value",
    "monte_carlo_min",
    "nash_residual",
    "neighbors",
    "parse_problem",
    "quadratic",
    "quadratic_from_vertex_form",
    "save_problem",
    "select_final",
    "serialize_problem",
    "simulate",
    "solve_lambda",
    "total_cost",
    "write_trace_csv",
]
