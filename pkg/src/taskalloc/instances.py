"""Bundled demonstration instances with known solutions.

Four instances ship with the package so the solver, the replicator
simulation, and the verifiers can be exercised without input files:

* ``fig2``: six agents on a ring with one cross-link, exponential costs,
  zero lower bounds. The equal-fitness point lies inside every box, and
  it has the closed form w_i = upper_i * w / sum(upper) because each
  marginal is exp(w_i / upper_i) here.
* ``fig3``: same graph, quadratic costs with tight boxes; the
  equal-marginal point is interior and solvable in closed form.
* ``tab1``: three agents on a path, exponential costs. The equal-fitness
  point violates agent 1's upper bound, so the optimum clamps it; the
  reference data includes the breakpoint table, built from 3-decimal keys.
* ``tab3``: same shape with quadratic costs; reference table included.

Reference entries carry the expected values and the tolerances the
``reproduce`` command checks them at.
"""

from dataclasses import dataclass

import numpy as np

from .costs import exponential, quadratic_from_vertex_form
from .errors import UnknownExampleError
from .graph import from_edge_list
from .problem import AllocationProblem


@dataclass(frozen=True)
class BundledInstance:
    instance_id: str
    description: str
    problem: AllocationProblem
    drd_step: float | None  # suggested simulation step, where meaningful
    table_decimals: int | None  # key quantization the reference table was built with
    reference: dict


_RING6_EDGES = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)]
_PATH3_EDGES = [(0, 1), (1, 2)]


def _fig2() -> BundledInstance:
    uppers = [750.0, 800.0, 1400.0, 1000.0, 900.0, 1700.0]
    total = 2800.0
    agents = tuple(exponential(a=u, lower=0.0, upper=u) for u in uppers)
    p = AllocationProblem(
        graph=from_edge_list(6, _RING6_EDGES), agents=agents, total=total
    )
    # equal fitness <=> equal w_i/upper_i, so the optimum is proportional
    expected = np.array(uppers) * total / sum(uppers)
    return BundledInstance(
        instance_id="fig2",
        description="six agents, exponential costs, interior optimum",
        problem=p,
        drd_step=1e-4,
        table_decimals=None,
        reference={"allocation": expected, "allocation_tol": 0.5},
    )


def _fig3() -> BundledInstance:
    lowers = np.array([700.0, 350.0, 200.0, 50.0, 40.0, 200.0])
    uppers = np.array([980.0, 580.0, 350.0, 170.0, 150.0, 790.0])
    a = np.array([0.006, 0.008, 0.01, 0.012, 0.0132, 0.00136])
    b = np.array([0.4, 0.2, 0.5, 0.56, 0.828, 0.88])
    total = 2800.0
    agents = tuple(
        quadratic_from_vertex_form(
            coeff=a[i] / 2.0, linear=b[i], lower=lowers[i], upper=uppers[i]
        )
        for i in range(6)
    )
    p = AllocationProblem(
        graph=from_edge_list(6, _RING6_EDGES), agents=agents, total=total
    )
    # equal marginal lam: sum(lo_i + (lam - b_i)/a_i) = w
    lam = (total - lowers.sum() + (b / a).sum()) / (1.0 / a).sum()
    expected = lowers + (lam - b) / a
    return BundledInstance(
        instance_id="fig3",
        description="six agents, quadratic costs, interior optimum",
        problem=p,
        drd_step=1e-3,
        table_decimals=None,
        reference={"allocation": expected, "allocation_tol": 0.5, "level": lam},
    )


def _tab1() -> BundledInstance:
    agents = (
        exponential(a=1000.0, lower=200.0, upper=350.0),
        exponential(a=1900.0, lower=350.0, upper=480.0),
        exponential(a=2300.0, lower=410.0, upper=540.0),
    )
    p = AllocationProblem(
        graph=from_edge_list(3, _PATH3_EDGES), agents=agents, total=1150.0
    )
    return BundledInstance(
        instance_id="tab1",
        description="three agents, exponential costs, clamped optimum",
        problem=p,
        drd_step=None,
        table_decimals=3,
        reference={
            # per-agent clamp thresholds in the log coordinate
            "keys_lower": [1.897, 2.682, 2.873],
            "keys_upper": [2.897, 3.682, 3.873],
            "keys_sorted": [1.897, 2.682, 2.873, 2.897, 3.682, 3.873],
            "masses": [960.0, 1077.732, 1131.202, 1141.043, 1345.153, 1370.0],
            "slopes": [6.6677e-3, 3.5721e-3, 2.4388e-3, 3.8460e-3, 7.6870e-3],
            "allocation": np.array([350.0, 382.4, 417.6]),
            "key_tol": 1e-3,
            "mass_tol": 0.01,
            "slope_tol": 1e-6,
            "allocation_tol": 0.1,
        },
    )


def _tab3() -> BundledInstance:
    agents = (
        quadratic_from_vertex_form(coeff=0.003, linear=5.0, lower=200.0, upper=350.0),
        quadratic_from_vertex_form(coeff=0.004, linear=5.4, lower=350.0, upper=480.0),
        quadratic_from_vertex_form(coeff=0.005, linear=5.6, lower=410.0, upper=540.0),
    )
    p = AllocationProblem(
        graph=from_edge_list(3, _PATH3_EDGES), agents=agents, total=1150.0
    )
    return BundledInstance(
        instance_id="tab3",
        description="three agents, quadratic costs, interior optimum at clamp edge",
        problem=p,
        drd_step=None,
        table_decimals=3,
        reference={
            "keys_lower": [5.0, 5.4, 5.6],
            "keys_upper": [5.9, 6.44, 6.9],
            "keys_sorted": [5.0, 5.4, 5.6, 5.9, 6.44, 6.9],
            "masses": [960.0, 1026.667, 1085.0, 1202.5, 1324.0, 1370.0],
            "slopes": [6.0e-3, 3.4286e-3, 2.5532e-3, 4.4444e-3, 10.0e-3],
            "allocation": np.array([327.7, 395.7, 426.6]),
            "key_tol": 0.01,
            "mass_tol": 0.01,
            "slope_tol": 1e-6,
            "allocation_tol": 0.1,
        },
    )


_BUILDERS = {"fig2": _fig2, "fig3": _fig3, "tab1": _tab1, "tab3": _tab3}


def instance_ids() -> list[str]:
    return sorted(_BUILDERS)


def get_instance(instance_id: str) -> BundledInstance:
    try:
        builder = _BUILDERS[instance_id]
    except KeyError:
        raise UnknownExampleError(instance_id, instance_ids()) from None
    return builder()
