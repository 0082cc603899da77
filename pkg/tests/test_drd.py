import numpy as np
import pytest

from taskalloc.costs import quadratic
from taskalloc.drd import (
    DrdConfig,
    default_start,
    drd_step,
    local_mean_fitness,
    lyapunov_value,
    nash_residual,
    simulate,
    write_trace_csv,
)
from taskalloc.errors import NodeOutOfRangeError, StepOverflowError
from taskalloc.graph import from_edge_list
from taskalloc.problem import (
    AllocationProblem,
    fitness_values,
    in_simplex,
    marginals,
    total_cost,
)


def _two_identical_agents(total=100.0):
    agent = quadratic(a=0.01, b=1.0, lower=0.0, upper=100.0)
    return AllocationProblem(
        graph=from_edge_list(2, [(0, 1)]), agents=(agent, agent), total=total
    )


def _spread_instance(f0, f1, total=200.0):
    """Two agents whose fitness at load total/2 are exactly f0 and f1."""
    half = total / 2.0
    agents = tuple(
        quadratic(a=0.01, b=-f - 0.01 * half, lower=0.0, upper=2 * total)
        for f in (f0, f1)
    )
    return AllocationProblem(
        graph=from_edge_list(2, [(0, 1)]), agents=agents, total=total
    )


def test_local_mean_fitness_symmetric_pair():
    p = _two_identical_agents()
    w = np.array([50.0, 50.0])
    f_half = p.agents[1].fitness(50.0)
    # the neighbor sum excludes the agent itself (no self-loop)
    assert local_mean_fitness(p, w, 0) == pytest.approx(f_half * 0.5, rel=1e-12)


def test_local_mean_fitness_single_neighbor():
    agents = tuple(
        quadratic(a=0.01, b=1.0 + 0.1 * i, lower=0.0, upper=200.0) for i in range(3)
    )
    p = AllocationProblem(
        graph=from_edge_list(3, [(0, 1), (1, 2)]), agents=agents, total=150.0
    )
    w = np.array([30.0, 70.0, 50.0])
    expected = p.agents[1].fitness(70.0) * 70.0 / p.total
    assert local_mean_fitness(p, w, 0) == pytest.approx(expected, rel=1e-12)


def test_local_mean_fitness_at_equal_fitness(fig2):
    # with one shared fitness value -lam the mean reduces to
    # -lam * (neighbor mass) / w
    p = fig2.problem
    wstar = np.asarray(fig2.reference["allocation"])
    f = fitness_values(p, wstar)
    lam = -f.mean()
    for i in range(p.n):
        nbr_mass = float((p.graph.adjacency[i] * wstar).sum())
        assert local_mean_fitness(p, wstar, i) == pytest.approx(
            -lam * nbr_mass / p.total, rel=1e-9
        )


def test_local_mean_fitness_node_range(fig2):
    with pytest.raises(NodeOutOfRangeError):
        local_mean_fitness(fig2.problem, np.asarray(fig2.reference["allocation"]), 6)


def test_step_fixed_point_at_equal_fitness(fig2):
    p = fig2.problem
    wstar = np.asarray(fig2.reference["allocation"])
    nxt = drd_step(p, wstar, 1e-4)
    assert np.abs(nxt - wstar).max() < 1e-10


def test_step_keeps_zero_mass_at_zero():
    p = _two_identical_agents()
    w = np.array([0.0, 100.0])
    for _ in range(50):
        w = drd_step(p, w, 1e-3)
        assert w[0] == 0.0


def test_step_conserves_total():
    p = _spread_instance(-5.0, -6.0)
    w = np.array([120.0, 80.0])
    for _ in range(10_000):
        prev = w.sum()
        w = drd_step(p, w, 1e-3)
        assert abs(w.sum() - prev) <= 1e-9 * p.total  # edge terms cancel pairwise
    assert abs(w.sum() - p.total) < 1e-8 * p.total


def test_step_overflow_raises(fig2):
    p = fig2.problem
    with pytest.raises(StepOverflowError):
        w = default_start(p)
        for _ in range(50):
            w = drd_step(p, w, 10.0)


def test_simulate_overflow_reports_step(fig2):
    p = fig2.problem
    with pytest.raises(StepOverflowError) as exc:
        simulate(p, default_start(p), DrdConfig(step=10.0, max_steps=1000))
    assert exc.value.step_index is not None


def test_nash_residual_values():
    p = _spread_instance(-5.0, -6.0)
    w = np.array([100.0, 100.0])
    f = fitness_values(p, w)
    np.testing.assert_allclose(f, [-5.0, -6.0], atol=1e-12)
    assert nash_residual(p, w) == pytest.approx(1.0, abs=1e-12)


def test_nash_residual_zero_at_equal_fitness(fig2):
    wstar = np.asarray(fig2.reference["allocation"])
    assert nash_residual(fig2.problem, wstar) < 1e-12


def test_nash_residual_sees_idle_agent_advantage():
    # an empty agent whose fitness beats the loaded one keeps the residual positive
    p = _spread_instance(-2.0, -6.0)
    w = np.array([0.0, 200.0])
    f = fitness_values(p, w)
    assert f[0] > f[1]
    assert nash_residual(p, w) > 0


def test_lyapunov_zero_at_reference(fig3):
    ref = np.asarray(fig3.reference["allocation"])
    assert lyapunov_value(fig3.problem, ref, ref) == 0.0


def test_default_start_is_interior():
    rng = np.random.default_rng(3)
    from conftest import random_problem

    for _ in range(10):
        p = random_problem(rng)
        w0 = default_start(p)
        assert np.all(w0 > 0)
        assert w0.sum() == pytest.approx(p.total, rel=1e-12)
        assert in_simplex(p, w0)


def test_default_start_differs_from_fixed_point(fig2):
    w0 = default_start(fig2.problem)
    assert np.abs(w0 - np.asarray(fig2.reference["allocation"])).max() > 1.0


def test_simulate_from_equilibrium_stops_immediately(fig3):
    p = fig3.problem
    ref = np.asarray(fig3.reference["allocation"])
    traj = simulate(p, ref, DrdConfig(step=1e-3))
    assert traj.converged
    assert traj.steps == 0
    assert traj.residuals[-1] <= 1e-6
    np.testing.assert_array_equal(traj.times, [0])


def test_simulate_rejects_off_simplex_start(fig3):
    p = fig3.problem
    with pytest.raises(ValueError):
        simulate(p, np.full(6, 100.0), DrdConfig(step=1e-3))


def test_simulate_quadratic_converges_to_equal_marginals(fig3_run):
    p, traj, _ = fig3_run
    assert traj.converged
    marg = marginals(p, traj.final)
    assert marg.max() - marg.min() <= 1e-6 + 1e-12
    # level and loads match the closed-form equal-marginal solution
    from taskalloc import get_instance

    inst = get_instance("fig3")
    assert np.abs(traj.final - np.asarray(inst.reference["allocation"])).max() < 0.5
    assert marg.mean() == pytest.approx(inst.reference["level"], abs=1e-3)


def test_simulate_exponential_uniform_start_reaches_proportional_limit(fig2):
    # equal fitness forces loads proportional to the upper bounds
    p = fig2.problem
    w0 = np.full(6, p.total / 6.0)
    traj = simulate(p, w0, DrdConfig(step=1e-4, residual_tol=1e-4))
    assert traj.converged
    expected = np.asarray(fig2.reference["allocation"])
    assert np.abs(traj.final - expected).max() < 0.5


def test_simulate_records_aligned_monotone_trace(fig2_run):
    p, traj, _ = fig2_run
    assert traj.converged
    assert np.all(np.diff(traj.times) > 0)
    k = len(traj.times)
    assert traj.states.shape == (k, p.n)
    assert traj.costs.shape == (k,)
    assert traj.residuals.shape == (k,)
    assert traj.lyapunov is not None
    # Lyapunov descent along the recorded samples
    assert np.all(traj.costs[1:] <= traj.costs[:-1] + 1e-9 * np.abs(traj.costs[:-1]))
    assert traj.lyapunov[0] > traj.lyapunov[-1]
    assert traj.lyapunov[-1] >= -1e-6
    # the limit satisfies the equilibrium membership test
    assert nash_residual(p, traj.final) <= 1e-6
    # long-run conservation over the 1e6-step trace
    assert np.abs(traj.states.sum(axis=1) - p.total).max() <= 1e-7 * p.total


def test_simulate_limit_matches_all_interior_solver(fig3_run):
    # when the clamped optimum keeps every agent interior, the replicator
    # limit agrees with it; a residual of eps in fitness units maps to
    # eps / (marginal slope) in load units
    from taskalloc.lambda_solver import solve_lambda

    p, traj, _ = fig3_run
    res = solve_lambda(p)
    assert res.interior == list(range(p.n))
    slopes = np.array([a.a for a in p.agents])  # quadratic marginal slope
    coord_tol = 10.0 * 1e-6 / slopes.min()
    assert np.abs(traj.final - res.allocation).max() <= coord_tol


def test_trace_csv_layout(tmp_path, fig3_run):
    p, traj, _ = fig3_run
    path = tmp_path / "trace.csv"
    write_trace_csv(traj, p, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,t,w_1,w_2,w_3,w_4,w_5,w_6,C,V,residual"
    assert len(lines) == len(traj.times) + 1
    first = lines[1].split(",")
    assert int(first[0]) == traj.times[0]
    # 12+ significant digits survive a round trip
    assert float(first[8]) == pytest.approx(traj.costs[0], rel=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        DrdConfig(step=0.0)
    with pytest.raises(ValueError):
        DrdConfig(step=1e-3, max_steps=0)
    with pytest.raises(ValueError):
        DrdConfig(step=1e-3, residual_tol=0.0)
    with pytest.raises(ValueError):
        DrdConfig(step=1e-3, record_every=0)
