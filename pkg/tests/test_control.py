import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracstate.control import (ControlError, ControlProblem, adjoint_solve, check_slater, dense_kkt_solve,
                               polar_cone_check, projection_residual, solve_control)
from fracstate.mesh import GridFunction, build_grid
from fracstate.operator import RadonMeasure
from fracstate.solve_measure import solve_measure
from fracstate.spaces import FracParams

PAR = FracParams(0.5)


@pytest.fixture(scope="module")
def active():
    g = build_grid(-1, 1, 128)
    prob = ControlProblem(g, PAR, 1e-2, u_d=5.0, u_b=0.1)
    return prob, solve_control(prob)


def test_slater_examples():
    g = build_grid(-1, 1, 256)
    assert check_slater(ControlProblem(g, PAR, 1.0, u_b=10.0), 1.0)["margin"] >= 9
    assert not check_slater(ControlProblem(g, PAR, 1.0, u_b=0.0), 1.0)["feasible"]
    assert check_slater(ControlProblem(g, PAR, 1.0, u_b=0.5), 0.0) == {"margin": 0.5, "feasible": True}
    assert not check_slater(ControlProblem(g, PAR, 1.0, u_b=1e-9), 0.0)["feasible"]
    with pytest.raises(ValueError):
        check_slater(ControlProblem(g, PAR, 1.0, u_b=1.0, z_hi=0.5), 1.0)


def test_problem_validation():
    g = build_grid(-1, 1, 8)
    for bad in [dict(alpha=0.0), dict(alpha=1.0, gammas=(1e3, 1e2)), dict(alpha=1.0, gammas=()),
                dict(alpha=1.0, method="newton"), dict(alpha=1.0, z_lo=1.0, z_hi=0.0)]:
        with pytest.raises(ValueError):
            ControlProblem(g, PAR, **bad)


def test_zero_is_optimal_for_zero_target():
    g = build_grid(-1, 1, 32)
    res = solve_control(ControlProblem(g, PAR, 0.1, u_d=0.0, u_b=0.2, z_lo=-1.0, z_hi=1.0))
    assert np.all(res.z.values == 0) and np.all(res.u.values == 0) and not res.mu.atoms
    r = res.report
    for v in (r.primal_feasibility, r.complementarity, r.vi_residual, r.adjoint_residual, r.state_residual):
        assert abs(v) <= 1e-12


@pytest.mark.parametrize("method", ["ssn", "pg"])
def test_unconstrained_matches_dense_kkt(method):
    g = build_grid(-1, 1, 64)
    prob = ControlProblem(g, PAR, 1e-2, u_d=lambda x: np.cos(2 * x), method=method)
    z, u, xi = dense_kkt_solve(prob)
    res = solve_control(prob)
    assert np.max(np.abs(res.z.values - z)) <= 1e-8 * max(1.0, np.max(np.abs(z)))
    assert np.max(np.abs(res.u.values - u)) <= 1e-8
    assert projection_residual(z, xi, prob) <= 1e-10
    assert res.path[0]["gamma"] == 0.0 and not res.mu.atoms


def test_active_instance_kkt(active):
    prob, res = active
    r = res.report
    assert r.primal_feasibility <= 1e-4
    assert r.multiplier_nonnegativity >= 0.0
    assert abs(r.complementarity) <= 1e-3 * r.multiplier_total_variation
    assert r.vi_residual <= 1e-6
    assert r.adjoint_residual <= 1e-10 and r.state_residual <= 1e-10
    assert all(w > 0 for _, w in res.mu.atoms)
    assert r.gamma == 1e7


def test_active_instance_path_and_descent(active):
    prob, res = active
    viols = [row["violation"] for row in res.path]
    assert np.all(np.diff(viols) <= 1e-12)
    # within one gamma level every accepted step lowers the penalised cost
    rows = np.array(res.trajectory)
    for gam in prob.gammas:
        J = rows[rows[:, 1] == gam, 2]
        assert np.all(np.diff(J) <= 0)


def test_multiplier_supported_on_active_set(active):
    prob, res = active
    tol = 1e-6
    slack = prob.ub - res.u.values
    dens = res.report.gamma * prob.violation(res.u.values)
    assert np.all(dens[slack > tol] <= res.report.gamma * tol)


def test_polar_cone(active):
    _, res = active
    assert polar_cone_check(res.mu, 100) <= 0.0
    g = res.mu.grid
    assert polar_cone_check(RadonMeasure(g, ((0.0, -1.0),)), 20) > 0


def test_projection_residual_examples():
    g = build_grid(-1, 1, 8)
    prob = ControlProblem(g, PAR, 1.0, z_lo=0.0, z_hi=0.3)
    xi = np.full(g.size, -0.5)
    assert projection_residual(np.full(g.size, 0.3), xi, prob) == 0.0
    assert projection_residual(np.full(g.size, 0.2), xi, prob) == pytest.approx(0.1)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 10), st.integers(0, 10_000))
def test_projection_fixed_point(alpha, seed):
    g = build_grid(-1, 1, 8)
    prob = ControlProblem(g, PAR, alpha, z_lo=-1e6, z_hi=1e6)
    z = np.random.default_rng(seed).standard_normal(g.size)
    assert projection_residual(GridFunction(g, z), GridFunction(g, -alpha * z), prob) <= 1e-12 * max(1, alpha)


def test_adjoint_solve_examples():
    g = build_grid(-1, 1, 32)
    ud = lambda x: np.sin(x) * (1 - x ** 2)
    prob = ControlProblem(g, PAR, 1.0, u_d=ud)
    u = GridFunction.interpolate(g, ud)
    assert np.max(np.abs(adjoint_solve(u, prob).values)) <= 1e-14
    mu = RadonMeasure.dirac(g, 0.3)
    green = solve_measure(mu, g, PAR, prob.stiffness, check="none").u.values
    assert np.max(np.abs(adjoint_solve(u, prob, mu).values - green)) <= 1e-12 * np.max(np.abs(green))


def test_adjoint_solve_linear():
    g = build_grid(-1, 1, 32)
    prob = ControlProblem(g, PAR, 1.0)
    rng = np.random.default_rng(1)
    u1, u2 = GridFunction(g, rng.standard_normal(g.size)), GridFunction(g, rng.standard_normal(g.size))
    m1, m2 = RadonMeasure(g, ((0.1, 1.0),)), RadonMeasure(g, ((-0.4, 2.0), (0.6, -1.0)))
    lhs = adjoint_solve(u1 * 2.0 + u2, prob, m1.scaled(2.0) + m2).values
    rhs = 2 * adjoint_solve(u1, prob, m1).values + adjoint_solve(u2, prob, m2).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(lhs))


def test_projected_gradient_on_small_constrained_problem():
    g = build_grid(-1, 1, 32)
    kw = dict(u_d=2.0, u_b=0.3, z_lo=-20.0, z_hi=20.0, gammas=(1e2, 1e3, 1e4))
    pg = solve_control(ControlProblem(g, PAR, 1e-1, method="pg", tol=1e-8, max_iter=20_000, **kw))
    ssn = solve_control(ControlProblem(g, PAR, 1e-1, **kw))
    # the baseline plateaus once projected steps stop changing the iterate
    assert pg.report.vi_residual <= 1e-5
    assert np.max(np.abs(pg.z.values - ssn.z.values)) <= 1e-4 * np.max(np.abs(ssn.z.values))
    J = pg.report.cost_trajectory
    assert len(J) > 3


def test_active_box_bounds_respected():
    g = build_grid(-1, 1, 32)
    res = solve_control(ControlProblem(g, PAR, 1e-3, u_d=5.0, z_lo=0.0, z_hi=1.5))
    assert res.z.values.max() <= 1.5 and res.z.values.min() >= 0.0
    assert np.any(res.z.values == 1.5)
    assert res.report.vi_residual <= 1e-10


def test_slater_warning_is_not_fatal():
    g = build_grid(-1, 1, 16)
    prob = ControlProblem(g, PAR, 1.0, u_d=0.0, u_b=0.0, gammas=(1e2,))
    with pytest.warns(UserWarning, match="Slater"):
        solve_control(prob, z_hat=1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        solve_control(ControlProblem(g, PAR, 1.0, u_b=1.0, gammas=(1e2,)), z_hat=0.0)


def test_failure_carries_last_iterate():
    g = build_grid(-1, 1, 16)
    prob = ControlProblem(g, PAR, 1e-2, u_d=5.0, u_b=0.1, max_iter=1, tol=0.0, method="pg")
    with pytest.raises(ControlError) as err:
        solve_control(prob)
    assert err.value.result is not None


def test_unbounded_target_profile_of_inf():
    g = build_grid(-1, 1, 8)
    prob = ControlProblem(g, PAR, 1.0, u_b=math.inf)
    assert not prob.constrained and np.all(prob.violation(np.ones(g.size)) == 0)
