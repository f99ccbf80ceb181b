import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from fracstate.mesh import (Grid, GridFunction, build_grid, evaluate, from_csv, gauss_jacobi,
                            gauss_legendre, integrate, lp_norm, mass_matrix, nodal_values, to_csv)


def test_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        Grid(1.0, 1.0, 4)
    with pytest.raises(ValueError):
        Grid(0.0, 1.0, 1)
    with pytest.raises(ValueError):
        Grid(0.0, math.inf, 4)


def test_grid_geometry():
    g = build_grid(-1, 1, 8)
    assert g.h == 0.25
    assert g.nodes[0] == -1 and g.nodes[-1] == 1
    assert g.size == 7 and len(g.interior) == 7
    assert g.refine(2).n == 16


def test_hat_and_evaluation():
    g = build_grid(0, 1, 4)
    phi = GridFunction.hat(g, 2)
    assert phi(0.5) == 1.0
    assert phi(0.375) == pytest.approx(0.5)
    assert phi(0.25) == 0.0
    assert evaluate(phi, np.array([-1.0, 0.0, 1.0, 2.0])).tolist() == [0, 0, 0, 0]
    with pytest.raises(IndexError):
        GridFunction.hat(g, 0)


def test_grid_function_is_read_only_and_sized():
    g = build_grid(0, 1, 4)
    u = GridFunction(g, np.arange(3.0))
    with pytest.raises(ValueError):
        u.values[0] = 1.0
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros(5))


def test_nodal_values_forms():
    g = build_grid(0, 1, 4)
    assert np.all(nodal_values(g, 2.0) == 2.0)
    assert np.allclose(nodal_values(g, lambda x: x), g.nodes)
    assert nodal_values(g, np.ones(3))[[0, -1]].tolist() == [0.0, 0.0]
    with pytest.raises(ValueError):
        nodal_values(g, np.ones(7))


@pytest.mark.parametrize("order", [1, 3, 6])
def test_gauss_legendre_exact_for_polynomials(order):
    q = gauss_legendre(order)
    for k in range(2 * order):
        assert q.weights @ q.points ** k == pytest.approx(1.0 / (k + 1), rel=1e-13)


@pytest.mark.parametrize("beta", [-0.5, 0.0, 0.3, 1.2])
def test_gauss_jacobi_weight(beta):
    q = gauss_jacobi(6, beta)
    for k in range(12):
        assert q.weights @ q.points ** k == pytest.approx(1.0 / (k + 1 + beta), rel=1e-12)


def test_mass_matrix_integrates_products():
    g = build_grid(-1, 1, 8)
    M = mass_matrix(g, interior=False)
    assert M.sum() == pytest.approx(2.0)
    u = GridFunction.interpolate(g, lambda x: 1 - x ** 2)
    exact = quad(lambda x: evaluate(u, x) ** 2, -1, 1, points=list(g.nodes), limit=100)[0]
    assert u.full @ M @ u.full == pytest.approx(exact, rel=1e-12)
    assert integrate(u, u) == pytest.approx(exact, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=5, max_size=5), st.sampled_from([1.0, 1.5, 2.0, 3.7]))
def test_lp_norm_exact_for_piecewise_linear(vals, p):
    g = build_grid(0, 2, 6)
    u = GridFunction(g, np.array(vals))
    ref = sum(quad(lambda x: abs(evaluate(u, x)) ** p, lo, hi, epsabs=1e-13)[0]
              for lo, hi in zip(g.nodes[:-1], g.nodes[1:])) ** (1 / p)
    assert lp_norm(u, p) == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_lp_norm_infinity():
    g = build_grid(0, 1, 4)
    assert lp_norm(GridFunction(g, np.array([1.0, -3.0, 2.0])), math.inf) == 3.0


def test_csv_round_trip(tmp_path):
    g = build_grid(-1, 1, 6)
    u = GridFunction(g, np.random.default_rng(1).standard_normal(5))
    to_csv(u, tmp_path / "u.csv")
    v = from_csv(tmp_path / "u.csv")
    assert v.grid == g
    assert np.array_equal(v.values, u.values)
    assert (tmp_path / "u.csv").read_text().splitlines()[0] == "x,value"


def test_arithmetic():
    g = build_grid(0, 1, 4)
    u = GridFunction(g, np.ones(3))
    assert np.all((u + u * 2 - u).values == 2.0)
    assert np.all((-u).values == -1.0)
    with pytest.raises(ValueError):
        u + GridFunction.zeros(build_grid(0, 1, 8))
