import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import toeplitz

from fracstate.mesh import GridFunction, build_grid, mass_matrix
from fracstate.operator import (LoadVector, RadonMeasure, assemble_stiffness, load_density,
                                load_lumped, load_measure)
from fracstate.spaces import FracParams

# Entries from nested adaptive quadrature (tests/stiffness_oracle.py), Omega = (-1, 1).
ORACLE = {
    (2, 0.5): {(1, 1): 0.8825424006106067},
    (3, 0.5): {(1, 1): 0.8825424006106064, (1, 2): -0.19143861467394369},
    (4, 0.25): {(1, 1): 0.49854928481090016, (1, 2): -0.005861513002398181,
                (1, 3): -0.06209148224114397},
    (4, 0.75): {(1, 1): 1.7626379002274375, (1, 2): -0.6638208931052002,
                (1, 3): -0.1398837042071084},
}


@pytest.mark.parametrize("key", sorted(ORACLE))
def test_entries_match_frozen_oracle(key):
    n, s = key
    A = assemble_stiffness(build_grid(-1, 1, n), FracParams(s)).A
    for (i, j), ref in ORACLE[key].items():
        assert A[i - 1, j - 1] == pytest.approx(ref, rel=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(2, 12))
def test_symmetric_positive_definite_toeplitz(s, n):
    A = assemble_stiffness(build_grid(-1, 1, n), FracParams(s)).A
    assert np.max(np.abs(A - A.T)) <= 1e-12
    assert np.linalg.eigvalsh(A).min() > 0
    # each entry is the full-space energy of two translated hats
    assert np.allclose(A, toeplitz(A[0]), rtol=1e-10, atol=1e-13)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(0.2, 5.0), st.floats(-3, 3))
def test_affine_scaling(s, length, shift):
    n = 6
    A1 = assemble_stiffness(build_grid(0, 1, n), FracParams(s)).A
    A2 = assemble_stiffness(build_grid(shift, shift + length, n), FracParams(s)).A
    assert np.allclose(A2, length ** (1 - 2 * s) * A1, rtol=1e-10, atol=1e-14)


def test_offdiagonal_sign():
    # overlapping hats couple positively for small s; the sign is mesh independent
    for s in (0.25, 0.5, 0.8):
        A = assemble_stiffness(build_grid(-1, 1, 32), FracParams(s)).A
        assert (A - np.diag(np.diag(A))).max() <= 0
    for n in (4, 32):
        assert assemble_stiffness(build_grid(-1, 1, n), FracParams(0.2)).A[0, 1] > 0


def test_quadrature_order_converged():
    g = build_grid(-1, 1, 16)
    A8 = assemble_stiffness(g, FracParams(0.3), order=8).A
    A14 = assemble_stiffness(g, FracParams(0.3), order=14).A
    assert np.max(np.abs(A8 - A14)) / np.max(np.abs(A14)) < 1e-10
    with pytest.raises(ValueError):
        assemble_stiffness(g, FracParams(0.3), order=1)


def test_solvers_agree():
    g = build_grid(-1, 1, 64)
    K = assemble_stiffness(g, FracParams(0.6))
    b = np.random.default_rng(0).standard_normal(g.size)
    x1, r1 = K.solve(b)
    x2, r2 = K.solve(b, method="cg", tol=1e-13)
    assert r1 < 1e-13 and r2 < 1e-12
    assert np.allclose(x1, x2, rtol=1e-9, atol=1e-12)
    with pytest.raises(ValueError):
        K.solve(b, method="lu")


def test_load_density_nodal_and_callable():
    g = build_grid(-1, 1, 8)
    z = lambda x: 1 + x
    b1 = load_density(z, g).values
    b2 = load_density(GridFunction.interpolate(g, z) * 1.0, g).values
    # the callable is linear, so both routes integrate it exactly up to the boundary rows
    exact = (mass_matrix(g, interior=False) @ (1 + g.nodes))[1:-1]
    assert np.allclose(b1, exact, rtol=1e-13)
    assert np.allclose(b2[1:-1], exact[1:-1], rtol=1e-13)
    assert np.allclose(load_density(1.0, g).values, g.h)


def test_load_lumped():
    g = build_grid(0, 2, 4)
    assert np.allclose(load_lumped(lambda x: x, g).values, 0.5 * g.interior)


def test_load_measure_hat_evaluation():
    g = build_grid(-1, 1, 4)
    mu = RadonMeasure.dirac(g, 0.0, 2.0)
    assert load_measure(mu, g).values.tolist() == [0.0, 2.0, 0.0]
    mu = RadonMeasure.dirac(g, 0.25)
    assert np.allclose(load_measure(mu, g).values, [0.0, 0.5, 0.5])


def test_radon_measure_validation_and_algebra():
    g = build_grid(-1, 1, 4)
    with pytest.raises(ValueError):
        RadonMeasure.dirac(g, 1.0)
    with pytest.raises(ValueError):
        RadonMeasure(g, ((0.0, np.nan),))
    d = GridFunction(g, np.array([1.0, -1.0, 2.0]))
    mu = RadonMeasure(g, ((0.1, -2.0),), d)
    # |density| integrates to 1/4 + 1/4 + 5/12 + 1/2 element by element
    assert mu.total_variation() == pytest.approx(2.0 + 17 / 12, rel=1e-12)
    two = mu + mu.scaled(1.0)
    assert two.total_variation() == pytest.approx(2 * mu.total_variation())
    assert mu.integrate(lambda x: np.ones_like(x)) == pytest.approx(-1.0, rel=1e-12)


def test_load_vector_rejects_bad_values():
    g = build_grid(0, 1, 4)
    with pytest.raises(ValueError):
        LoadVector(g, np.ones(4), "Density")
    with pytest.raises(ValueError):
        LoadVector(g, np.array([1.0, np.inf, 0.0]), "Density")
