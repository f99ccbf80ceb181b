"""Very-weak (transposition) solutions with Radon-measure data.

The continuous construction defines u = Xi* mu where Xi maps a density xi to
the solution v of the Dirichlet problem.  Discretely Xi = A^{-1} M, so
Xi* mu = A^{-1} b_mu with b_mu the hat-function moments of mu, and the
defining identity  int u xi dx = int v_xi dmu  is an exact matrix identity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import Grid, GridFunction, lp_norm, mass_matrix
from .operator import RadonMeasure, StiffnessMatrix, load_measure
from .solve_state import SolverError, _stiffness
from .spaces import FracParams, gagliardo_seminorm


@dataclass(frozen=True, eq=False)
class VeryWeakSolution:
    u: GridFunction
    mu: RadonMeasure
    duality_residual: float
    norms: dict = field(default_factory=dict)


def solve_measure(mu: RadonMeasure, grid: Grid, params: FracParams,
                  stiffness: StiffnessMatrix | None = None, check: str = "auto",
                  seed: int = 0, tol: float = 1e-10, order: int = 8) -> VeryWeakSolution:
    """Transposition solution of the Dirichlet problem with datum ``mu``.

    ``check`` selects the test data for the duality residual: ``"basis"`` sweeps
    every hat function, ``"random"`` uses 20 seeded random densities, ``"auto"``
    picks the basis sweep for n <= 64, ``"none"`` skips the check.
    """
    K = _stiffness(grid, params, stiffness, order)
    b = load_measure(mu, grid).values
    x, res = K.solve(b)
    if not res <= tol:
        raise SolverError(f"linear solve residual {res:.3e}", res)
    u = GridFunction(grid, x)
    if check == "auto":
        check = "basis" if grid.n <= 64 else "random"
    dres = duality_residual(u, mu, K, check, seed) if check != "none" else float("nan")
    return VeryWeakSolution(u, mu, dres, {"lp_conj": lp_norm(u, params.p_conj)})


def duality_residual(u: GridFunction, mu: RadonMeasure, K: StiffnessMatrix,
                     check: str = "basis", seed: int = 0) -> float:
    """max over test data xi of |int u xi - int v_xi dmu| / (||mu|| ||v_xi||_inf)."""
    g = u.grid
    if check == "basis":
        Xi = np.eye(g.size)
    elif check == "random":
        Xi = np.random.default_rng(seed).standard_normal((g.size, 20))
    else:
        raise ValueError(f"unknown check {check!r}")
    M = mass_matrix(g)
    lhs = u.values @ M @ Xi
    V, _ = K.solve(M @ Xi)
    rhs = np.array([mu.integrate(V[:, k]) for k in range(V.shape[1])])
    scale = max(mu.total_variation(), 1e-300) * np.max(np.abs(V), axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return float(np.max(np.abs(lhs - rhs) / scale))


def measure_stability(u: VeryWeakSolution, mu: RadonMeasure, params: FracParams,
                      t: float | None = None) -> dict:
    """Ratios ||u||_{p'} / ||mu||_M and |u|_{t,p'} / ||mu||_M.

    ``t`` defaults to s/2.  The seminorm ratio is NaN when p' is infinite.
    """
    tv = mu.total_variation()
    if tv == 0:
        raise ValueError("zero measure")
    pc = params.p_conj
    t = params.s / 2 if t is None else t
    semi = float("nan")
    if not math.isinf(pc):
        semi = gagliardo_seminorm(u.u, FracParams(t, pc, params.N), "FullSpace")
    return {"lp_ratio": lp_norm(u.u, pc) / tv, "seminorm_ratio": semi / tv, "t": t,
            "p_conj": pc}


def random_atomic_measures(rng: np.random.Generator, a: float, b: float, count: int,
                           atoms: int = 3) -> list:
    """Atom locations and weights, independent of any grid."""
    out = []
    for _ in range(count):
        loc = a + (b - a) * rng.uniform(0.02, 0.98, size=atoms)
        w = rng.standard_normal(atoms)
        out.append(tuple(zip(loc.tolist(), w.tolist())))
    return out


def empirical_measure_constant(grid: Grid, params: FracParams, samples: int = 100,
                               seed: int = 0, stiffness: StiffnessMatrix | None = None,
                               atoms: int = 3) -> dict:
    """Max of ||u||_{p'} / ||mu||_M over seeded random atomic measures."""
    K = _stiffness(grid, params, stiffness, 8)
    rng = np.random.default_rng(seed)
    specs = random_atomic_measures(rng, grid.a, grid.b, samples, atoms)
    mus = [RadonMeasure(grid, spec) for spec in specs]
    B = np.array([load_measure(mu, grid).values for mu in mus]).T
    X, _ = K.solve(B)
    ratios = np.array([lp_norm(GridFunction(grid, X[:, k]), params.p_conj) / mus[k].total_variation()
                       for k in range(samples)])
    return {"max_ratio": float(ratios.max()), "mean_ratio": float(ratios.mean()),
            "samples": int(samples), "seed": int(seed), "n": grid.n}
