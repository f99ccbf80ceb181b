"""Weak solutions of the Dirichlet problem with density or dual-element data."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from numbers import Real

import numpy as np

from .mesh import Grid, GridFunction, gauss_legendre, lp_norm, nodal_values
from .operator import (LoadVector, StiffnessMatrix, assemble_stiffness, load_density,
                       load_dual)
from .spaces import DualElement, FracParams


class SolverError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class StateSolution:
    u: GridFunction
    datum: str
    residual: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.u.values)))


def _stiffness(grid, params, stiffness, order):
    if stiffness is None:
        return assemble_stiffness(grid, params, order)
    if stiffness.grid != grid or stiffness.params.s != params.s:
        raise ValueError("stiffness matrix does not match grid/params")
    return stiffness


def state_load(z, grid: Grid, params: FracParams, order: int = 8) -> LoadVector:
    if isinstance(z, DualElement):
        return load_dual(z, grid, params)
    if isinstance(z, LoadVector):
        return z
    return load_density(z, grid, order)


def solve_state(z, grid: Grid, params: FracParams, stiffness: StiffnessMatrix | None = None,
                method: str = "cholesky", tol: float = 1e-10, order: int = 8) -> StateSolution:
    """Solve E(u, v) = <z, v> for all discrete v.

    ``z`` is a density (GridFunction, constant, callable, nodal array) or a
    :class:`DualElement`.
    """
    K = _stiffness(grid, params, stiffness, order)
    b = state_load(z, grid, params, order)
    x, res = K.solve(b.values, method=method, tol=min(tol, 1e-12))
    if not res <= tol:
        raise SolverError(f"linear solve residual {res:.3e} above tolerance {tol:.1e}", res)
    u = GridFunction(grid, x)
    return StateSolution(u, b.kind, res, {"sup_norm": float(np.max(np.abs(x), initial=0.0))})


def datum_lp_norm(z, grid: Grid, p: float, order: int = 16) -> float:
    """L^p(Omega) norm of a density datum."""
    if isinstance(z, Real):
        return abs(float(z)) * (grid.length ** (1.0 / p) if not math.isinf(p) else 1.0)
    if callable(z) and not isinstance(z, GridFunction):
        lg = gauss_legendre(order)
        x = grid.a + grid.h * (np.arange(grid.n)[:, None] + lg.points[None, :])
        vals = np.abs(np.asarray(z(x), dtype=float) * np.ones_like(x))
        if math.isinf(p):
            return float(vals.max())
        return float((grid.h * np.sum(vals ** p @ lg.weights)) ** (1.0 / p))
    return lp_norm(nodal_values(grid, z), p, grid)


def sup_norm_ratio(u: StateSolution, z, params: FracParams) -> float:
    """||u||_inf / ||z||_p."""
    nz = datum_lp_norm(z, u.u.grid, params.p)
    if nz == 0:
        raise ValueError("zero datum")
    return u.sup_norm / nz


@dataclass(frozen=True)
class DecayProfile:
    exponent: float
    left: float
    right: float
    degenerate: bool


def boundary_decay(u, s: float | None = None, fraction: float = 0.1,
                   floor: float = 1e-14) -> DecayProfile:
    """Least-squares slope of log|u| against log dist(x, boundary).

    Uses the ``fraction`` of interior nodes nearest to each endpoint.  ``s`` is
    only carried for reporting symmetry with the theory; the fit is blind to it.
    """
    sol = u.u if isinstance(u, StateSolution) else u
    g = sol.grid
    if g.n < 32:
        raise ValueError("decay fit needs n >= 32")
    k = max(3, int(round(fraction * g.size)))
    x, v = g.interior, np.abs(sol.values)
    slopes = []
    for idx, dist in ((slice(0, k), x[:k] - g.a), (slice(-k, None), g.b - x[-k:])):
        vv = v[idx]
        if np.any(vv <= floor):
            return DecayProfile(float("nan"), float("nan"), float("nan"), True)
        slopes.append(np.polyfit(np.log(dist), np.log(vv), 1)[0])
    return DecayProfile(float(np.mean(slopes)), float(slopes[0]), float(slopes[1]), False)


def random_coarse_data(rng: np.random.Generator, a: float, b: float, count: int,
                       cells: int = 16) -> list:
    """Random continuous piecewise-linear functions on a fixed coarse mesh.

    Returned as callables so that the same functions can be put on any grid
    whose element count is a multiple of ``cells``.
    """
    nodes = np.linspace(a, b, cells + 1)
    vals = rng.standard_normal((count, cells + 1))
    return [(lambda x, vv=vv: np.interp(x, nodes, vv)) for vv in vals]


def empirical_state_constant(grid: Grid, params: FracParams, samples: int = 100,
                             seed: int = 0, stiffness: StiffnessMatrix | None = None,
                             cells: int = 16) -> dict:
    """Max of ||u||_inf / ||z||_p over seeded random piecewise-linear data."""
    K = _stiffness(grid, params, stiffness, 8)
    rng = np.random.default_rng(seed)
    data = random_coarse_data(rng, grid.a, grid.b, samples, cells)
    ratios = []
    B, norms = [], []
    for z in data:
        Z = nodal_values(grid, z)
        B.append(load_density(Z, grid).values)
        norms.append(lp_norm(Z, params.p, grid))
    X, _ = K.solve(np.array(B).T)
    ratios = np.max(np.abs(X), axis=0) / np.array(norms)
    return {"max_ratio": float(ratios.max()), "mean_ratio": float(ratios.mean()),
            "samples": int(samples), "seed": int(seed), "n": grid.n}


def dual_data_hypotheses(params: FracParams, t: float) -> bool:
    """Parameter chain 0<t<s<1, 2<N/s<p<=inf, 1<=p'<2, 1/p'<t<1 for W^{-t,p} data.

    With N = 1 the chain is never satisfiable: N/s > 2 forces s < 1/2 while
    1/p' < t < s forces s > 1/2.
    """
    s, p, N = params.s, params.p, params.N
    pc = params.p_conj
    return (0 < t < s < 1 and 2 < N / s < p and 1 <= pc < 2 and 1.0 / pc < t < 1)
