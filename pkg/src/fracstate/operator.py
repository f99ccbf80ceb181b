"""Discrete energy form of the fractional Laplacian and its load functionals.

For zero-extended piecewise-linear functions the full-space energy

    E(u, v) = C/2 int_R int_R (u(x)-u(y)) (v(x)-v(y)) / |x-y|^{1+2s}

splits into an Omega x Omega double integral plus ``int_Omega u v kappa``,
so nothing outside the interval needs to be meshed.  On a uniform mesh every
element pair at a given offset is a translate of a reference pair and every
entry scales like ``h^{1-2s}``; the reference integrals are computed once per
offset with the element-pair rule of :mod:`fracstate.spaces`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .mesh import Grid, GridFunction, gauss_legendre, mass_matrix, nodal_values
from .spaces import (DualElement, FracParams, _ref_basis, cns_constant, exterior_rule,
                     reference_pair_rule, sample_dsp)

__all__ = ["StiffnessMatrix", "LoadVector", "RadonMeasure", "cns_constant",
           "assemble_stiffness", "load_density", "load_lumped", "load_dual",
           "load_measure"]


@dataclass(frozen=True, eq=False)
class StiffnessMatrix:
    """Dense SPD matrix A_ij = E(phi_j, phi_i) over interior hats.

    ``omega`` and ``exterior`` are the two nonnegative parts of A (the
    Omega x Omega double integral and the kappa-weighted mass term), both
    already multiplied by C_{N,s}/2.
    """
    grid: Grid
    params: FracParams
    A: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)
    exterior: np.ndarray = field(repr=False)
    order: int = 8

    def __post_init__(self):
        for m in (self.A, self.omega, self.exterior):
            m.setflags(write=False)

    @property
    def cholesky(self):
        cached = self.__dict__.get("_cho")
        if cached is None:
            cached = sla.cho_factor(self.A, lower=True)
            object.__setattr__(self, "_cho", cached)
        return cached

    def solve(self, b: np.ndarray, method: str = "cholesky", tol: float = 1e-12,
              maxiter: int | None = None) -> tuple[np.ndarray, float]:
        """Solve A x = b; returns (x, relative residual)."""
        b = np.asarray(b, dtype=float)
        if method == "cholesky":
            x = sla.cho_solve(self.cholesky, b)
        elif method == "cg":
            x = _jacobi_cg(self.A, b, tol, maxiter or 10 * self.A.shape[0])
        else:
            raise ValueError(f"unknown solver {method!r}")
        nb = np.linalg.norm(b)
        res = np.linalg.norm(self.A @ x - b) / nb if nb > 0 else float(np.linalg.norm(self.A @ x))
        return x, float(res)

    def energy(self, u: GridFunction, v: GridFunction) -> float:
        return float(v.values @ self.A @ u.values)

    def to_csv(self, path) -> None:
        np.savetxt(path, self.A, delimiter=",", fmt="%.17g")


def _jacobi_cg(A, b, tol, maxiter):
    """Diagonally preconditioned CG, column by column for 2-D right-hand sides."""
    if b.ndim == 2:
        return np.column_stack([_jacobi_cg(A, col, tol, maxiter) for col in b.T])
    if not np.any(b):
        return np.zeros_like(b)
    precond = spla.LinearOperator(A.shape, matvec=lambda r: r / np.diag(A))
    x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=maxiter, M=precond)
    if info != 0:
        res = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
        raise RuntimeError(f"CG did not converge; residual {res:.3e}")
    return x


def reference_omega_blocks(n: int, s: float, order: int):
    """Local Omega x Omega matrices on the unit mesh, one per element offset.

    Yields ``(m, nodes, block)`` with ``block[a, b]`` the integral over both
    orderings of the pair of (psi_a(x)-psi_a(y)) (psi_b(x)-psi_b(y)) |x-y|^{-1-2s}.
    """
    beta = 1.0 - 2.0 * s
    for m in range(n):
        ref = reference_pair_rule(m, beta, order)
        nodes, d = _ref_basis(m, ref)
        k = ref.w * (ref.x - ref.y) ** (-1.0 - 2.0 * s)
        yield m, nodes, 2.0 * (d * k) @ d.T


def assemble_stiffness(grid: Grid, params: FracParams, order: int = 8) -> StiffnessMatrix:
    """Dense stiffness matrix of the zero-exterior fractional Laplacian."""
    if order < 2:
        raise ValueError("quadrature order must be at least 2")
    if params.p != 2:
        params = params.with_p(2.0)
    s, n, h = params.s, grid.n, grid.h
    full = np.zeros((n + 1, n + 1))
    for m, nodes, block in reference_omega_blocks(n, s, order):
        j = np.arange(n - m)
        for a, na in enumerate(nodes):
            for b, nb in enumerate(nodes):
                full[j + na, j + nb] += block[a, b]
    scale = 0.5 * cns_constant(params)
    omega = scale * h ** (1.0 - 2.0 * s) * full[1:-1, 1:-1]

    # kappa-weighted mass matrix; only the interior-node entries are kept
    rule = exterior_rule(grid, s, 2.0, order)
    t = (rule.x - grid.a) / h - rule.elem
    ext = np.zeros((n + 1, n + 1))
    loc = [1.0 - t, t]
    for a in range(2):
        for b in range(2):
            np.add.at(ext, (rule.elem + a, rule.elem + b), rule.weights * loc[a] * loc[b])
    exterior = scale * ext[1:-1, 1:-1]

    A = omega + exterior
    A = 0.5 * (A + A.T)
    return StiffnessMatrix(grid, params, A, omega, exterior, order)


@dataclass(frozen=True, eq=False)
class LoadVector:
    grid: Grid
    values: np.ndarray
    kind: str  # "Density" | "Dual" | "Measure"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError("load vector has wrong length")
        if not np.all(np.isfinite(v)):
            raise ValueError("load vector has non-finite entries")
        object.__setattr__(self, "values", v)

    def __add__(self, other: "LoadVector") -> "LoadVector":
        if other.grid != self.grid:
            raise ValueError("grid mismatch")
        kind = self.kind if self.kind == other.kind else f"{self.kind}+{other.kind}"
        return LoadVector(self.grid, self.values + other.values, kind)


@dataclass(frozen=True, eq=False)
class RadonMeasure:
    """Finite atomic part plus an optional piecewise-linear density."""
    grid: Grid
    atoms: tuple = ()
    density: GridFunction | None = None

    def __post_init__(self):
        atoms = tuple((float(x), float(w)) for x, w in self.atoms)
        for x, w in atoms:
            if not self.grid.a < x < self.grid.b:
                raise ValueError(f"atom at {x} is not inside ({self.grid.a}, {self.grid.b})")
            if not np.isfinite(w):
                raise ValueError("atom weight must be finite")
        if self.density is not None and self.density.grid != self.grid:
            raise ValueError("density lives on a different grid")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def dirac(cls, grid: Grid, x: float, weight: float = 1.0) -> "RadonMeasure":
        return cls(grid, ((x, weight),))

    @property
    def locations(self) -> np.ndarray:
        return np.array([x for x, _ in self.atoms])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    def total_variation(self) -> float:
        from .mesh import lp_norm
        tv = float(np.sum(np.abs(self.weights))) if self.atoms else 0.0
        if self.density is not None:
            tv += lp_norm(self.density, 1.0)
        return tv

    def integrate(self, v) -> float:
        """int v dmu for a grid function, callable or nodal array v."""
        V = nodal_values(self.grid, v)
        out = 0.0
        if self.atoms:
            out += float(self.weights @ np.interp(self.locations, self.grid.nodes, V))
        if self.density is not None:
            out += float(self.density.full @ mass_matrix(self.grid, interior=False) @ V)
        return out

    def scaled(self, c: float) -> "RadonMeasure":
        dens = None if self.density is None else self.density * c
        return RadonMeasure(self.grid, tuple((x, c * w) for x, w in self.atoms), dens)

    def __add__(self, other: "RadonMeasure") -> "RadonMeasure":
        if other.grid != self.grid:
            raise ValueError("grid mismatch")
        if self.density is None:
            dens = other.density
        elif other.density is None:
            dens = self.density
        else:
            dens = self.density + other.density
        return RadonMeasure(self.grid, self.atoms + other.atoms, dens)


def load_density(z, grid: Grid, order: int = 8) -> LoadVector:
    """b_i = int z phi_i.

    Nodal data (grid functions, constants, arrays) are integrated exactly as
    piecewise-linear functions; callables are integrated by Gauss quadrature.
    """
    if callable(z) and not isinstance(z, GridFunction):
        lg = gauss_legendre(order)
        e = np.arange(grid.n)
        x = grid.a + grid.h * (e[:, None] + lg.points[None, :])
        zx = np.asarray(z(x), dtype=float) * np.ones_like(x)
        w = grid.h * lg.weights
        left = (zx * (1.0 - lg.points)) @ w   # contribution of element e to node e
        right = (zx * lg.points) @ w          # ... to node e+1
        b = np.zeros(grid.n + 1)
        b[:-1] += left
        b[1:] += right
        return LoadVector(grid, b[1:-1], "Density")
    Z = nodal_values(grid, z)
    return LoadVector(grid, (mass_matrix(grid, interior=False) @ Z)[1:-1], "Density")


def load_lumped(z, grid: Grid) -> LoadVector:
    """Nodal-quadrature load b_i = h z(x_i)."""
    Z = nodal_values(grid, z)
    return LoadVector(grid, grid.h * Z[1:-1], "Density")


def load_dual(f: DualElement, grid: Grid, params: FracParams) -> LoadVector:
    """b_i = <f, phi_i> with D_{s,2} in the second term."""
    if f.grid != grid:
        raise ValueError("dual element lives on a different grid")
    if f.rule.p != 2 or f.rule.s != params.s:
        raise ValueError("dual element layout must be built for (s, p=2)")
    b = (mass_matrix(grid, interior=False) @ f.f0.full)[1:-1]
    # D_{s,2} phi_i at all rule points, accumulated per basis function
    rule = f.rule
    h = grid.h
    w = 2.0 * rule.weights * f.f1 / np.abs(rule.x - rule.y) ** (0.5 + params.s)
    tx = (rule.x - grid.a) / h - rule.elem_i
    ty = (rule.y - grid.a) / h - rule.elem_j
    acc = np.zeros(grid.n + 1)
    np.add.at(acc, rule.elem_i, w * (1.0 - tx))
    np.add.at(acc, rule.elem_i + 1, w * tx)
    np.add.at(acc, rule.elem_j, -w * (1.0 - ty))
    np.add.at(acc, rule.elem_j + 1, -w * ty)
    return LoadVector(grid, b + acc[1:-1], "Dual")


def load_measure(mu: RadonMeasure, grid: Grid) -> LoadVector:
    """b_i = sum_k w_k phi_i(x_k) + int density phi_i."""
    if mu.grid != grid:
        raise ValueError("measure lives on a different grid")
    b = np.zeros(grid.n + 1)
    if mu.atoms:
        loc = (mu.locations - grid.a) / grid.h
        e = np.minimum(np.floor(loc).astype(int), grid.n - 1)
        t = loc - e
        np.add.at(b, e, mu.weights * (1.0 - t))
        np.add.at(b, e + 1, mu.weights * t)
    if mu.density is not None:
        b += mass_matrix(grid, interior=False) @ mu.density.full
    return LoadVector(grid, b[1:-1], "Measure")


def dsp_samples(v, grid: Grid, params: FracParams, order: int = 8) -> np.ndarray:
    """D_{s,p} v at the Omega x Omega rule points for ``params``."""
    from .spaces import pair_rule
    return sample_dsp(v, pair_rule(grid, params.s, params.p, order))
