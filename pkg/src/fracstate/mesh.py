"""Uniform 1-D meshes, piecewise-linear grid functions and quadrature rules.

Grid functions carry only interior nodal values; the two boundary nodes and
everything outside ``[a, b]`` are zero, so every grid function is the zero
extension of a continuous piecewise-linear function on the interval.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from numbers import Real

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@dataclass(frozen=True)
class Grid:
    a: float
    b: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or not self.a < self.b:
            raise ValueError(f"need a < b, got a={self.a}, b={self.b}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"need n >= 2 elements, got n={self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def nodes(self) -> np.ndarray:
        """All n+1 nodes including both endpoints."""
        x = self.a + self.h * np.arange(self.n + 1)
        x[-1] = self.b
        return x

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    @property
    def size(self) -> int:
        """Number of degrees of freedom (interior nodes)."""
        return self.n - 1

    @property
    def length(self) -> float:
        return self.b - self.a

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.a, self.b, self.n * int(factor))


def build_grid(a: float, b: float, n: int) -> Grid:
    return Grid(float(a), float(b), n)


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} interior values, got {v.shape[0]}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.size))

    @classmethod
    def hat(cls, grid: Grid, i: int) -> "GridFunction":
        """Nodal basis function of interior node ``i`` (1 <= i <= n-1)."""
        if not 1 <= i <= grid.n - 1:
            raise IndexError(f"interior node index must lie in [1, {grid.n - 1}]")
        v = np.zeros(grid.size)
        v[i - 1] = 1.0
        return cls(grid, v)

    @classmethod
    def interpolate(cls, grid: Grid, f) -> "GridFunction":
        """Nodal interpolant of a callable, a constant or another grid function."""
        return cls(grid, nodal_values(grid, f)[1:-1])

    @property
    def full(self) -> np.ndarray:
        """Values at all n+1 nodes, boundary zeros included."""
        return np.concatenate(([0.0], self.values, [0.0]))

    def __call__(self, x):
        return evaluate(self, x)

    def _check(self, other):
        if isinstance(other, GridFunction) and other.grid != self.grid:
            raise ValueError("grid mismatch")

    def __add__(self, other):
        self._check(other)
        o = other.values if isinstance(other, GridFunction) else other
        return GridFunction(self.grid, self.values + o)

    def __sub__(self, other):
        self._check(other)
        o = other.values if isinstance(other, GridFunction) else other
        return GridFunction(self.grid, self.values - o)

    def __mul__(self, c):
        return GridFunction(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)


def evaluate(u: GridFunction, x):
    """Piecewise-linear evaluation; exactly zero outside the open interval."""
    g = u.grid
    xs = np.asarray(x, dtype=float)
    out = np.interp(xs, g.nodes, u.full, left=0.0, right=0.0)
    out = np.where((xs > g.a) & (xs < g.b), out, 0.0)
    return float(out) if out.ndim == 0 else out


def nodal_values(grid: Grid, f) -> np.ndarray:
    """Values of ``f`` at all n+1 nodes.

    ``f`` may be a scalar, a callable, a :class:`GridFunction` on ``grid``, or an
    array holding either the n-1 interior or all n+1 nodal values.
    """
    if isinstance(f, GridFunction):
        if f.grid == grid:
            return f.full
        return evaluate(f, grid.nodes)
    if isinstance(f, Real):
        return np.full(grid.n + 1, float(f))
    if callable(f):
        return np.asarray(f(grid.nodes), dtype=float) * np.ones(grid.n + 1)
    v = np.asarray(f, dtype=float).reshape(-1)
    if v.shape[0] == grid.n + 1:
        return v.copy()
    if v.shape[0] == grid.size:
        return np.concatenate(([0.0], v, [0.0]))
    raise ValueError(f"cannot read {v.shape[0]} values as nodal data on n={grid.n}")


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True, eq=False)
class QuadRule:
    """Quadrature on the reference element [0, 1] (weights sum to 1).

    ``weight_exponent`` is the exponent ``beta`` of an integrated-in weight
    ``t**beta``: the rule approximates ``int_0^1 t**beta g(t) dt`` by
    ``sum(weights * g(points))``.  Plain Gauss-Legendre rules have beta = 0.
    """
    order: int
    points: np.ndarray
    weights: np.ndarray
    weight_exponent: float = 0.0

    def scaled(self, x0: float, x1: float):
        """Points and weights of the unweighted rule mapped to [x0, x1]."""
        if self.weight_exponent != 0.0:
            raise ValueError("cannot affinely map a weighted rule")
        return x0 + (x1 - x0) * self.points, (x1 - x0) * self.weights


@lru_cache(maxsize=None)
def _legendre(order):
    t, w = roots_legendre(order)
    return 0.5 * (t + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _jacobi(order, beta):
    # weight (1+t)^beta on [-1, 1]  ->  u^beta on [0, 1]
    t, w = roots_jacobi(order, 0.0, beta)
    return 0.5 * (t + 1.0), w / 2.0 ** (beta + 1.0)


def gauss_legendre(order: int) -> QuadRule:
    if order < 1:
        raise ValueError("quadrature order must be positive")
    x, w = _legendre(int(order))
    return QuadRule(int(order), x, w)


def gauss_jacobi(order: int, beta: float) -> QuadRule:
    """Rule exact for ``int_0^1 t**beta P(t) dt`` with deg P <= 2*order-1."""
    if order < 1:
        raise ValueError("quadrature order must be positive")
    if beta <= -1.0:
        raise ValueError("weight exponent must exceed -1")
    x, w = _jacobi(int(order), float(beta))
    return QuadRule(int(order), x, w, float(beta))


# ---------------------------------------------------------------------------
# integration of piecewise-linear functions


def mass_matrix(grid: Grid, interior: bool = True) -> np.ndarray:
    """Consistent P1 mass matrix (tridiagonal h/6 * [1, 4, 1])."""
    n, h = grid.n, grid.h
    m = np.diag(np.full(n + 1, 4.0)) + np.diag(np.ones(n), 1) + np.diag(np.ones(n), -1)
    m[0, 0] = m[n, n] = 2.0
    m *= h / 6.0
    return m[1:-1, 1:-1] if interior else m


def integrate(u: GridFunction, w=1.0) -> float:
    """Exact integral of ``u * w`` over the interval.

    ``w`` is a constant or another grid function on the same grid; products of
    two piecewise-linear functions are integrated exactly.
    """
    if isinstance(w, GridFunction):
        if w.grid != u.grid:
            raise ValueError("grid mismatch")
        return float(u.full @ (mass_matrix(u.grid, interior=False) @ w.full))
    if isinstance(w, Real):
        return float(w) * u.grid.h * float(np.sum(u.values))
    raise TypeError("w must be a GridFunction or a constant")


def lp_norm(u, p: float, grid: Grid | None = None) -> float:
    """L^p norm of a continuous piecewise-linear function, exact for every p.

    ``u`` is a GridFunction or an array of all n+1 nodal values (then ``grid``
    is required).
    """
    if isinstance(u, GridFunction):
        grid, v = u.grid, u.full
    else:
        v = np.asarray(u, dtype=float)
    if np.isinf(p):
        return float(np.max(np.abs(v)))
    return float(_abs_power_integral(v[:-1], v[1:], grid.h, p) ** (1.0 / p))


def _abs_power_integral(u0, u1, h, p):
    """sum over elements of int |u|^p for u linear from u0 to u1 on length h."""
    a, b = np.abs(u0), np.abs(u1)
    total = 0.0
    cross = u0 * u1 < 0
    if np.any(cross):
        aa, bb = a[cross], b[cross]
        total += np.sum(h * (aa ** (p + 1) + bb ** (p + 1)) / ((p + 1) * (aa + bb)))
    same = ~cross
    a, b = a[same], b[same]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    close = (hi - lo) <= 1e-6 * hi
    far = ~close
    if np.any(far):
        lo_f, hi_f = lo[far], hi[far]
        total += np.sum(h * (hi_f ** (p + 1) - lo_f ** (p + 1)) / ((p + 1) * (hi_f - lo_f)))
    if np.any(close):
        t, w = _legendre(8)
        vals = lo[close, None] + (hi[close] - lo[close])[:, None] * t[None, :]
        total += np.sum(h * (vals ** p) @ w)
    return total


def to_csv(u: GridFunction, path) -> None:
    """Write ``x,value`` rows for all nodes (boundary zeros explicit)."""
    write_columns(path, ["x", "value"], [u.grid.nodes, u.full])


def from_csv(path) -> GridFunction:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    x, v = data[:, 0], data[:, 1]
    grid = Grid(float(x[0]), float(x[-1]), len(x) - 1)
    return GridFunction(grid, v[1:-1])


def write_columns(path, header, columns) -> None:
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")
