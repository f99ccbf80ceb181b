"""Fractional Sobolev machinery on an interval.

Double integrals over Omega x Omega are evaluated with an element-pair rule on
the half domain ``{x > y}``.  Every integrand we need there (``|u(x)-u(y)|^p``
times a kernel, or a product of difference quotients) is symmetric in
``(x, y)``, so the full integral is twice the half-domain sum.  Pairs are
classified by the element offset ``m = i - j`` (x in element i, y in element j):

* ``m = 0``: the diagonal triangle; a Duffy-type change of variables in the
  distance ``r = x - y`` with a Gauss-Jacobi rule for the factor ``r**beta``.
* ``m = 1``: elements sharing a node; two Duffy triangles around the shared
  corner, again Gauss-Jacobi in the radial variable.
* ``m >= 2``: the kernel is smooth, tensor Gauss-Legendre.

``beta = p*(1-s) - 1`` is the singular exponent of ``|D_{s,p} u|^p`` for a
piecewise-linear ``u``, which makes the rule exact (up to the smooth angular
factor) for the seminorm and for the stiffness entries when p = 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gamma

from .mesh import (Grid, GridFunction, gauss_jacobi, gauss_legendre, mass_matrix,
                   nodal_values, to_csv, write_columns)


@dataclass(frozen=True)
class FracParams:
    s: float
    p: float = 2.0
    N: int = 1

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if not self.p >= 1.0:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")

    @property
    def p_conj(self) -> float:
        if self.p == 1.0:
            return math.inf
        if math.isinf(self.p):
            return 1.0
        return self.p / (self.p - 1.0)

    @property
    def two_star(self) -> float | None:
        """Critical Sobolev exponent 2N/(N-2s); None when N <= 2s."""
        if self.N > 2 * self.s:
            return 2.0 * self.N / (self.N - 2.0 * self.s)
        return None

    @property
    def cns(self) -> float:
        return cns_constant(self)

    def with_p(self, p: float) -> "FracParams":
        return FracParams(self.s, p, self.N)

    def admissible_p(self) -> bool:
        """Integrability condition on the control exponent p."""
        N, s, p = self.N, self.s, self.p
        if N > 2 * s:
            return p > N / (2 * s)
        if N == 2 * s:
            return p > 1
        return p == 1


def cns_constant(params: FracParams) -> float:
    """Normalisation constant s 4^s Gamma((N+2s)/2) / (pi^{N/2} Gamma(1-s))."""
    s, N = params.s, params.N
    return s * 2.0 ** (2 * s) * gamma((2 * s + N) / 2.0) / (math.pi ** (N / 2.0) * gamma(1.0 - s))


def dsp_quotient(u: GridFunction, x: float, y: float, params: FracParams) -> float:
    """D_{s,p}u[x, y] = (u(x) - u(y)) / |x - y|^{N/p + s}, zero extension outside."""
    if x == y:
        raise ValueError("difference quotient undefined on the diagonal")
    return (u(x) - u(y)) / abs(x - y) ** (params.N / params.p + params.s)


def kappa(x, grid: Grid, s: float, p: float = 2.0):
    """Exterior weight 2 int_{R \\ Omega} |x-y|^{-1-sp} dy in closed form (N = 1)."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= grid.a) or np.any(xs >= grid.b):
        raise ValueError("kappa is infinite on and outside the boundary")
    sp = s * p
    with np.errstate(over="raise"):
        val = 2.0 * ((xs - grid.a) ** (-sp) + (grid.b - xs) ** (-sp)) / sp
    if not np.all(np.isfinite(val)):
        raise OverflowError("kappa overflow near the boundary")
    return float(val) if val.ndim == 0 else val


# ---------------------------------------------------------------------------
# element-pair quadrature on the half domain {x > y}


@dataclass(frozen=True, eq=False)
class RefPairRule:
    """Reference points for one offset class on a unit-spaced mesh.

    x is measured from the left node of element j, so for offset m the points
    satisfy m <= x <= m+1 and 0 <= y <= 1.
    """
    x: np.ndarray
    y: np.ndarray
    w: np.ndarray


@lru_cache(maxsize=None)
def reference_pair_rule(offset: int, beta: float, order: int) -> RefPairRule:
    if offset == 0:
        jr, lt = gauss_jacobi(order, beta), gauss_legendre(order)
        r, t = np.meshgrid(jr.points, lt.points, indexing="ij")
        wr, wt = np.meshgrid(jr.weights, lt.weights, indexing="ij")
        y = (1.0 - r) * t
        x = y + r
        w = wr * wt * (1.0 - r) * r ** (-beta)
    elif offset == 1:
        jt, lw = gauss_jacobi(order, beta + 1.0), gauss_legendre(order)
        t, v = np.meshgrid(jt.points, lw.points, indexing="ij")
        wt, wv = np.meshgrid(jt.weights, lw.weights, indexing="ij")
        wgt = wt * wv * t ** (-beta)
        # xi = 1 - y and eta = x - 1 are the distances to the shared node
        xi = np.concatenate([t.ravel(), (t * v).ravel()])
        eta = np.concatenate([(t * v).ravel(), t.ravel()])
        x, y, w = 1.0 + eta, 1.0 - xi, np.concatenate([wgt.ravel(), wgt.ravel()])
    else:
        lg = gauss_legendre(order)
        tx, ty = np.meshgrid(lg.points, lg.points, indexing="ij")
        wx, wy = np.meshgrid(lg.weights, lg.weights, indexing="ij")
        x, y, w = offset + tx, ty, wx * wy
    out = RefPairRule(x.ravel(), y.ravel(), w.ravel())
    for arr in (out.x, out.y, out.w):
        arr.setflags(write=False)
    return out


def _ref_basis(offset, rule):
    """Local nodal basis differences psi(x) - psi(y) on the reference pair.

    Returns (node offsets relative to element j, array [n_local, n_points]).
    """
    x, y = rule.x, rule.y
    lx = x - offset  # local coordinate in element i
    if offset == 0:
        nodes = (0, 1)
        d = np.stack([(1 - x) - (1 - y), x - y])
    elif offset == 1:
        nodes = (0, 1, 2)
        # node 0: only in element j (y); node 1: shared; node 2: only in element i (x)
        d = np.stack([-(1 - y), (1 - lx) - y, lx])
    else:
        nodes = (0, 1, offset, offset + 1)
        d = np.stack([-(1 - y), -y, 1 - lx, lx])
    return nodes, d


def _beta(s, p):
    return p * (1.0 - s) - 1.0


@dataclass(frozen=True, eq=False)
class PairRule:
    """Materialised quadrature over the half domain of Omega x Omega.

    Arrays are flat over (offset, pair, point); ``weights`` integrate over the
    half domain, so a full Omega x Omega integral of a symmetric integrand is
    ``2 * sum(weights * f)``.
    """
    grid: Grid
    s: float
    p: float
    order: int
    elem_i: np.ndarray = field(repr=False)
    elem_j: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.x.shape[0]

    def layout_key(self):
        return (self.grid, float(self.s), float(self.p), int(self.order))


_RULE_CACHE: dict = {}


def pair_rule(grid: Grid, s: float, p: float = 2.0, order: int = 8) -> PairRule:
    key = (grid, float(s), float(p), int(order))
    if key in _RULE_CACHE:
        return _RULE_CACHE[key]
    beta = _beta(s, p)
    h, n = grid.h, grid.n
    ei, ej, xs, ys, ws = [], [], [], [], []
    for m in range(n):
        ref = reference_pair_rule(m, beta, order)
        j = np.arange(n - m)
        q = ref.x.shape[0]
        ei.append(np.repeat(j + m, q))
        ej.append(np.repeat(j, q))
        xs.append((grid.a + h * (j[:, None] + ref.x[None, :])).ravel())
        ys.append((grid.a + h * (j[:, None] + ref.y[None, :])).ravel())
        ws.append(np.tile(h * h * ref.w, n - m))
    rule = PairRule(grid, float(s), float(p), int(order),
                    np.concatenate(ei), np.concatenate(ej),
                    np.concatenate(xs), np.concatenate(ys), np.concatenate(ws))
    if len(_RULE_CACHE) > 16:
        _RULE_CACHE.clear()
    _RULE_CACHE[key] = rule
    return rule


def _offset_diffs(U, m, ref):
    """u(x) - u(y) for every pair at offset m; U holds all n+1 nodal values."""
    n = U.shape[0] - 1
    j = np.arange(n - m)
    lx = ref.x - m
    ux = U[j + m, None] * (1 - lx) + U[j + m + 1, None] * lx
    uy = U[j, None] * (1 - ref.y) + U[j + 1, None] * ref.y
    return ux - uy


def omega_omega_integral(u, params: FracParams, order: int = 8) -> float:
    """int int_{Omega x Omega} |u(x)-u(y)|^p / |x-y|^{N+sp} dx dy.

    Exact up to rounding for p = 2.  For other p the integrand has kinks
    inside element pairs and the result is accurate to roughly 1e-5.
    """
    U = u.full if isinstance(u, GridFunction) else np.asarray(u, dtype=float)
    grid = u.grid
    s, p = params.s, params.p
    beta = _beta(s, p)
    h = grid.h
    total = 0.0
    for m in range(grid.n):
        ref = reference_pair_rule(m, beta, order)
        d = _offset_diffs(U, m, ref)
        r = ref.x - ref.y
        total += np.sum(np.abs(d) ** p @ (ref.w * r ** (-1.0 - s * p)))
    return 2.0 * total * h ** (1.0 - s * p)


@dataclass(frozen=True, eq=False)
class ExteriorRule:
    """Weights W with  int_Omega g(x) kappa_p(x) dx ~= sum W g(x_q).

    On the two boundary elements the singular half of kappa is handled with a
    Gauss-Jacobi rule that absorbs the vanishing of g like dist^p, which is
    exact for g = |u|^p with u piecewise linear and zero on the boundary.
    """
    x: np.ndarray
    weights: np.ndarray
    elem: np.ndarray


@lru_cache(maxsize=64)
def exterior_rule(grid: Grid, s: float, p: float = 2.0, order: int = 8) -> ExteriorRule:
    a, b, h, n = grid.a, grid.b, grid.h, grid.n
    sp = s * p
    lg = gauss_legendre(order)
    jac = gauss_jacobi(order, p * (1.0 - s))
    c = 2.0 / sp
    xs, ws, es = [], [], []
    # smooth parts: both halves on interior elements, the far half on end elements
    for e in range(n):
        x = a + h * (e + lg.points)
        left = (x - a) ** (-sp) if 0 < e else 0.0
        right = (b - x) ** (-sp) if e < n - 1 else 0.0
        xs.append(x)
        ws.append(h * lg.weights * c * (left + right))
        es.append(np.full(order, e))
    # singular halves on the end elements, t = dist / h
    t = jac.points
    wj = c * h ** (1.0 - sp) * jac.weights * t ** (-p)
    xs += [a + h * t, b - h * t]
    ws += [wj, wj]
    es += [np.zeros(order, int), np.full(order, n - 1)]
    return ExteriorRule(np.concatenate(xs), np.concatenate(ws), np.concatenate(es))


def exterior_integral(u, params: FracParams, order: int = 8) -> float:
    """int_Omega |u|^p kappa_p dx."""
    rule = exterior_rule(u.grid, params.s, params.p, order)
    vals = np.interp(rule.x, u.grid.nodes, u.full)
    return float(np.sum(rule.weights * np.abs(vals) ** params.p))


def gagliardo_seminorm(u: GridFunction, params: FracParams, domain: str = "OmegaOmega",
                       order: int = 8) -> float:
    """||D_{s,p} u||_{L^p} over Omega x Omega or over R x R.

    The full-space value uses the decomposition into the Omega x Omega part and
    the kappa-weighted exterior term.  Accuracy of the Omega x Omega part
    degrades as sp -> 1 on coarse meshes because the boundary behaviour of
    kappa is then barely integrable.
    """
    if math.isinf(params.p):
        raise ValueError("seminorm requires finite p")
    val = omega_omega_integral(u, params, order)
    if domain == "FullSpace":
        val += exterior_integral(u, params, order)
    elif domain != "OmegaOmega":
        raise ValueError(f"unknown domain {domain!r}")
    return float(val ** (1.0 / params.p))


def norm_equivalence_ratios(grid: Grid, params: FracParams, samples: int = 20,
                            seed: int = 0, order: int = 8) -> np.ndarray:
    """FullSpace / OmegaOmega seminorm ratios for random grid functions."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(samples):
        u = GridFunction(grid, rng.standard_normal(grid.size))
        out.append(gagliardo_seminorm(u, params, "FullSpace", order)
                   / gagliardo_seminorm(u, params, "OmegaOmega", order))
    return np.array(out)


# ---------------------------------------------------------------------------
# dual elements


def sample_dsp(v, rule: PairRule) -> np.ndarray:
    """D_{s,p} v at the points of ``rule`` (s, p taken from the rule)."""
    g = rule.grid
    V = nodal_values(g, v)
    vx = np.interp(rule.x, g.nodes, V)
    vy = np.interp(rule.y, g.nodes, V)
    return (vx - vy) / np.abs(rule.x - rule.y) ** (1.0 / rule.p + rule.s)


@dataclass(frozen=True, eq=False)
class DualElement:
    """Representative (f0, f1) of a functional on W_0^{s,p}.

    ``f1`` holds samples at the points of ``rule``.  Only the part of f1 that is
    antisymmetric in (x, y) pairs with D_{s,p} v, and it is determined by its
    values on the half domain x > y, which is what is stored.
    """
    f0: GridFunction
    f1: np.ndarray
    rule: PairRule

    def __post_init__(self):
        f1 = np.asarray(self.f1, dtype=float).reshape(-1)
        if f1.shape[0] != self.rule.size:
            raise ValueError("f1 samples do not match the quadrature layout")
        if self.f0.grid != self.rule.grid:
            raise ValueError("f0 and f1 live on different grids")
        if not (np.all(np.isfinite(f1)) and np.all(np.isfinite(self.f0.values))):
            raise ValueError("dual element components must be finite")
        object.__setattr__(self, "f1", f1)

    @property
    def grid(self) -> Grid:
        return self.f0.grid

    @classmethod
    def from_functions(cls, grid: Grid, params: FracParams, f0=0.0, f1=None,
                       order: int = 8) -> "DualElement":
        """Build from a nodal datum f0 and a callable f1(x, y).

        The antisymmetric part of f1 is stored, so the pairing equals the full
        double integral for any f1.
        """
        rule = pair_rule(grid, params.s, params.p, order)
        g0 = f0 if isinstance(f0, GridFunction) else GridFunction.interpolate(grid, f0)
        if f1 is None:
            samples = np.zeros(rule.size)
        else:
            fxy = np.asarray(f1(rule.x, rule.y), float) * np.ones(rule.size)
            fyx = np.asarray(f1(rule.y, rule.x), float) * np.ones(rule.size)
            samples = 0.5 * (fxy - fyx)
        return cls(g0, samples, rule)

    @classmethod
    def zero(cls, grid: Grid, params: FracParams, order: int = 8) -> "DualElement":
        return cls.from_functions(grid, params, order=order)

    def scaled(self, c: float) -> "DualElement":
        return DualElement(self.f0 * c, self.f1 * c, self.rule)

    def f1_norm(self, q: float) -> float:
        """Discrete L^q(Omega x Omega) norm of f1 under the pair rule."""
        if math.isinf(q):
            return float(np.max(np.abs(self.f1))) if self.f1.size else 0.0
        return float((2.0 * np.sum(self.rule.weights * np.abs(self.f1) ** q)) ** (1.0 / q))

    def to_csv(self, f0_path, f1_path) -> None:
        to_csv(self.f0, f0_path)
        r = self.rule
        write_columns(f1_path, ["elem_i", "elem_j", "qx", "qy", "value"],
                      [r.elem_i, r.elem_j, r.x, r.y, self.f1])


def dual_pairing(f: DualElement, v, params: FracParams) -> float:
    """<f, v> = int f0 v dx + int int_{Omega x Omega} f1 D_{s,p} v dx dy."""
    if (params.s, params.p) != (f.rule.s, f.rule.p):
        raise ValueError("pairing parameters differ from the quadrature layout")
    if isinstance(v, GridFunction) and v.grid != f.grid:
        raise ValueError("grid mismatch")
    g = f.grid
    V = nodal_values(g, v)
    first = float(f.f0.full @ (mass_matrix(g, interior=False) @ V))
    second = 2.0 * float(np.sum(f.rule.weights * f.f1 * sample_dsp(V, f.rule)))
    return first + second


def dual_norm_components(u1_norm: float, u2_norm: float, p: float,
                         convention: str = "PSumNorm") -> float:
    """Norm of (u1, u2) in the dual of the product space L^p x L^p.

    ``SumNorm`` is the plain sum of the component norms.  ``PSumNorm`` is the
    Hoelder dual of the p-sum norm: the p'-sum, i.e. max for p = 1.
    """
    if u1_norm < 0 or u2_norm < 0:
        raise ValueError("component norms must be nonnegative")
    if convention == "SumNorm":
        return u1_norm + u2_norm
    if convention != "PSumNorm":
        raise ValueError(f"unknown convention {convention!r}")
    if p == 1:
        return max(u1_norm, u2_norm)
    if math.isinf(p):
        return u1_norm + u2_norm
    q = p / (p - 1.0)
    return (u1_norm ** q + u2_norm ** q) ** (1.0 / q)
