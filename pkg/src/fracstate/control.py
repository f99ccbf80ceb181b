"""Optimal control with box control constraints and an upper state bound.

    min  1/2 ||u - u_d||^2 + alpha/2 ||z||^2
    s.t. (-Delta)^s u = z in Omega, u = 0 outside,
         u <= u_b,  z_lo <= z <= z_hi.

The state constraint is handled by Moreau-Yosida penalisation
gamma/2 ||(u - u_b)^+||^2 along an increasing gamma schedule.  Controls are
nodal vectors paired through the lumped mass h I, so the optimality condition
z = P(-xi/alpha) holds nodewise.  The tracking term uses the consistent mass
matrix.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .mesh import Grid, GridFunction, mass_matrix, nodal_values
from .operator import RadonMeasure, StiffnessMatrix, assemble_stiffness, load_density, load_measure
from .spaces import FracParams

DEFAULT_GAMMAS = (1e2, 1e3, 1e4, 1e5, 1e6, 1e7)


class ControlError(RuntimeError):
    """Optimizer failure; ``result`` holds the last iterate when available."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


def _interior_bound(grid, v, name):
    if v is None:
        return None
    if isinstance(v, (int, float)) and math.isinf(v):
        return np.full(grid.size, float(v))
    arr = np.asarray(v, dtype=float) if not callable(v) else None
    if arr is not None and arr.ndim == 1 and np.any(np.isinf(arr)):
        if arr.shape == (grid.n + 1,):
            return arr[1:-1].copy()
        if arr.shape == (grid.size,):
            return arr.copy()
        raise ValueError(f"{name} has the wrong length")
    return nodal_values(grid, v)[1:-1]


@dataclass(frozen=True, eq=False)
class ControlProblem:
    grid: Grid
    params: FracParams
    alpha: float
    u_d: object = 0.0
    u_b: object = math.inf
    z_lo: object = -math.inf
    z_hi: object = math.inf
    gammas: tuple = DEFAULT_GAMMAS
    tol: float = 1e-10
    max_iter: int = 500
    method: str = "ssn"
    order: int = 8

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        g = list(self.gammas)
        if not g or any(x <= 0 for x in g) or any(b <= a for a, b in zip(g, g[1:])):
            raise ValueError("gamma schedule must be positive and strictly increasing")
        if self.method not in ("ssn", "pg"):
            raise ValueError(f"unknown method {self.method!r}")
        if np.any(self.lo > self.hi):
            raise ValueError("z_lo must not exceed z_hi")
        object.__setattr__(self, "gammas", tuple(float(x) for x in g))

    # cached derived data -------------------------------------------------
    def _cached(self, key, fn):
        if key not in self.__dict__:
            object.__setattr__(self, key, fn())
        return self.__dict__[key]

    @property
    def lo(self) -> np.ndarray:
        return self._cached("_lo", lambda: _interior_bound(self.grid, self.z_lo, "z_lo"))

    @property
    def hi(self) -> np.ndarray:
        return self._cached("_hi", lambda: _interior_bound(self.grid, self.z_hi, "z_hi"))

    @property
    def ub_full(self) -> np.ndarray:
        def build():
            v = self.u_b
            if isinstance(v, (int, float)) and math.isinf(v):
                return np.full(self.grid.n + 1, float(v))
            return nodal_values(self.grid, v)
        return self._cached("_ub", build)

    @property
    def ub(self) -> np.ndarray:
        return self.ub_full[1:-1]

    @property
    def ud_full(self) -> np.ndarray:
        return self._cached("_ud", lambda: nodal_values(self.grid, self.u_d))

    @property
    def stiffness(self) -> StiffnessMatrix:
        return self._cached("_K", lambda: assemble_stiffness(self.grid, self.params, self.order))

    @property
    def constrained(self) -> bool:
        return bool(np.any(np.isfinite(self.ub)))

    def project(self, z: np.ndarray) -> np.ndarray:
        return np.clip(z, self.lo, self.hi)

    # reduced functional ----------------------------------------------------
    def state(self, z: np.ndarray) -> np.ndarray:
        return self.stiffness.solve(self.grid.h * z)[0]

    def tracking_load(self, u: np.ndarray) -> np.ndarray:
        U = np.concatenate(([0.0], u, [0.0]))
        return load_density(U - self.ud_full, self.grid).values

    def violation(self, u: np.ndarray) -> np.ndarray:
        return np.maximum(u - self.ub, 0.0) if self.constrained else np.zeros_like(u)

    def cost(self, z: np.ndarray, u: np.ndarray | None = None, gamma: float = 0.0) -> float:
        u = self.state(z) if u is None else u
        h = self.grid.h
        E = np.concatenate(([0.0], u, [0.0])) - self.ud_full
        J = 0.5 * E @ mass_matrix(self.grid, interior=False) @ E + 0.5 * self.alpha * h * (z @ z)
        if gamma:
            v = self.violation(u)
            J += 0.5 * gamma * h * (v @ v)
        return float(J)

    def cost_change(self, z, u, zt, ut, gamma: float = 0.0) -> float:
        """J(zt) - J(z) computed from increments to avoid cancellation."""
        h = self.grid.h
        E = np.concatenate(([0.0], u, [0.0])) - self.ud_full
        dE = np.concatenate(([0.0], ut - u, [0.0]))
        dz = zt - z
        out = dE @ mass_matrix(self.grid, interior=False) @ (E + 0.5 * dE)
        out += self.alpha * h * (dz @ (z + 0.5 * dz))
        if gamma:
            v, vt = self.violation(u), self.violation(ut)
            out += 0.5 * gamma * h * ((vt - v) @ (vt + v))
        return float(out)

    def multiplier(self, u: np.ndarray, gamma: float) -> RadonMeasure:
        """mu_gamma as nodal atoms with weights h gamma (u - u_b)^+."""
        dens = gamma * self.violation(u)
        idx = np.nonzero(dens > 0)[0]
        x = self.grid.interior[idx]
        return RadonMeasure(self.grid, tuple(zip(x.tolist(), (self.grid.h * dens[idx]).tolist())))

    def adjoint(self, u: np.ndarray, gamma: float) -> np.ndarray:
        rhs = self.tracking_load(u) + self.grid.h * gamma * self.violation(u)
        return self.stiffness.solve(rhs)[0]


@dataclass
class KktReport:
    gamma: float
    primal_feasibility: float
    multiplier_nonnegativity: float
    multiplier_total_variation: float
    complementarity: float
    vi_residual: float
    adjoint_residual: float
    state_residual: float
    cost: float
    iterations: int
    cost_trajectory: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k != "cost_trajectory"}


@dataclass
class ControlResult:
    z: GridFunction
    u: GridFunction
    xi: GridFunction
    mu: RadonMeasure
    report: KktReport
    trajectory: list
    path: list

    def __iter__(self):
        return iter((self.z, self.u, self.xi, self.report))


def check_slater(problem: ControlProblem, z_hat, eps: float = 1e-8) -> dict:
    """Margin min over all nodes of u_b - u(z_hat), boundary included."""
    g = problem.grid
    z = nodal_values(g, z_hat)[1:-1]
    if np.any(z < problem.lo) or np.any(z > problem.hi):
        raise ValueError("z_hat violates the control bounds")
    U = np.concatenate(([0.0], problem.state(z), [0.0]))
    margin = float(np.min(problem.ub_full - U))
    return {"margin": margin, "feasible": bool(margin > eps)}


def projection_residual(z, xi, problem: ControlProblem) -> float:
    """||z - P(-xi/alpha)||_inf."""
    zv = z.values if isinstance(z, GridFunction) else np.asarray(z, float)
    xv = xi.values if isinstance(xi, GridFunction) else np.asarray(xi, float)
    return float(np.max(np.abs(zv - problem.project(-xv / problem.alpha)), initial=0.0))


def adjoint_solve(u: GridFunction, problem: ControlProblem, mu: RadonMeasure | None = None) -> GridFunction:
    """A xi = load_density(u - u_d) + load_measure(mu)."""
    rhs = problem.tracking_load(u.values)
    if mu is not None:
        rhs = rhs + load_measure(mu, problem.grid).values
    return GridFunction(problem.grid, problem.stiffness.solve(rhs)[0])


def dense_kkt_solve(problem: ControlProblem) -> tuple:
    """Unconstrained optimality system solved as one dense linear system.

        A u - h z        = 0
        -M u + A xi      = -M_full u_d (interior rows)
        alpha z + xi     = 0
    """
    g = problem.grid
    A = problem.stiffness.A
    M = mass_matrix(g)
    m, h = g.size, g.h
    I, Z = np.eye(m), np.zeros((m, m))
    K = np.block([[A, -h * I, Z], [-M, Z, A], [Z, problem.alpha * I, I]])
    cd = (mass_matrix(g, interior=False) @ problem.ud_full)[1:-1]
    rhs = np.concatenate([np.zeros(m), -cd, np.zeros(m)])
    sol = np.linalg.solve(K, rhs)
    return sol[m:2 * m], sol[:m], sol[2 * m:]


# ---------------------------------------------------------------------------
# optimizers


def _pg_step(problem, z, u, J, grad, gamma, t0, c=1e-4, shrink=0.5, max_backtrack=60):
    h = problem.grid.h
    t = t0
    for _ in range(max_backtrack):
        zt = problem.project(z - t * grad)
        dz = zt - z
        if not np.any(dz):
            return z, None, J, 0.0
        ut = problem.state(zt)
        dJ = problem.cost_change(z, u, zt, ut, gamma)
        if dJ <= c * h * (grad @ dz):
            return zt, ut, J + dJ, t
        t *= shrink
    return None


def _ssn_direction(problem, z, u, xi, gamma):
    a, h = problem.alpha, problem.grid.h
    w = -xi / a
    free = (w > problem.lo) & (w < problem.hi)
    F = z - problem.project(w)
    Du = (gamma * (problem.violation(u) > 0)) if gamma else np.zeros_like(u)
    K = problem.stiffness
    S = K.solve(h * np.eye(len(z)))[0]
    G = K.solve((mass_matrix(problem.grid) + h * np.diag(Du)) @ S)[0]
    Jac = np.eye(len(z)) + (free[:, None] / a) * G
    return -np.linalg.solve(Jac, F)


def _minimize(problem, z, gamma, trajectory, counter):
    c, h = 1e-4, problem.grid.h
    u = problem.state(z)
    J = problem.cost(z, u, gamma)
    xi = problem.adjoint(u, gamma)
    t_bb = 1.0 / problem.alpha
    prev = None
    for it in range(problem.max_iter):
        res = projection_residual(z, xi, problem)
        if res <= problem.tol:
            return z, u, xi, J, it
        grad = problem.alpha * z + xi
        accepted = False
        if problem.method == "ssn":
            d = _ssn_direction(problem, z, u, xi, gamma)
            t = 1.0
            for _ in range(30):
                zt = problem.project(z + t * d)
                dz = zt - z
                slope = h * (grad @ dz)
                if slope >= 0:
                    break
                ut = problem.state(zt)
                dJ = problem.cost_change(z, u, zt, ut, gamma)
                Jt = J + dJ
                if dJ <= c * slope:
                    accepted = True
                    break
                t *= 0.5
        if not accepted:
            if prev is not None:
                sz, sg = z - prev[0], grad - prev[1]
                sy = sz @ sg
                t_bb = (sz @ sz) / sy if sy > 0 else 1.0 / problem.alpha
            out = _pg_step(problem, z, u, J, grad, gamma, t_bb)
            if out is None:
                raise ControlError(f"line search stalled at gamma={gamma:g}, residual {res:.3e}",
                                   (z, u, xi))
            zt, ut, Jt, _ = out
            if ut is None:
                return z, u, xi, J, it
        if Jt > J:
            raise ControlError("cost increased on an accepted step", (z, u, xi))
        prev = (z, grad)
        z, u, J = zt, ut, Jt
        xi = problem.adjoint(u, gamma)
        counter[0] += 1
        trajectory.append((counter[0], gamma, J, float(np.max(problem.violation(u), initial=0.0))))
    res = projection_residual(z, xi, problem)
    if res <= max(problem.tol, 1e-8):
        return z, u, xi, J, problem.max_iter
    raise ControlError(f"no convergence at gamma={gamma:g}; residual {res:.3e}", (z, u, xi))


def solve_control(problem: ControlProblem, z0=None, z_hat=None, slack: float = 1e-12) -> ControlResult:
    """Moreau-Yosida path following with warm starts across the gamma schedule."""
    g = problem.grid
    if z_hat is not None:
        sl = check_slater(problem, z_hat)
        if not sl["feasible"]:
            warnings.warn(f"Slater check failed: margin {sl['margin']:.3e}", stacklevel=2)
    z = problem.project(np.zeros(g.size) if z0 is None else nodal_values(g, z0)[1:-1])
    gammas = problem.gammas if problem.constrained else (0.0,)
    trajectory, path, counter = [], [], [0]
    total = 0
    last_violation = math.inf
    for gamma in gammas:
        u0 = problem.state(z)
        trajectory.append((counter[0], gamma, problem.cost(z, u0, gamma),
                           float(np.max(problem.violation(u0), initial=0.0))))
        z, u, xi, J, its = _minimize(problem, z, gamma, trajectory, counter)
        total += its
        viol = float(np.max(problem.violation(u), initial=0.0))
        path.append({"gamma": gamma, "violation": viol, "cost": J, "iterations": its})
        if viol > last_violation + slack:
            raise ControlError(f"penalty path diverged at gamma={gamma:g}",
                               _assemble(problem, z, u, xi, gamma, total, trajectory, path))
        last_violation = viol
    return _assemble(problem, z, u, xi, gammas[-1], total, trajectory, path)


def _assemble(problem, z, u, xi, gamma, iterations, trajectory, path) -> ControlResult:
    g, K = problem.grid, problem.stiffness
    mu = problem.multiplier(u, gamma)
    dens = gamma * problem.violation(u)
    rhs_adj = problem.tracking_load(u) + load_measure(mu, g).values
    rhs_state = g.h * z
    viol = problem.violation(u)
    comp = mu.integrate(np.concatenate(([0.0], problem.ub - u, [0.0]))) if mu.atoms else 0.0
    report = KktReport(
        gamma=float(gamma),
        primal_feasibility=float(np.max(viol, initial=0.0)),
        multiplier_nonnegativity=float(np.min(dens, initial=0.0)),
        multiplier_total_variation=mu.total_variation(),
        complementarity=float(comp),
        vi_residual=projection_residual(z, xi, problem),
        adjoint_residual=_rel(K.A @ xi - rhs_adj, rhs_adj),
        state_residual=_rel(K.A @ u - rhs_state, rhs_state),
        cost=problem.cost(z, u),
        iterations=int(iterations),
        cost_trajectory=[row[2] for row in trajectory],
    )
    return ControlResult(GridFunction(g, z), GridFunction(g, u), GridFunction(g, xi), mu,
                         report, trajectory, path)


def _rel(r, b):
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(r) / nb) if nb > 0 else float(np.linalg.norm(r))


def polar_cone_check(mu: RadonMeasure, samples: int = 100, seed: int = 0) -> float:
    """max <mu, w> over random nonpositive nodal w; <= 0 for a nonnegative measure."""
    rng = np.random.default_rng(seed)
    g = mu.grid
    worst = -math.inf
    for _ in range(samples):
        w = -rng.uniform(0.0, 1.0, g.n + 1)
        w[0] = w[-1] = 0.0
        worst = max(worst, mu.integrate(w))
    return worst
