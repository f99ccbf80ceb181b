"""Level sets, truncations and the De Giorgi iteration lemma.

The iteration lemma: if Phi is nonnegative, non-increasing and
Phi(h) <= c (h - k)^{-alpha} Phi(k)^delta for h > k >= k0 with delta > 1, then
Phi(k0 + d) = 0 where d^alpha = c Phi(k0)^{delta-1} 2^{alpha delta/(delta-1)}.
"""
from __future__ import annotations

import decimal
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .mesh import Grid, GridFunction, lp_norm
from .spaces import DualElement, FracParams, gagliardo_seminorm


class HypothesisWarning(UserWarning):
    """Raised when an estimate is evaluated outside its parameter regime."""


@dataclass(frozen=True)
class IterationLemmaInput:
    c: float
    alpha: float
    delta: float
    k0: float = 0.0
    phi0: float = 1.0

    def __post_init__(self):
        if not self.delta > 1:
            raise ValueError(f"delta must exceed 1, got {self.delta}")
        if not (self.c > 0 and self.alpha > 0):
            raise ValueError("c and alpha must be positive")
        if not (self.k0 >= 0 and self.phi0 >= 0):
            raise ValueError("k0 and phi0 must be nonnegative")


def degiorgi_threshold(inp: IterationLemmaInput) -> float:
    """k0 + d with d = (c phi0^{delta-1} 2^{alpha delta/(delta-1)})^{1/alpha}."""
    if inp.phi0 == 0:
        return inp.k0
    a, dl = inp.alpha, inp.delta
    log_d = (math.log(inp.c) + (dl - 1) * math.log(inp.phi0)
             + a * dl / (dl - 1) * math.log(2.0)) / a
    return inp.k0 + math.exp(log_d)


def degiorgi_verify(inp: IterationLemmaInput, steps: int = 60, shrink: float = 1.0) -> dict:
    """Iterate the recursion along k_m = k0 + d (1 - 2^{-m}).

    Each step applies the hypothesis with equality, the worst case allowed, so
    the iterates bound Phi(k_m) for every admissible Phi; since Phi is
    non-increasing the smallest iterate bounds Phi at the threshold.

    At the exact threshold the recursion sits on an unstable equilibrium: an
    error e in log Phi grows like delta^m e.  The iteration therefore runs in
    decimal arithmetic with enough digits to absorb that growth, and log d is
    recomputed at that precision from the same inputs.  ``shrink < 1`` uses
    the reduced step shrink * d to probe sharpness.
    """
    if steps < 10:
        raise ValueError("at least 10 steps are required")
    threshold = degiorgi_threshold(inp)
    if inp.phi0 == 0:
        return {"threshold": threshold, "d": 0.0, "bound_at_threshold": 0.0,
                "final_log_bound": -math.inf, "log_bounds": [-math.inf] * (steps + 1), "steps": steps,
                "threshold_agreement": 0.0}
    digits = 40 + int(math.ceil(steps * math.log10(inp.delta)))
    with decimal.localcontext() as ctx:
        ctx.prec = digits
        D = decimal.Decimal
        c, a, dl = D(inp.c), D(inp.alpha), D(inp.delta)
        ln2 = D(2).ln()
        log_c = c.ln()
        logs = [D(inp.phi0).ln()]
        log_d0 = (log_c + (dl - 1) * logs[0] + a * dl / (dl - 1) * ln2) / a
        log_d = log_d0 + D(shrink).ln()
        for m in range(steps):
            logs.append(log_c - a * (log_d - (m + 1) * ln2) + dl * logs[-1])
        lowest = min(logs)
        bound = float(lowest.exp()) if lowest > -800 else 0.0
        exact = D(inp.k0) + log_d0.exp()
        agree = abs(D(threshold) - exact) / exact
        d_hp = log_d.exp()
        return {"threshold": inp.k0 + float(d_hp), "d": float(d_hp), "bound_at_threshold": bound,
                "final_log_bound": float(logs[-1]), "log_bounds": [float(v) for v in logs],
                "steps": steps, "threshold_agreement": float(agree)}


def steps_to_reach(inp: IterationLemmaInput, target: float = 1e-13) -> int:
    """Steps after which the extremal bound phi0 2^{-m alpha/(delta-1)} is below target."""
    if inp.phi0 == 0:
        return 10
    rate = inp.alpha / (inp.delta - 1) * math.log(2.0)
    return max(10, int(math.ceil((math.log(inp.phi0) - math.log(target)) / rate)) + 1)


# ---------------------------------------------------------------------------
# level sets and truncations


def truncate(u: GridFunction, k: float) -> GridFunction:
    """Nodal truncation (|u_i| - k)^+ sgn(u_i)."""
    v = u.values
    return GridFunction(u.grid, np.maximum(np.abs(v) - k, 0.0) * np.sign(v))


def level_set_measure(u: GridFunction, k: float) -> float:
    """|{x in Omega : |u(x)| >= k}| for the piecewise-linear u, exactly."""
    if k <= 0:
        return u.grid.length
    U = u.full
    h = u.grid.h
    total = 0.0
    for sign in (1.0, -1.0):
        a, b = sign * U[:-1], sign * U[1:]
        hi, lo = np.maximum(a, b), np.minimum(a, b)
        full = lo >= k
        part = (~full) & (hi >= k)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            frac = np.where(part, np.minimum((hi - k) / np.where(hi > lo, hi - lo, 1.0), 1.0), 0.0)
        total += h * (np.count_nonzero(full) + float(np.sum(frac)))
    return float(total)


@dataclass(frozen=True, eq=False)
class LevelSetProfile:
    u: GridFunction
    k: np.ndarray
    phi: np.ndarray
    measure: np.ndarray
    r: float

    def truncation(self, idx: int) -> GridFunction:
        return truncate(self.u, float(self.k[idx]))


def profile_exponent(params: FracParams, r: float = 4.0) -> float:
    """2* when N > 2s, otherwise the configured r."""
    ts = params.two_star
    if ts is not None:
        return ts
    if not r > 1:
        raise ValueError("profile exponent r must exceed 1")
    return float(r)


def level_profile(u: GridFunction, params: FracParams, k_samples: int = 65,
                  r: float = 4.0, k=None) -> LevelSetProfile:
    """Phi(k) = |A_k|^{1/r} on an equispaced k-grid over [0, ||u||_inf]."""
    if not np.all(np.isfinite(u.values)):
        raise ValueError("u must be finite")
    rr = profile_exponent(params, r)
    if k is None:
        top = float(np.max(np.abs(u.values), initial=0.0))
        k = np.linspace(0.0, top, k_samples) if top > 0 else np.linspace(0.0, 1.0, k_samples)
    k = np.asarray(k, dtype=float)
    meas = np.array([level_set_measure(u, kk) for kk in k])
    return LevelSetProfile(u, k, meas ** (1.0 / rr), meas, rr)


def truncation_seminorms(profile: LevelSetProfile, params: FracParams) -> np.ndarray:
    """Full-space seminorm |u_k|_{s,2} at each sampled k."""
    p2 = params.with_p(2.0)
    return np.array([gagliardo_seminorm(profile.truncation(i), p2, "FullSpace")
                     for i in range(len(profile.k))])


def energy_inequality_gaps(u: GridFunction, A: np.ndarray, ks) -> np.ndarray:
    """E(u_k, u_k) - E(u_k, u) for nodal truncations; nonpositive when it holds."""
    out = []
    for k in ks:
        uk = truncate(u, k).values
        out.append(uk @ A @ uk - uk @ A @ u.values)
    return np.array(out)


# ---------------------------------------------------------------------------
# L^infinity bound for dual data


def bound_hypotheses(params: FracParams, p: float, q: float) -> bool:
    """p > N/(2s) and q > N/s."""
    N, s = params.N, params.s
    return p > N / (2 * s) and q > N / s


def linfty_bound_estimate(f: DualElement, grid: Grid, params_pq: tuple) -> float:
    """Data functional ||f0||_{L^p} + ||f1||_{L^q}."""
    p, q = params_pq
    if f.grid != grid:
        raise ValueError("dual element lives on a different grid")
    params = FracParams(f.rule.s, f.rule.p)
    if not bound_hypotheses(params, p, q):
        warnings.warn(f"(p, q) = ({p}, {q}) outside the L^inf bound regime", HypothesisWarning,
                      stacklevel=2)
    return lp_norm(f.f0, p) + f.f1_norm(q)


def holder_exponents(N: int, s: float, p: float, q: float) -> dict:
    """Exponent bookkeeping of the truncation argument, N > 2s.

    p1 and q1 are the conjugate-type exponents that appear when Hoelder's
    inequality is applied to the level-set terms; delta1 = 2*/p1, delta2 = 2*/q1.
    """
    if not N > 2 * s:
        raise ValueError("requires N > 2s")
    two_star = 2 * N / (N - 2 * s)
    p1 = p * two_star / (p * two_star - p - two_star) if math.isfinite(p) else two_star / (two_star - 1)
    q1 = 2 * q / (q - 2) if math.isfinite(q) else 2.0
    return {"two_star": two_star, "p1": p1, "q1": q1,
            "delta1": two_star / p1, "delta2": two_star / q1}
