"""Convergence to the closed-form solution for unit data on (-1, 1)."""
import numpy as np
from scipy.special import gamma

from fracstate import FracParams, boundary_decay, build_grid, solve_state


def exact(x, s):
    return gamma(0.5) / (4 ** s * gamma(1 + s) * gamma(0.5 + s)) * (1 - x ** 2) ** s


def main():
    for s in (0.25, 0.5, 0.75):
        print(f"s = {s}")
        print(f"{'n':>6} {'max error':>12} {'decay exponent':>16}")
        for n in (64, 128, 256, 512):
            g = build_grid(-1, 1, n)
            sol = solve_state(1.0, g, FracParams(s))
            err = np.max(np.abs(sol.u.values - exact(g.interior, s)))
            print(f"{n:>6} {err:>12.3e} {boundary_decay(sol, s).exponent:>16.3f}")


if __name__ == "__main__":
    main()
