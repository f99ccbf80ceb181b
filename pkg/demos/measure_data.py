"""Very weak solutions for atomic data and the transposition identity."""
from fracstate import FracParams, RadonMeasure, assemble_stiffness, build_grid, measure_stability, solve_measure


def main():
    par = FracParams(0.5)
    g = build_grid(-1, 1, 64)
    K = assemble_stiffness(g, par)
    mu = RadonMeasure(g, ((-0.4, 1.0), (0.5, -0.5)))
    sol = solve_measure(mu, g, par, K, check="basis")
    print(f"duality residual over the full hat basis: {sol.duality_residual:.2e}")
    g = build_grid(-1, 1, 256)
    K = assemble_stiffness(g, par)
    print(f"{'atom':>6} {'Lp ratio':>10} {'seminorm ratio':>16}")
    for x in (0.0, 0.5, 0.9, 0.95):
        d = RadonMeasure.dirac(g, x)
        r = measure_stability(solve_measure(d, g, par, K, check="none"), d, par)
        print(f"{x:>6} {r['lp_ratio']:>10.4f} {r['seminorm_ratio']:>16.4f}")


if __name__ == "__main__":
    main()
