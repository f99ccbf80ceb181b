"""Penalty path for the state-constrained tracking problem."""
from fracstate import ControlProblem, FracParams, build_grid, solve_control


def main():
    g = build_grid(-1, 1, 128)
    res = solve_control(ControlProblem(g, FracParams(0.5), 1e-2, u_d=5.0, u_b=0.1))
    print(f"{'gamma':>8} {'violation':>12} {'cost':>12} {'iterations':>11}")
    for row in res.path:
        print(f"{row['gamma']:>8.0e} {row['violation']:>12.3e} {row['cost']:>12.6f} {row['iterations']:>11}")
    for key, val in res.report.as_dict().items():
        print(f"{key:>28}: {val}")


if __name__ == "__main__":
    main()
