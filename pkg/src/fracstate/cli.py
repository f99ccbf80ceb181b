"""Command-line driver: ``fracstate <subcommand> --config run.yaml``.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import bounds, control, verify
from .mesh import GridFunction, Grid, from_csv, lp_norm, to_csv, write_columns
from .operator import RadonMeasure, assemble_stiffness
from .solve_measure import empirical_measure_constant, solve_measure
from .solve_state import (SolverError, boundary_decay, empirical_state_constant, solve_state,
                          sup_norm_ratio)
from .spaces import FracParams

SUBCOMMANDS = ("assemble", "solve-state", "solve-measure", "bounds", "solve-control", "verify")

DEFAULTS = {
    "domain": {"a": -1.0, "b": 1.0},
    "n": 64,
    "s": 0.5,
    "p": 2.0,
    "order": 8,
    "seed": 0,
    "out": "out",
    "state": {"datum": 1.0, "method": "cholesky", "tol": 1e-10, "samples": 0},
    "measure": {"atoms": "0:1", "density": None, "check": "auto", "samples": 0},
    "bounds": {"datum": 1.0, "k_samples": 65, "r": 4.0,
               "degiorgi": {"c": 1.0, "alpha": 1.0, "delta": 2.0, "k0": 0.0, "phi0": 1.0,
                            "steps": 60}},
    "control": {"alpha": 1e-2, "u_d": 5.0, "u_b": 0.1, "z_lo": "-inf", "z_hi": "inf",
                "gammas": [1e2, 1e3, 1e4, 1e5, 1e6, 1e7], "tol": 1e-10, "max_iter": 500,
                "method": "ssn", "z_hat": 0.0},
    "verify": {"n": 64, "control_n": 128},
}


class ConfigError(ValueError):
    pass


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if k not in base:
            raise ConfigError(f"unknown config key '{k}'")
        if isinstance(base[k], dict) and base[k] and isinstance(v, dict):
            out[k] = _merge(base[k], v)
        else:
            out[k] = v
    return out


def _num(cfg, path, cast=float, check=None, msg=""):
    node = cfg
    for part in path.split("."):
        node = node[part]
    try:
        val = cast(node)
    except (TypeError, ValueError):
        raise ConfigError(f"field '{path}': cannot read {node!r} as {cast.__name__}") from None
    if check is not None and not check(val):
        raise ConfigError(f"field '{path}': {msg} (got {node!r})")
    return val


def load_config(path: str | None) -> dict:
    raw = {}
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file '{path}' not found")
        try:
            raw = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file '{path}' is not valid YAML/JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
    cfg = _merge(DEFAULTS, raw)
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    a = _num(cfg, "domain.a")
    _num(cfg, "domain.b", check=lambda b: b > a, msg="must exceed domain.a")
    _num(cfg, "n", int, lambda n: n >= 2, "must be at least 2")
    _num(cfg, "s", float, lambda s: 0 < s < 1, "must lie in (0, 1)")
    _num(cfg, "p", float, lambda p: p >= 1, "must be at least 1")
    _num(cfg, "order", int, lambda o: o >= 2, "must be at least 2")
    _num(cfg, "seed", int)
    _num(cfg, "control.alpha", float, lambda x: x > 0, "must be positive")
    g = cfg["control"]["gammas"]
    if not isinstance(g, list) or not g:
        raise ConfigError("field 'control.gammas': must be a non-empty list")
    try:
        gv = [float(x) for x in g]
    except (TypeError, ValueError):
        raise ConfigError("field 'control.gammas': entries must be numbers") from None
    if any(x <= 0 for x in gv) or any(b <= a_ for a_, b in zip(gv, gv[1:])):
        raise ConfigError("field 'control.gammas': must be positive and strictly increasing")
    if cfg["control"]["method"] not in ("ssn", "pg"):
        raise ConfigError("field 'control.method': must be 'ssn' or 'pg'")
    _num(cfg, "bounds.r", float, lambda r: r > 1, "must exceed 1")
    _num(cfg, "bounds.k_samples", int, lambda k: k >= 2, "must be at least 2")
    _num(cfg, "bounds.degiorgi.delta", float, lambda d: d > 1, "must exceed 1")
    _num(cfg, "bounds.degiorgi.steps", int, lambda k: k >= 10, "must be at least 10")
    for key in ("u_d", "u_b", "z_lo", "z_hi", "z_hat"):
        _datum_spec(cfg["control"][key], f"control.{key}")
    _datum_spec(cfg["state"]["datum"], "state.datum")
    _datum_spec(cfg["bounds"]["datum"], "bounds.datum")
    parse_atoms(cfg["measure"]["atoms"])
    dens = cfg["measure"]["density"]
    if dens is not None and not Path(str(dens)).is_file():
        raise ConfigError(f"field 'measure.density': file '{dens}' not found")


def _datum_spec(v, field):
    """Numbers (incl. 'inf'), or a path to an x,value CSV file."""
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            pass
        if not Path(v).is_file():
            raise ConfigError(f"field '{field}': '{v}' is neither a number nor an existing file")
        return v
    raise ConfigError(f"field '{field}': expected a number or a file path")


def _datum(v, field):
    spec = _datum_spec(v, field)
    return from_csv(spec) if isinstance(spec, str) else spec


def parse_atoms(text) -> tuple:
    """'x:w,x:w' -> ((x, w), ...)."""
    if text in (None, ""):
        return ()
    out = []
    for item in str(text).split(","):
        try:
            x, w = item.split(":")
            out.append((float(x), float(w)))
        except ValueError:
            raise ConfigError(f"field 'measure.atoms': cannot parse '{item}' as x:w") from None
    return tuple(out)


def _grid(cfg) -> Grid:
    return Grid(float(cfg["domain"]["a"]), float(cfg["domain"]["b"]), int(cfg["n"]))


def _params(cfg) -> FracParams:
    return FracParams(float(cfg["s"]), float(cfg["p"]))


def _dump(path, data) -> None:
    Path(path).write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")


def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# ---------------------------------------------------------------------------
# subcommands


def cmd_assemble(cfg, out: Path) -> int:
    grid, params = _grid(cfg), _params(cfg)
    K = assemble_stiffness(grid, params, int(cfg["order"]))
    write_columns(out / "stiffness.csv", [f"col_{j + 1}" for j in range(grid.size)], K.A.T)
    lam = np.linalg.eigvalsh(K.A)
    _dump(out / "assemble_report.json", {
        "n": grid.n, "h": grid.h, "s": params.s, "cns": params.cns,
        "symmetry_error": float(np.max(np.abs(K.A - K.A.T))),
        "min_eigenvalue": lam.min(), "max_eigenvalue": lam.max(),
        "condition_number": lam.max() / lam.min()})
    return 0


def cmd_solve_state(cfg, out: Path) -> int:
    grid, params = _grid(cfg), _params(cfg)
    st = cfg["state"]
    z = _datum(st["datum"], "state.datum")
    K = assemble_stiffness(grid, params, int(cfg["order"]))
    sol = solve_state(z, grid, params, K, method=st["method"], tol=float(st["tol"]))
    to_csv(sol.u, out / "u.csv")
    diag = {"sup_norm": sol.sup_norm, "residual": sol.residual, "n": grid.n, "s": params.s,
            "p": params.p}
    try:
        diag["ratio"] = sup_norm_ratio(sol, z, params)
    except ValueError:
        diag["ratio"] = float("nan")
    if grid.n >= 32:
        dec = boundary_decay(sol, params.s)
        diag.update(decay_exponent=dec.exponent, decay_degenerate=dec.degenerate)
    if int(st["samples"]) > 0:
        emp = empirical_state_constant(grid, params, int(st["samples"]), int(cfg["seed"]), K)
        diag["empirical_constant"] = emp["max_ratio"]
    _dump(out / "diagnostics.json", diag)
    return 0


def cmd_solve_measure(cfg, out: Path) -> int:
    grid, params = _grid(cfg), _params(cfg)
    m = cfg["measure"]
    dens = from_csv(m["density"]) if m["density"] else None
    if dens is not None and dens.grid != grid:
        dens = GridFunction.interpolate(grid, dens)
    try:
        mu = RadonMeasure(grid, parse_atoms(m["atoms"]), dens)
    except ValueError as exc:
        raise ConfigError(f"field 'measure.atoms': {exc}") from None
    K = assemble_stiffness(grid, params, int(cfg["order"]))
    sol = solve_measure(mu, grid, params, K, check=m["check"], seed=int(cfg["seed"]))
    to_csv(sol.u, out / "u.csv")
    rep = {"duality_residual": sol.duality_residual, "total_variation": mu.total_variation(),
           "lp_conj_norm": sol.norms["lp_conj"], "n": grid.n}
    if int(m["samples"]) > 0:
        emp = empirical_measure_constant(grid, params, int(m["samples"]), int(cfg["seed"]), K)
        rep["empirical_constant"] = emp["max_ratio"]
    _dump(out / "duality_report.json", rep)
    return 0


def cmd_bounds(cfg, out: Path) -> int:
    grid, params = _grid(cfg), _params(cfg)
    b = cfg["bounds"]
    sol = solve_state(_datum(b["datum"], "bounds.datum"), grid, params,
                      assemble_stiffness(grid, params, int(cfg["order"])))
    prof = bounds.level_profile(sol.u, params, int(b["k_samples"]), float(b["r"]))
    write_columns(out / "level_profile.csv", ["k", "phi", "measure"], [prof.k, prof.phi, prof.measure])
    dg = b["degiorgi"]
    inp = bounds.IterationLemmaInput(float(dg["c"]), float(dg["alpha"]), float(dg["delta"]),
                                     float(dg["k0"]), float(dg["phi0"]))
    rep = bounds.degiorgi_verify(inp, int(dg["steps"]))
    _dump(out / "bound_report.json", {
        "profile_exponent": prof.r, "sup_norm": sol.sup_norm,
        "degiorgi_threshold": bounds.degiorgi_threshold(inp),
        "degiorgi_bound_at_threshold": rep["bound_at_threshold"],
        "degiorgi_threshold_agreement": rep["threshold_agreement"],
        "degiorgi_steps": rep["steps"]})
    return 0


def _control_problem(cfg) -> control.ControlProblem:
    c = cfg["control"]
    return control.ControlProblem(
        _grid(cfg), _params(cfg).with_p(2.0), float(c["alpha"]),
        u_d=_datum(c["u_d"], "control.u_d"), u_b=_datum(c["u_b"], "control.u_b"),
        z_lo=_datum(c["z_lo"], "control.z_lo"), z_hi=_datum(c["z_hi"], "control.z_hi"),
        gammas=tuple(float(x) for x in c["gammas"]), tol=float(c["tol"]),
        max_iter=int(c["max_iter"]), method=c["method"], order=int(cfg["order"]))


def cmd_solve_control(cfg, out: Path) -> int:
    try:
        P = _control_problem(cfg)
    except ValueError as exc:
        raise ConfigError(f"control block: {exc}") from None
    z_hat = _datum(cfg["control"]["z_hat"], "control.z_hat")
    slater = control.check_slater(P, z_hat)
    res = control.solve_control(P, z_hat=z_hat)
    for name, f in (("z", res.z), ("u", res.u), ("xi", res.xi)):
        to_csv(f, out / f"{name}.csv")
    dens = np.concatenate(([0.0], res.report.gamma * P.violation(res.u.values), [0.0]))
    write_columns(out / "mu_density.csv", ["x", "value"], [P.grid.nodes, dens])
    rows = list(zip(*res.trajectory))
    write_columns(out / "trajectory.csv", ["iteration", "gamma", "J", "violation"],
                  [np.array(rows[0], dtype=int), rows[1], rows[2], rows[3]])
    rep = res.report.as_dict()
    rep.update(slater_margin=slater["margin"], slater_feasible=slater["feasible"])
    _dump(out / "kkt_report.json", rep)
    return 0


def cmd_verify(cfg, out: Path) -> int:
    v = cfg["verify"]
    records = verify.run_suite(float(cfg["domain"]["a"]), float(cfg["domain"]["b"]), int(v["n"]),
                               float(cfg["s"]), int(cfg["seed"]), float(cfg["bounds"]["r"]),
                               int(v["control_n"]))
    ok = all(r["passed"] for r in records)
    _dump(out / "verify_report.json", {"passed": ok, "checks": records})
    for r in records:
        tag = "PASS" if r["passed"] else "FAIL"
        extra = " (report only)" if r["report_only"] else ""
        print(f"{tag} {r['name']}: {r['value']:.3e} vs {r['threshold']:.1e}{extra}")
    return 0 if ok else 1


COMMANDS = {"assemble": cmd_assemble, "solve-state": cmd_solve_state,
            "solve-measure": cmd_solve_measure, "bounds": cmd_bounds,
            "solve-control": cmd_solve_control, "verify": cmd_verify}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fracstate", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="YAML or JSON run configuration")
    ap.add_argument("--out", help="output directory (overrides config 'out')")
    ap.add_argument("--atoms", help="measure atoms 'x:w,...' (overrides measure.atoms)")
    ap.add_argument("--density", help="measure density CSV (overrides measure.density)")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.atoms is not None:
            cfg["measure"]["atoms"] = args.atoms
        if args.density is not None:
            cfg["measure"]["density"] = args.density
        if args.out:
            cfg["out"] = args.out
        validate(cfg)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        _dump(out / "resolved_config.json", cfg)
        return COMMANDS[args.subcommand](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, control.ControlError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
