import csv
import json

import numpy as np
import pytest
import yaml

from fracstate.cli import main


def write_cfg(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def run(tmp_path, sub, cfg=None, *extra):
    args = [sub, "--out", str(tmp_path / sub)]
    if cfg is not None:
        args += ["--config", write_cfg(tmp_path / f"{sub}.yaml", cfg)]
    return main(args + list(extra)), tmp_path / sub


def test_assemble(tmp_path):
    code, out = run(tmp_path, "assemble", {"n": 4, "s": 0.5})
    assert code == 0
    head, A = read_csv(out / "stiffness.csv")
    assert A.shape == (3, 3) and np.allclose(A, A.T, atol=1e-12)
    rep = json.loads((out / "assemble_report.json").read_text())
    assert rep["min_eigenvalue"] > 0 and rep["symmetry_error"] <= 1e-12


def test_solve_state_closed_form(tmp_path):
    code, out = run(tmp_path, "solve-state", {"n": 256, "state": {"datum": 1.0}})
    assert code == 0
    head, data = read_csv(out / "u.csv")
    assert head == ["x", "value"]
    centre = data[np.argmin(np.abs(data[:, 0])), 1]
    assert abs(centre - 1.0) <= 0.01
    diag = json.loads((out / "diagnostics.json").read_text())
    assert abs(diag["decay_exponent"] - 0.5) <= 0.1


def test_csv_uses_seventeen_significant_digits(tmp_path):
    _, out = run(tmp_path, "solve-state", {"n": 8})
    for line in (out / "u.csv").read_text().splitlines()[1:]:
        for field in line.split(","):
            assert field == format(float(field), ".17g")


def test_datum_from_file(tmp_path):
    _, out = run(tmp_path, "solve-state", {"n": 32})
    code, out2 = run(tmp_path, "solve-measure", {"n": 32, "measure": {"atoms": "",
                                                                      "density": str(out / "u.csv")}})
    assert code == 0
    rep = json.loads((out2 / "duality_report.json").read_text())
    assert rep["duality_residual"] <= 1e-10


def test_solve_measure_with_atoms_flag(tmp_path):
    code, out = run(tmp_path, "solve-measure", {"n": 32}, "--atoms", "0.1:1.0,-0.5:2.0")
    assert code == 0
    rep = json.loads((out / "duality_report.json").read_text())
    assert rep["total_variation"] == pytest.approx(3.0)
    assert rep["duality_residual"] <= 1e-10


def test_bounds(tmp_path):
    code, out = run(tmp_path, "bounds", {"n": 32})
    assert code == 0
    head, prof = read_csv(out / "level_profile.csv")
    assert head == ["k", "phi", "measure"] and np.all(np.diff(prof[:, 1]) <= 0)
    rep = json.loads((out / "bound_report.json").read_text())
    assert rep["degiorgi_threshold"] == pytest.approx(4.0, rel=1e-12)
    assert rep["degiorgi_bound_at_threshold"] <= 1e-12


def test_solve_control(tmp_path):
    cfg = {"n": 32, "control": {"alpha": 1e-2, "u_d": 5.0, "u_b": 0.1, "gammas": [1e2, 1e3, 1e4]}}
    code, out = run(tmp_path, "solve-control", cfg)
    assert code == 0
    for name in ("z", "u", "xi", "mu_density", "trajectory"):
        assert (out / f"{name}.csv").is_file()
    head, traj = read_csv(out / "trajectory.csv")
    assert head == ["iteration", "gamma", "J", "violation"]
    rep = json.loads((out / "kkt_report.json").read_text())
    for key in ("primal_feasibility", "multiplier_nonnegativity", "complementarity", "vi_residual",
                "adjoint_residual", "cost"):
        assert key in rep
    assert rep["multiplier_nonnegativity"] >= 0 and rep["slater_feasible"]


@pytest.mark.parametrize("cfg,field", [
    ({"n": 1}, "'n'"),
    ({"s": 1.5}, "'s'"),
    ({"domain": {"a": 1.0, "b": 0.0}}, "domain.b"),
    ({"control": {"gammas": [1e3, 1e2]}}, "control.gammas"),
    ({"control": {"u_b": "missing.csv"}}, "control.u_b"),
    ({"measure": {"atoms": "0.1-1"}}, "measure.atoms"),
    ({"nn": 3}, "'nn'"),
    ({"state": {"colour": 1}}, "'colour'"),
])
def test_bad_config_exits_two_naming_field(tmp_path, capsys, cfg, field):
    code, _ = run(tmp_path, "solve-state", cfg)
    assert code == 2
    assert field in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["assemble", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_out_of_domain_atom_is_config_error(tmp_path):
    code, _ = run(tmp_path, "solve-measure", {"n": 8}, "--atoms", "3.0:1.0")
    assert code == 2


def test_numerical_failure_exits_one(tmp_path):
    code, _ = run(tmp_path, "solve-state", {"n": 8, "state": {"tol": 0.0}})
    assert code == 1


def test_determinism_and_round_trip(tmp_path):
    cfg = {"n": 32, "seed": 7, "state": {"samples": 5},
           "control": {"gammas": [1e2, 1e3], "u_d": 2.0, "u_b": 0.5}}
    for sub in ("solve-state", "solve-control"):
        path = write_cfg(tmp_path / "c.yaml", cfg)
        a, b, c = tmp_path / f"{sub}-a", tmp_path / f"{sub}-b", tmp_path / f"{sub}-c"
        assert main([sub, "--config", path, "--out", str(a)]) == 0
        assert main([sub, "--config", path, "--out", str(b)]) == 0
        assert main([sub, "--config", str(a / "resolved_config.json"), "--out", str(c)]) == 0
        for f in a.iterdir():
            if f.name == "resolved_config.json":
                continue
            assert f.read_bytes() == (b / f.name).read_bytes() == (c / f.name).read_bytes()


def test_verify_default_config(tmp_path, capsys):
    code, out = run(tmp_path, "verify")
    assert code == 0
    rep = json.loads((out / "verify_report.json").read_text())
    assert rep["passed"] and len(rep["checks"]) >= 10
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == len(rep["checks"]) and all(l.startswith("PASS") for l in lines)
