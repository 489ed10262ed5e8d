import csv
import json
import math
import os

import pytest

from biharm.cli import CONFIG_MARKER, main

QUARTER = 0.7853981633974483


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(v) for v in r] for r in rows[1:]]


def torus_cfg(initial, **extra):
    return {"geometry": {"kind": "torus", "k": 1}, "grid": {"n": 64}, "initial": initial, **extra}


CYL = {
    "geometry": {"kind": "cylinder", "lambda": 4.0, "domain": [0.0, 1.0]},
    "grid": {"n": 200, "bc": {"kind": "clamped", "from_exact": True}},
    "solver": {"grad_tol": 1e-5},
    "initial": {"kind": "linear"},
    "exact": {"kind": "exp_poly", "terms": [[1.0, 0, 2.0]]},
}


@pytest.mark.parametrize("value,tol", [(QUARTER, 1e-9), (0.0, 0.0)])
def test_residual_of_constants(tmp_path, value, tol):
    cfg = write(tmp_path / "c.json", torus_cfg({"kind": "constant", "value": value},
                                               curve={"kind": "constant", "value": value}))
    assert main(["residual", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    header, rows = read_rows(tmp_path / "o" / "residual.csv")
    assert header == ["t", "residual"]
    assert len(rows) == 64
    assert max(abs(r[1]) for r in rows) <= tol
    assert [r[0] for r in rows] == sorted(r[0] for r in rows)


def test_residual_of_sampson_profile(tmp_path):
    cfg = write(tmp_path / "c.json", {
        "geometry": {"kind": "cylinder", "lambda": 1.0, "domain": [-2.0, 2.0]},
        "grid": {"n": 81, "bc": {"kind": "clamped", "value_a": 0, "slope_a": 0, "value_b": 0, "slope_b": 0}},
        "curve": {"kind": "sampson"},
    })
    assert main(["residual", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    _, rows = read_rows(tmp_path / "o" / "residual.csv")
    assert rows and max(abs(r[1]) for r in rows) <= 1e-10


def test_solve_manufactured_bvp_and_round_trip(tmp_path):
    cfg = write(tmp_path / "c.json", CYL)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--config", cfg, "--out", str(out1)]) == 0
    report = (out1 / "solve_report.txt").read_text()
    sup = float(report.split("sup_error = ")[1].split("\n")[0])
    assert sup <= 1e-3
    assert CONFIG_MARKER in report
    header, rows = read_rows(out1 / "solution.csv")
    assert header == ["t", "alpha", "alpha_dot", "alpha_ddot", "tension"]
    assert len(rows) == 200
    assert main(["solve", "--config", str(out1 / "solve_report.txt"), "--out", str(out2)]) == 0
    assert (out1 / "solution.csv").read_bytes() == (out2 / "solution.csv").read_bytes()
    assert not [p for p in os.listdir(out1) if p.startswith(".")]


def test_values_have_seventeen_digits(tmp_path):
    cfg = write(tmp_path / "c.json", torus_cfg({"kind": "constant", "value": QUARTER}))
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 0
    line = (tmp_path / "solution.csv").read_text().splitlines()[1]
    assert line.split(",")[1] == "%.17g" % QUARTER


def test_solve_constant_zero(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", torus_cfg({"kind": "constant", "value": 0.0}))
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert "energy = 0.0" in capsys.readouterr().out


def test_solve_fourier_start_energy(tmp_path):
    cfg = write(tmp_path / "c.json", torus_cfg({"kind": "fourier", "base": QUARTER, "amplitude": 0.05, "mode": 1},
                                               grid={"n": 256}))
    code = main(["solve", "--config", cfg, "--out", str(tmp_path)])
    assert code in (0, 4)
    report = (tmp_path / "solve_report.txt").read_text()
    energy = float(report.split("energy = ")[1].split("\n")[0])
    assert energy == pytest.approx(math.pi / 2, abs=1e-8)


def test_nonconvergence_writes_best_iterate(tmp_path):
    cfg = write(tmp_path / "c.json", torus_cfg({"kind": "fourier", "base": 1.0, "amplitude": 0.3, "mode": 2},
                                               solver={"max_iter": 1, "grad_tol": 1e-14}))
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 4
    assert (tmp_path / "solution.csv").exists()
    assert "converged = false" in (tmp_path / "solve_report.txt").read_text()


def test_stability_report(tmp_path):
    cfg = write(tmp_path / "c.json", torus_cfg({"kind": "constant", "value": QUARTER}))
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    assert main(["stability", "--config", cfg, "--solution", str(tmp_path / "s" / "solution.csv"),
                 "--out", str(tmp_path / "t")]) == 0
    text = (tmp_path / "t" / "stability_report.txt").read_text()
    assert "classification = unstable" in text
    assert "mode 1: discrete = " in text and "printed_formula = " in text
    header, rows = read_rows(tmp_path / "t" / "eigenvalues.csv")
    assert header == ["index", "eigenvalue"]
    assert rows[0][1] < 0


def test_stability_of_noncritical_file(tmp_path):
    cfg = write(tmp_path / "c.json", torus_cfg({"kind": "fourier", "base": 1.0, "amplitude": 0.3, "mode": 2},
                                               solver={"max_iter": 1, "grad_tol": 1e-14}))
    main(["solve", "--config", cfg, "--out", str(tmp_path)])
    assert main(["stability", "--config", cfg, "--solution", str(tmp_path / "solution.csv"),
                 "--out", str(tmp_path)]) == 3


def test_sampson_command(tmp_path, capsys):
    assert main(["sampson", "--lambda", "1", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "sampson_report.txt").read_text()
    r0 = float(text.split("r0 = ")[1].split("\n")[0])
    assert -0.35 <= r0 <= -0.33
    assert main(["sampson", "--lambda", "-2", "--out", str(tmp_path)]) == 3


def test_verify_exit_codes(capsys):
    assert main(["verify", "--families", "energy,system_form", "--seed", "3"]) == 0
    assert main(["verify", "--families", "partials_fd", "--mutate"]) == 1
    assert main(["verify", "--families", ","]) == 2
    assert main(["verify", "--families", "bogus"]) == 2


def test_env_overrides_out(tmp_path, monkeypatch):
    cfg = write(tmp_path / "c.json", torus_cfg({"kind": "constant", "value": 0.0}))
    monkeypatch.setenv("BIHARM_OUT", str(tmp_path / "env"))
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "env" / "solution.csv").exists()
    assert not (tmp_path / "flag").exists()


@pytest.mark.parametrize("cfg,code", [
    ({"geometry": {"kind": "torus", "k": 1}, "extra": 1}, 2),
    ({"geometry": {"kind": "torus", "k": 1}, "solver": {"tolerance": 1}}, 2),
    ({"geometry": {"kind": "torus", "k": 1}, "grid": {"bc": {"kind": "clamped"}}}, 2),
    ({"geometry": {"kind": "torus", "k": 0}}, 2),
    ({"geometry": {"kind": "cylinder", "lambda": 1.0}}, 2),
    ({"geometry": {"kind": "warped", "m": 2, "lambda": 1.0, "f": {"kind": "sine"}, "h": {"kind": "sine"},
                   "domain": [0.5, 4.0]},
      "grid": {"bc": {"kind": "clamped", "value_a": 0, "slope_a": 0, "value_b": 0, "slope_b": 0}}}, 3),
])
def test_config_errors(tmp_path, cfg, code):
    path = write(tmp_path / "c.json", cfg)
    assert main(["solve", "--config", path, "--out", str(tmp_path)]) == code


def test_usage_errors(tmp_path):
    assert main([]) == 2
    assert main(["solve"]) == 2
    assert main(["solve", "--config", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["solve", "--config", str(tmp_path / "bad.json")]) == 2
