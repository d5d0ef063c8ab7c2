import csv
import json

import numpy as np
import pytest

from agepde.cli import main
from agepde.config import ConfigError, load_config, parse_grid
from agepde.emit import SCHEMA_VERSION, Table, emit, field_table, jsonable


def test_csv_round_trips_17_digits(tmp_path):
    vals = [np.pi, 1 / 3, 1e-300, -2.5e17]
    emit(Table(["v"], [[v] for v in vals]), "csv", tmp_path / "a.csv")
    rows = list(csv.reader((tmp_path / "a.csv").open()))
    assert rows[0] == ["v"]
    assert [float(r[0]) for r in rows[1:]] == vals


def test_json_has_schema_version_and_rejects_nan(tmp_path):
    emit({"x": np.float64(1.5), "arr": np.arange(3)}, "json", tmp_path / "a.json")
    body = json.loads((tmp_path / "a.json").read_text())
    assert body == {"schema_version": SCHEMA_VERSION, "x": 1.5, "arr": [0, 1, 2]}
    with pytest.raises(ValueError, match="non-finite"):
        emit({"x": float("nan")}, "json", tmp_path / "b.json")
    with pytest.raises(ValueError):
        emit({}, "yaml", tmp_path / "c")
    with pytest.raises(TypeError):
        jsonable(object())


def test_field_table_is_age_row_major():
    tab = field_table(np.array([[1.0, 2.0], [3.0, 4.0]]), [0.0, 0.5], [0.0, 1.0])
    assert tab.header == ["a", "x", "value"]
    assert tab.rows == [[0.0, 0.0, 1.0], [0.0, 1.0, 2.0], [0.5, 0.0, 3.0], [0.5, 1.0, 4.0]]


def test_parse_grid():
    assert parse_grid("200x100") == (200, 100)
    assert parse_grid(" 50X20 ") == (50, 20)
    with pytest.raises(ConfigError):
        parse_grid("200by100")


def test_config_layers(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('preset = "P1"\ngrid = "40x20"\njobs = 3\n[problem]\nd = 0.5\n'
                 '[sweep]\nparameter = "d"\nvalues = [1, 2]\n')
    cfg = load_config(p, env={})
    assert (cfg.preset, cfg.grid, cfg.jobs, cfg.problem["d"]) == ("P1", (40, 20), 3, 0.5)
    assert cfg.sweep_values == (1.0, 2.0) and cfg.spec().d == 0.5
    cfg = load_config(p, env={"AGEPDE_GRID": "60x30", "AGEPDE_D": "2.0", "AGEPDE_JOBS": "5"})
    assert cfg.grid == (60, 30) and cfg.spec().d == 2.0 and cfg.jobs == 5
    cfg = load_config(p, env={"AGEPDE_JOBS": "5"}, jobs=1)
    assert cfg.jobs == 1


def test_config_inline_coefficients(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('preset = "P0"\n[problem]\nmu = { ages = [0.0, 1.0], xs = [0.0, 1.0], '
                 'values = [[2.0, 1.0], [2.0, 1.0]] }\nbeta = 3.0\nbirth_law = { kind = "holling_ii", tau = 2.0 }\n')
    spec = load_config(p, env={}).spec()
    assert np.allclose(spec.mu(0.3, np.array([0.0, 0.5, 1.0])), [2.0, 1.5, 1.0])
    assert spec.f.L == 0.5
    assert spec.beta(1.2, 0.3) == 0.0


def test_config_errors_name_the_line(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text('preset = "P1"\n\n[tolerances]\ntol_lambda = -1.0\n')
    with pytest.raises(ConfigError, match="line 4: tol_lambda must be positive"):
        load_config(p, env={})
    p.write_text('preset = "P1"\ngrid = [\n')
    with pytest.raises(ConfigError, match="line"):
        load_config(p, env={})
    p.write_text('preset = "nope"\n')
    with pytest.raises(ConfigError, match="line 1: unknown preset"):
        load_config(p, env={})
    with pytest.raises(ConfigError, match="environment"):
        load_config(env={"AGEPDE_JOBS": "many"})


def test_cli_eigen_is_deterministic(tmp_path, alpha_star):
    args = ["eigen", "--preset", "P0", "--grid", "100x40"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "eigen.json").read_bytes()
    assert a == (tmp_path / "b" / "eigen.json").read_bytes()
    assert (tmp_path / "a" / "eigenfunction.csv").read_bytes() == (tmp_path / "b" / "eigenfunction.csv").read_bytes()
    body = json.loads(a)
    assert set(body) == {"schema_version", "lambda0", "r_residual", "pde_residual", "bracket", "iterations"}
    assert abs(body["lambda0"] - alpha_star) < 5e-3 and body["r_residual"] <= 1e-8


def test_cli_limits(tmp_path, s_star):
    assert main(["limits", "--preset", "P1", "--out", str(tmp_path)]) == 0
    body = json.loads((tmp_path / "limits.json").read_text())
    for key, shift in (("alpha1", 1.0), ("alpha0", 2.0), ("alpha_max", 1.0), ("alpha_bar", 1.5)):
        assert body[key] == pytest.approx(s_star - shift, abs=1e-4)
    assert set(body["hypotheses"]) >= {"downstream", "max", "average"}


def test_cli_sweep_gap_decreases(tmp_path):
    assert main(["sweep", "--preset", "P1", "--grid", "100x50", "--jobs", "2", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "sweep.csv").open()))
    assert [float(r["lambda_adv"]) for r in rows] == [10.0, 30.0, 100.0]
    gaps = [float(r["gap"]) for r in rows]
    assert gaps[0] > gaps[1] > gaps[2]
    assert {r["limit"] for r in rows} == {"alpha1"}


def test_cli_equilibrium_and_simulate(tmp_path, monkeypatch):
    monkeypatch.setenv("AGEPDE_GRID", "40x10")
    assert main(["equilibrium", "--preset", "P1", "--d", "1", "--lambda-adv", "1", "--out", str(tmp_path)]) == 0
    body = json.loads((tmp_path / "equilibrium.json").read_text())
    assert body["classification"] == "positive" and body["converged"]
    assert body["integral_bounds"]["uniform_bound"]
    rows = list(csv.DictReader((tmp_path / "equilibrium.csv").open()))
    assert len(rows) == 41 * 11
    assert main(["simulate", "--preset", "P0", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "simulate.csv").open()))
    assert sorted({float(r["t"]) for r in rows}) == [0.0, 1.0, 5.0, 10.0]


def test_cli_verify_exit_status(tmp_path):
    assert main(["verify", "--preset", "P0", "--out", str(tmp_path)]) == 0
    body = json.loads((tmp_path / "verify.json").read_text())
    assert body["passed"] and [c["number"] for c in body["criteria"]] == [1, 2, 12]


def test_cli_config_error_status(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text('jobs = 0\n')
    assert main(["eigen", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert "line 1" in capsys.readouterr().err


def test_cli_solver_failure_status(tmp_path, capsys):
    # fertility only where x > 0.5 leaves the lower eigenvalue bound undefined
    p = tmp_path / "run.toml"
    p.write_text('preset = "P0"\n[problem]\nbeta = { ages = [0.0, 1.0], xs = [0.0, 0.5, 0.50001, 1.0], '
                 'values = [[0.0, 0.0, 3.0, 3.0], [0.0, 0.0, 3.0, 3.0]] }\n')
    assert main(["eigen", "--config", str(p), "--grid", "20x10", "--out", str(tmp_path)]) == 1
    assert "bracket undefined" in capsys.readouterr().err
