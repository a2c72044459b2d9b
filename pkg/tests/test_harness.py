import csv
import io
import json

import numpy as np
import pytest

from vpdgauge import __version__
from vpdgauge.cli import main
from vpdgauge.harness import (
    CSV_COLUMNS,
    CSV_SCHEMA,
    KEYS,
    RunReport,
    build_system,
    csv_text,
    json_text,
    load_config,
    load_config_text,
    run_evolution,
    run_observables,
    write_outputs,
)
from vpdgauge.hamiltonian_dynamics import zero_state
from vpdgauge.inner_space import ConfigurationError

SMALL = ["grid.n=8", "grid.steps=10", "lattice.radius=2"]


def rows_of(text):
    lines = text.splitlines()
    assert lines[0] == f"# schema={CSV_SCHEMA}"
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_defaults():
    cfg = load_config_text("")
    assert cfg.get("grid.d") == 1
    assert cfg.get("grid.n") == (16,)
    assert cfg.get("grid.dt") == 0.01
    assert cfg.get("run.band") == 0.5
    assert cfg.get("init.kind") == "zero"
    assert set(cfg.values) == set(KEYS)


def test_invalid_dt_names_the_key():
    with pytest.raises(ConfigurationError, match=r"^grid\.dt: must be > 0"):
        load_config_text("grid.dt = -1")


@pytest.mark.parametrize("text, pattern", [
    ("bogus.key = 1", r"bogus\.key: unknown key"),
    ("tolerance.nope = 1", r"tolerance\.nope: unknown check name"),
    ("tolerance.bianchi = -1", r"tolerance\.bianchi: must be >= 0"),
    ("grid.n = 7", r"grid\.n"),
    ("run.integrator = euler", r"run\.integrator"),
    ("grid.d = 1\ngrid.d = 2", r"duplicate key"),
    ("no equals sign", r"expected 'key = value'"),
    ("init.kind = file", r"init\.file: required"),
])
def test_config_errors(text, pattern):
    with pytest.raises(ConfigurationError, match=pattern):
        load_config_text(text)


def test_normalized_round_trip():
    cfg = load_config_text("grid.n = 8  # comment\nlattice.radius = 1\ntolerance.bianchi = 1e-9",
                           overrides=["run.seed=4"])
    again = load_config_text(cfg.normalized())
    assert again.values == cfg.values
    assert again.tolerances == cfg.tolerances == {"bianchi": 1e-9}
    assert again.digest() == cfg.digest()


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError, match="cannot read config"):
        load_config(tmp_path / "missing.cfg")


def test_zero_run_rows_are_zero():
    report = run_evolution(load_config_text("", SMALL))
    assert len(report.rows) == 11
    for row in report.rows:
        for c in CSV_COLUMNS[2:]:
            assert row[c] == 0.0
    assert report.rows[-1]["t"] == pytest.approx(0.1)


def test_empty_report_csv_has_header_only():
    text = csv_text(RunReport())
    assert text.splitlines() == [f"# schema={CSV_SCHEMA}", ",".join(CSV_COLUMNS)]


def test_json_is_deterministic_and_finite():
    cfg = load_config_text("", SMALL)
    report = run_evolution(cfg)
    doc = json.loads(json_text(report, cfg))
    assert doc["status"] == "ok"
    assert doc["provenance"]["config_sha256"] == cfg.digest()
    assert doc["provenance"]["version"] == __version__
    assert json_text(report, cfg) == json_text(run_evolution(cfg), cfg)


def test_maxwell_run_conserves_energy():
    report = run_evolution(load_config_text(
        "init.kind = maxwell-plane-wave", ["grid.steps=200", "grid.every=50"]))
    assert report.summary["drift"]["H"] < 1e-8
    assert report.rows[0]["H"] > 0


def test_random_cone_run():
    report = run_evolution(load_config_text(
        "init.kind = random-cone\ninit.amplitude = 0.2", SMALL))
    assert report.status == "ok"
    assert report.summary["H_min"] >= 0
    assert report.summary["drift"]["H"] < 1e-6
    assert report.summary["max_residual"]["divfree_residual"] < 1e-12


def test_file_initial_state(tmp_path):
    cfg = load_config_text("", SMALL)
    sys = build_system(cfg)
    state = zero_state(sys)
    state.A[0, 0, :, sys.lattice.origin] = np.cos(sys.grid.coordinates(3))
    path = tmp_path / "state.npz"
    np.savez(path, A=state.A, Pi=state.Pi)
    report = run_observables(load_config_text("", SMALL + ["init.kind=file", f"init.file={path}"]))
    assert report.rows[0]["H"] > 0
    np.savez(path, A=state.A[:, :, :4], Pi=state.Pi)
    with pytest.raises(ConfigurationError, match="shape"):
        run_observables(load_config_text("", SMALL + ["init.kind=file", f"init.file={path}"]))


def test_cli_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__


def test_cli_evolve_stdout(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("grid.n = 8\ngrid.steps = 3\n")
    assert main(["evolve", "--config", str(cfg), "--stdout"]) == 0
    rows = rows_of(capsys.readouterr().out)
    assert [int(r["step"]) for r in rows] == [0, 1, 2, 3]


def test_cli_writes_outputs(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"grid.n = 8\ngrid.steps = 2\noutput.csv = {tmp_path / 'o.csv'}\n"
                   f"output.json = {tmp_path / 'r.json'}\n")
    assert main(["evolve", "--config", str(cfg)]) == 0
    assert len(rows_of((tmp_path / "o.csv").read_text())) == 3
    assert json.loads((tmp_path / "r.json").read_text())["status"] == "ok"
    assert main(["observables", "--config", str(cfg), "--stdout"]) == 0


def test_cli_configuration_errors_exit_2(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("grid.dt = -1\n")
    assert main(["evolve", "--config", str(cfg)]) == 2
    assert "grid.dt: must be > 0" in capsys.readouterr().err
    assert main(["evolve", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["check", "--suite", "zero-field", "--set", "nope=1"]) == 2


def test_cli_check_passes_and_fails(capsys):
    assert main(["check", "--suite", "zero-field"]) == 0
    assert "suite zero-field: PASS" in capsys.readouterr().out
    # a zero tolerance on a check with roundoff-level value must fail
    assert main(["check", "--suite", "algebra", "--set", "tolerance.bracket_antisymmetry=0",
                 "--set", "tolerance.jacobi_retained_triples=0"]) == 1
    assert "suite algebra: FAIL" in capsys.readouterr().out


def test_cli_nan_run_exits_1(tmp_path, capsys):
    sys = build_system(load_config_text("", SMALL))
    state = zero_state(sys)
    state.Pi[0, 0, 0, sys.lattice.origin] = np.nan
    path = tmp_path / "bad.npz"
    np.savez(path, A=state.A, Pi=state.Pi)
    cfg = tmp_path / "run.cfg"
    cfg.write_text("grid.n = 8\ngrid.steps = 3\ninit.kind = file\n")
    assert main(["evolve", "--config", str(cfg), "--set", f"init.file={path}", "--stdout"]) == 1
    assert "non-finite" in capsys.readouterr().err


def test_cli_omega_json(capsys):
    assert main(["omega", "--n", "1", "--samples", "0"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["omega"] == pytest.approx(1 / (720 * (2 * np.pi) ** 3), rel=1e-12)
    assert "mc_estimate" not in doc


def test_repeat_runs_are_byte_identical(tmp_path):
    outs = []
    for run in range(2):
        cfg = load_config_text("init.kind = random-cone\ninit.amplitude = 0.2", SMALL + [
            f"output.csv={tmp_path / f'{run}.csv'}", f"output.json={tmp_path / f'{run}.json'}"])
        write_outputs(run_evolution(cfg), cfg)
        outs.append(((tmp_path / f"{run}.csv").read_bytes(), (tmp_path / f"{run}.json").read_bytes()))
    assert outs[0] == outs[1]


def test_unprojected_random_state_warns():
    cfg = load_config_text("init.kind = random-cone\ninit.gauss_projection = false", SMALL)
    with pytest.warns(RuntimeWarning, match="x\\^3-constant"):
        run_observables(cfg)


def test_maxwell_rows_report_small_stress_divergence():
    report = run_evolution(load_config_text("init.kind = maxwell-plane-wave", SMALL))
    assert report.summary["max_residual"]["stress_divergence"] < 1e-9
