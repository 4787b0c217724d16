"""CLI contracts: output schema, exit codes, config merge, determinism."""

import json

import pytest

from qetsim import cli
from qetsim.field import Profile


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def profile_files(tmp_path):
    lam = tmp_path / "lam.csv"
    p_b = tmp_path / "pb.csv"
    Profile.sin_squared(0.1, 0.0, 1.0).to_csv(lam)
    Profile.sin_squared(0.1, 3.0, 1.0).to_csv(p_b)
    return str(lam), str(p_b)


@pytest.fixture()
def chain_file(tmp_path):
    path = tmp_path / "model.chain"
    path.write_text(
        "n_sites = 8\nboundary = periodic\nx = -1*z\nbond = x ; -1.0\n")
    return str(path)


def test_minimal_json_schema(capsys):
    code, out, _ = run_cli(capsys, "minimal", "--h", "1", "--k", "1")
    assert code == 0
    payload = json.loads(out)
    assert payload["E_A"] == pytest.approx(0.7071067811865475, abs=1e-12)
    assert payload["E_B_max"] == pytest.approx(0.114748, abs=1e-6)
    assert payload["theta_opt"] == pytest.approx(0.1608752771983211, abs=1e-12)
    assert payload["bound"]["holds"] is True
    assert payload["version"]
    assert payload["seed"] == 0
    assert payload["probabilities"]["1"] == pytest.approx(0.5, abs=1e-12)


def test_minimal_zero_theta(capsys):
    code, out, _ = run_cli(capsys, "minimal", "--h", "1", "--k", "1",
                           "--theta", "0")
    assert code == 0
    assert json.loads(out)["E_B"] == pytest.approx(0.0, abs=1e-13)


def test_minimal_invalid_params_exit_one(capsys):
    code, _, err = run_cli(capsys, "minimal", "--h", "-1", "--k", "1")
    assert code == 1
    assert "positive" in err


def test_usage_error_exit_one(capsys):
    code, _, _ = run_cli(capsys, "minimal", "--h", "1")  # missing --k
    assert code == 1


def test_ising_single_row(capsys):
    code, out, _ = run_cli(capsys, "ising", "--J", "1", "--n", "1")
    assert code == 0
    rows = [l for l in out.splitlines() if l and not l.startswith("#")]
    assert rows[0].startswith("n,sign,ln_abs_delta")
    fields = rows[1].split(",")
    assert int(fields[0]) == 1
    assert int(fields[1]) == -1
    assert float(fields[3]) == pytest.approx(0.0344364, abs=1e-6)


def test_ising_fit_footer(capsys):
    code, out, _ = run_cli(capsys, "ising", "--J", "1", "--n", "30:100",
                           "--fit")
    assert code == 0
    fit_lines = [l for l in out.splitlines() if l.startswith("# fit_")]
    exponent = float(fit_lines[0].split("=")[1])
    c_implied = float(fit_lines[2].split("=")[1])
    assert exponent == pytest.approx(-4.5, abs=0.05)
    assert c_implied == pytest.approx(1.28, rel=0.05)


def test_ising_linear_in_coupling(capsys):
    _, out1, _ = run_cli(capsys, "ising", "--J", "1", "--n", "2:6")
    _, out2, _ = run_cli(capsys, "ising", "--J", "2", "--n", "2:6")
    rows1 = [l for l in out1.splitlines() if l and not l.startswith(("#", "n,"))]
    rows2 = [l for l in out2.splitlines() if l and not l.startswith(("#", "n,"))]
    for r1, r2 in zip(rows1, rows2):
        e1 = float(r1.split(",")[3])
        e2 = float(r2.split(",")[3])
        assert e2 == pytest.approx(2 * e1, rel=1e-12)


def test_ising_numeric_mode(capsys):
    code, out, _ = run_cli(capsys, "ising", "--mode", "numeric", "--N", "8")
    assert code == 0
    assert "E_A_numeric" in out
    assert "# note =" in out


def test_chain_report(capsys, chain_file):
    code, out, _ = run_cli(capsys, "chain", "--model", chain_file,
                           "--site-a", "1", "--site-b", "5",
                           "--direction", "x")
    assert code == 0
    payload = json.loads(out)
    assert payload["E_B"] == pytest.approx(payload["E_B_max"], abs=1e-10)
    assert payload["local_energy_B"] == pytest.approx(-payload["E_B"], abs=1e-10)


def test_chain_parse_error_exit_one(capsys, tmp_path):
    bad = tmp_path / "bad.chain"
    bad.write_text("n_sites = 8\nbond = nope\n")
    code, _, err = run_cli(capsys, "chain", "--model", str(bad),
                           "--site-a", "0", "--site-b", "4")
    assert code == 1
    assert "line 2" in err


def test_field_report(capsys, profile_files):
    lam, p_b = profile_files
    code, out, _ = run_cli(capsys, "field", "--lambda-file", lam,
                           "--p-file", p_b, "--T", "3")
    assert code == 0
    payload = json.loads(out)
    assert payload["theta_opt"] == pytest.approx(
        payload["eta"] / (2 * payload["xi"]), rel=1e-12)
    assert payload["E_B_max"] >= 0


def test_field_oracle_flag(capsys, profile_files):
    lam, p_b = profile_files
    code, out, _ = run_cli(capsys, "field", "--lambda-file", lam,
                           "--p-file", p_b, "--T", "3", "--oracle")
    assert code == 0
    payload = json.loads(out)
    assert payload["oracle"]["relative_gap"] < 1e-6


def test_sweep_minimal(capsys):
    code, out, _ = run_cli(capsys, "sweep", "minimal", "--param", "k",
                           "--range", "0.1:10:50", "--log", "--h", "1")
    assert code == 0
    rows = [l for l in out.splitlines() if l and not l.startswith(("#", "index"))]
    assert len(rows) == 50
    for row in rows:
        e_b_max = float(row.split(",")[6])
        assert e_b_max > 0


def test_sweep_rejects_bad_param(capsys):
    code, _, err = run_cli(capsys, "sweep", "minimal", "--param", "zeta",
                           "--range", "0:1:5")
    assert code == 1
    assert "param" in err


def test_config_file_supplies_defaults(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("h = 1.0\nk = 1.0\ntheta = 0\n")
    code, out, _ = run_cli(capsys, "minimal", "--config", str(cfg))
    assert code == 0
    assert json.loads(out)["E_B"] == pytest.approx(0.0, abs=1e-13)


def test_config_file_cli_overrides(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("h = 1.0\nk = 1.0\ntheta = 0\n")
    code, out, _ = run_cli(capsys, "minimal", "--config", str(cfg),
                           "--theta", "auto")
    assert code == 0
    assert json.loads(out)["E_B"] > 0.1


def test_config_file_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("hh = 1.0\n")
    code, _, err = run_cli(capsys, "minimal", "--config", str(cfg))
    assert code == 1
    assert "hh" in err


def test_out_flag_writes_identical_bytes(capsys, tmp_path):
    out_path = tmp_path / "run.json"
    code, stdout, _ = run_cli(capsys, "minimal", "--h", "2", "--k", "0.5")
    code2, _, _ = run_cli(capsys, "minimal", "--h", "2", "--k", "0.5",
                          "--out", str(out_path))
    assert code == code2 == 0
    assert out_path.read_text() == stdout


def test_determinism_repeated_runs(capsys):
    outputs = set()
    for _ in range(3):
        _, out, _ = run_cli(capsys, "sweep", "minimal", "--param", "h",
                            "--range", "0.5:5:7", "--seed", "3")
        outputs.add(out)
    assert len(outputs) == 1


def test_verify_core_deterministic_and_green(capsys):
    _, out1, _ = run_cli(capsys, "verify", "--suite", "core")
    code, out2, _ = run_cli(capsys, "verify", "--suite", "core")
    assert code == 0
    assert out1 == out2
    assert "FAIL" not in out1
