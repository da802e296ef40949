import subprocess
import sys

from virtiso.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main


def test_simulate_and_outputs(tmp_path, capsys):
    assert main(["simulate", "--seed", "2", "--nmax", "32", "--L", "2", "--out", str(tmp_path)]) == EXIT_OK
    assert "reached n = 32" in capsys.readouterr().out
    assert (tmp_path / "trajectory-2.jsonl").exists() and (tmp_path / "trajectory-2.json").exists()


def test_configuration_errors_exit_2(tmp_path):
    out = str(tmp_path)
    assert main(["simulate", "--mode", "MATRIX", "--nmax", "600", "--out", out]) == EXIT_CONFIG
    assert main(["simulate", "--L", "70", "--out", out]) == EXIT_CONFIG
    assert main(["simulate", "--window", "0,1", "--out", out]) == EXIT_CONFIG
    assert main(["simulate", "--window", "a,b", "--out", out]) == EXIT_CONFIG
    assert main(["simulate", "--nmax", "0", "--out", out]) == EXIT_CONFIG
    assert main(["simulate", "--oracle", "--out", out]) == EXIT_CONFIG
    assert main(["flow", "--nmax", "100", "--out", out]) == EXIT_CONFIG


def test_stats_flow_and_ensemble_commands(tmp_path):
    out = str(tmp_path)
    assert main(["stats", "--nmax", "16", "--samples", "1000", "--out", out]) == EXIT_OK
    text = (tmp_path / "trace_moments.csv").read_text()
    assert text.startswith("# seed: 0") and "j,mean,stderr,target" in text
    assert (tmp_path / "pair_correlation.csv").exists()
    assert main(["flow", "--nmax", "128", "--seed", "1", "--out", out]) == EXIT_OK
    assert (tmp_path / "flow-1.csv").exists()
    assert main(["ensemble", "--size", "3", "--nmax", "16", "--out", out]) == EXIT_OK
    assert (tmp_path / "ensemble.json").exists()


def test_verify_exit_codes(tmp_path):
    assert main(["verify", "--only", "1,11", "--json", str(tmp_path / "r.json")]) == EXIT_OK
    # the negative control: a tampered secular tolerance must fail the oracle criterion
    assert main(["verify", "--only", "2", "--tol", "1e-2"]) == EXIT_FAIL


def test_console_entry_points():
    r = subprocess.run([sys.executable, "-m", "virtiso", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "simulate" in r.stdout
    r = subprocess.run([sys.executable, "-m", "virtiso", "bogus"], capture_output=True, text=True)
    assert r.returncode == 2
