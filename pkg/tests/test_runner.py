import json
import os

import numpy as np
import pytest

from virtiso import runner
from virtiso.errors import ConfigError
from virtiso.runner import OUT_ENV, RunConfig, run_ensemble, run_trajectory


def rows_of(path):
    lines = path.read_text().splitlines()
    return json.loads(lines[0]), lines[1:]


def test_single_step_run(tmp_path):
    cfg = RunConfig(seed=3, n_max=1, out=str(tmp_path))
    tr = run_trajectory(cfg)
    assert tr.n == 1 and 0 < tr.state.angles[0] < 2 * np.pi
    head, rows = rows_of(tmp_path / "trajectory-3.jsonl")
    assert len(rows) == 1 and json.loads(rows[0])["n"] == 1
    assert head["meta"]["config_hash"] == cfg.digest()


def test_resume_is_bit_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_trajectory(RunConfig(seed=9, n_max=256, L=4, out=str(a)))
    run_trajectory(RunConfig(seed=9, n_max=128, L=4, out=str(b)))
    tr = run_trajectory(RunConfig(seed=9, n_max=256, L=4, out=str(b)))
    assert tr.n == 256
    ha, ra = rows_of(a / "trajectory-9.jsonl")
    hb, rb = rows_of(b / "trajectory-9.jsonl")
    assert ra == rb and len(ra) == 256
    assert ha == hb


def test_rerun_overwrites_identically(tmp_path):
    cfg = RunConfig(seed=4, n_max=40, out=str(tmp_path))
    run_trajectory(cfg, resume=False)
    first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    run_trajectory(RunConfig(seed=4, n_max=40, out=str(tmp_path)), resume=False)
    second = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    assert first == second
    meta = json.loads((tmp_path / "trajectory-4.json").read_text())
    assert meta["config_hash"] == cfg.digest() and meta["build_id"] == runner.build_id()


def test_matrix_oracle_run(tmp_path):
    tr = run_trajectory(RunConfig(seed=2, mode="MATRIX", n_max=48, oracle=True, out=str(tmp_path)))
    assert tr.n == 48
    _, rows = rows_of(tmp_path / "trajectory-2.jsonl")
    for r in rows[1:]:
        d = json.loads(r)["diagnostics"]
        assert d["angle_err"] <= 1e-9 and d["vector_err"] <= 1e-7
        assert d["interlace_violations"] == 0 and d["sigma2"] <= 1e-10


def test_oracle_mismatch_is_raised_with_context(tmp_path):
    with pytest.raises(runner.OracleMismatch, match="seed 2, dimension"):
        run_trajectory(RunConfig(seed=2, mode="MATRIX", n_max=24, oracle=True, secular_tol=1e-2, out=str(tmp_path)))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"mode": "MATRIX", "n_max": 513},
        {"L": 65},
        {"n_max": 0},
        {"mode": "DENSE"},
        {"window": (0, 1)},
        {"oracle": True},
        {"size": 0},
        {"secular_tol": 2.0},
    ],
)
def test_config_guards(kwargs):
    with pytest.raises(ConfigError):
        RunConfig(**kwargs).validate()


def test_output_directory_resolution(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    run_trajectory(RunConfig(seed=1, n_max=8))
    assert (tmp_path / "env" / "trajectory-1.jsonl").exists()
    run_trajectory(RunConfig(seed=1, n_max=8, out=str(tmp_path / "explicit")))
    assert (tmp_path / "explicit" / "trajectory-1.jsonl").exists()
    monkeypatch.delenv(OUT_ENV)
    run_trajectory(RunConfig(seed=1, n_max=8))
    assert (tmp_path / "virtiso-out" / "trajectory-1.jsonl").exists()
    assert sorted(os.listdir(tmp_path)) == ["env", "explicit", "virtiso-out"]


def test_ensemble_size_one_matches_trajectory(tmp_path):
    res = run_ensemble(RunConfig(seed=5, n_max=16, size=1, out=str(tmp_path / "e")))
    tr = run_trajectory(RunConfig(seed=5, n_max=16, out=str(tmp_path / "t")))
    th = tr.state.angles
    ref = [abs(np.exp(1j * j * th).sum()) ** 2 for j in range(1, 9)]
    assert np.allclose(res["traces"].mean, ref, atol=1e-12)
    assert res["failed"] == []
    for name in ("trace_moments.csv", "pair_correlation.csv", "paths.csv", "ensemble.json", "trajectory-5.jsonl"):
        assert (tmp_path / "e" / name).exists()


def test_ensemble_worker_count_does_not_change_results(tmp_path):
    files = {}
    for w in (1, 2):
        out = tmp_path / f"w{w}"
        run_ensemble(RunConfig(seed=100, n_max=32, size=12, workers=w, L=2, out=str(out), trajectories=False))
        files[w] = {p: (out / p).read_text() for p in ("trace_moments.csv", "pair_correlation.csv", "paths.csv")}
        rep = json.loads((out / "ensemble.json").read_text())
        rep.pop("config"), rep.pop("config_hash")
        files[w]["ensemble.json"] = rep
    strip = lambda s: [ln for ln in s.splitlines() if not ln.startswith("# config_hash")] if isinstance(s, str) else s
    assert {k: strip(v) for k, v in files[1].items()} == {k: strip(v) for k, v in files[2].items()}


def test_ensemble_trace_moments(tmp_path):
    res = run_ensemble(RunConfig(seed=0, n_max=16, size=10_000, L=0, window=(1,), out=str(tmp_path), trajectories=False))
    t = res["traces"]
    for j in range(1, 6):
        assert abs(t.mean[j - 1] - j) <= 3 * t.stderr[j - 1]
