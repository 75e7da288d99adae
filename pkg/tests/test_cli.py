import json
import subprocess
import sys

import numpy as np
import pytest

from lpvsdr import cli
from lpvsdr.checks import CheckResult
from lpvsdr.core import TrajectoryDataset


def run(argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def constant_csv(tmp_path):
    path = tmp_path / "const.csv"
    TrajectoryDataset(gamma=np.ones((10, 20)), sample_time=0.01).save(path)
    return path


def test_generate(tmp_path, capsys):
    out = tmp_path / "g.csv"
    assert run(["generate", "--out", out]) == 0
    ds = TrajectoryDataset.load(out)
    assert ds.gamma.shape == (10, 2001)
    assert "N=2001" in capsys.readouterr().out


def test_generate_from_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"reference": {"kind": "square-wave", "duration": 2.0,
                                             "sample_time": 0.1}}))
    assert run(["generate", "--config", cfg, "--out", tmp_path / "g.csv"]) == 0
    assert TrajectoryDataset.load(tmp_path / "g.csv").n_samples == 21


def test_reduce_pca(tmp_path, capsys):
    assert run(["reduce", "--method", "pca", "--nphi", 10, "--out", tmp_path]) == 0
    assert (tmp_path / "reducer.json").exists() and (tmp_path / "reduced_model.json").exists()
    cost = float(capsys.readouterr().out.strip().split("cost=")[1])
    assert cost < 1e-12


def test_reduce_fit_failure_exit_3(tmp_path, constant_csv, capsys):
    code = run(["reduce", "--method", "kpca", "--nphi", 1, "--dataset", constant_csv,
                "--out", tmp_path / "r"])
    assert code == 3
    assert "positive eigenvalues: 0" in capsys.readouterr().err


def test_sweep_writes_report(tmp_path):
    assert run(["sweep", "--methods", "pca", "--nphi-range", "1..3", "--out", tmp_path]) == 0
    lines = (tmp_path / "report.csv").read_text().splitlines()
    assert len(lines) == 4
    costs = [float(l.split(",")[3]) for l in lines[1:]]
    assert costs == sorted(costs, reverse=True)


def test_sweep_all_failed_exit_4(tmp_path, constant_csv):
    code = run(["sweep", "--methods", "kpca", "--nphi-range", "1..2", "--dataset",
                constant_csv, "--out", tmp_path])
    assert code == 4


def test_empty_methods_exit_2(tmp_path):
    assert run(["sweep", "--methods", "", "--nphi-range", "1", "--out", tmp_path]) == 2


@pytest.mark.parametrize("argv", [
    ["sweep", "--methods", "svd", "--nphi-range", "1", "--out", "x"],
    ["sweep", "--methods", "pca", "--nphi-range", "3..1", "--out", "x"],
    ["check", "--suite", "nope"],
    ["reduce", "--method", "pca"],
])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as err:
        run(argv)
    assert err.value.code == 2


def test_bad_config_reports_line(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "reference": "reference-1",\n  oops\n}')
    assert run(["generate", "--config", cfg, "--out", tmp_path / "g.csv"]) == 2
    assert ":3:" in capsys.readouterr().err


def test_bad_config_field(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"reference": {"kind": "sinusoid-sum", "duration": 0}}))
    assert run(["generate", "--config", cfg, "--out", tmp_path / "g.csv"]) == 2
    assert "field 'reference'" in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert run(["generate", "--config", tmp_path / "none.json"]) == 2


def test_config_dir_env(tmp_path, monkeypatch):
    (tmp_path / "c.json").write_text(json.dumps({"reference": "reference-3"}))
    monkeypatch.setenv(cli.CONFIG_DIR_ENV, str(tmp_path))
    monkeypatch.chdir(tmp_path.parent)
    assert run(["generate", "--config", "c.json", "--out", tmp_path / "g.csv"]) == 0


def test_check_passes(capsys):
    assert run(["check", "--suite", "centering"]) == 0
    assert capsys.readouterr().out.startswith("PASS")


def test_check_failure_exit_5(monkeypatch):
    monkeypatch.setattr(cli, "run_suite", lambda name: [CheckResult("x", False, 1.0, 0.1)])
    assert run(["check"]) == 5


def test_reproduce_is_byte_identical(tmp_path):
    args = ["reproduce-benchmark", "--seed", 3, "--seeds", 2, "--nphi-range", "1..2",
            "--epochs", 40]
    assert run([*args, "--out", tmp_path / "a"]) == 0
    assert run([*args, "--out", tmp_path / "b"]) == 0
    a = (tmp_path / "a" / "report.csv").read_bytes()
    assert a == (tmp_path / "b" / "report.csv").read_bytes()
    assert a.count(b"\n") == 9


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lpvsdr.cli", "check", "--suite",
                           "embedding"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "embedding_residual" in proc.stdout
