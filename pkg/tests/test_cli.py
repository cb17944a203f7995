import json
import subprocess
import sys

import numpy as np
import pytest

from ecdr.cli import main


def run_cli(args):
    """Invoke the CLI in-process, capturing exit code."""
    return main(args)


@pytest.fixture
def small_csv(tmp_path):
    rng = np.random.default_rng(3)
    lines = ["src,treat,outcome,age,sev"]
    for _ in range(120):
        x1, x2 = rng.standard_normal(2)
        r = int(rng.random() < 0.6)
        t = int(r and rng.random() < 0.45)
        y = 0.7 * x1 - 0.2 * x2 + t * 0.5 + rng.standard_normal()
        lines.append(f"{r},{t},{y:.6f},{x1:.6f},{x2:.6f}")
    path = tmp_path / "trial.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


ESTIMATE_ARGS = ["estimate", "--outcome", "outcome", "--treatment", "treat",
                 "--source", "src", "--covariates", "age,sev",
                 "--lambda", "0.05:0.05:0.02:0.02"]


class TestEstimate:
    def test_json_output(self, small_csv, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = run_cli(ESTIMATE_ARGS + ["--data", str(small_csv), "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert set(payload["reports"]) == {"nv", "eff", "safe"}
        rep = payload["reports"]["eff"]
        assert rep["ci"][0] <= rep["theta"] <= rep["ci"][1]
        # config echo makes the artifact re-runnable
        assert payload["config"]["covariates"] == ["age", "sev"]
        assert payload["config"]["level"] == 0.95
        assert payload["data_summary"]["N"] == 120
        assert set(payload["nuisance"]) == {"gamma", "beta", "alpha_eff", "alpha_nv"}
        for fit in payload["nuisance"].values():
            assert len(fit["coefficients"]) == 3
            assert fit["converged"] is True

    def test_csv_output(self, small_csv, tmp_path):
        out = tmp_path / "report.csv"
        code = run_cli(ESTIMATE_ARGS + ["--data", str(small_csv),
                                        "--format", "csv", "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0].startswith("method,theta,std_error,ci_lower,ci_upper")
        assert len(lines) == 4
        assert lines[1].split(",")[0] == "nv"

    def test_malformed_csv_exits_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("src,treat,outcome,age,sev\n1,2,0.5,0.1,0.2\n")
        code = run_cli(ESTIMATE_ARGS + ["--data", str(bad)])
        assert code == 3
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["type"] == "NonBinaryIndicator"
        assert "treat" in err["error"]["message"]

    def test_missing_file_exits_3(self, tmp_path):
        code = run_cli(ESTIMATE_ARGS + ["--data", str(tmp_path / "nope.csv")])
        assert code == 3

    def test_bad_lambda_exits_2(self, small_csv):
        code = run_cli(["estimate", "--data", str(small_csv), "--outcome", "outcome",
                        "--treatment", "treat", "--source", "src",
                        "--covariates", "age,sev", "--lambda", "1:2"])
        assert code == 2

    def test_no_external_rows_warns(self, tmp_path):
        rng = np.random.default_rng(4)
        lines = ["src,treat,outcome,age"]
        for _ in range(80):
            t = int(rng.random() < 0.5)
            lines.append(f"1,{t},{rng.standard_normal():.5f},{rng.standard_normal():.5f}")
        path = tmp_path / "primary_only.csv"
        path.write_text("\n".join(lines) + "\n")
        out = tmp_path / "rep.json"
        code = run_cli(["estimate", "--data", str(path), "--outcome", "outcome",
                        "--treatment", "treat", "--source", "src",
                        "--covariates", "age", "--lambda", "0.1:0.1:0.05:0.05",
                        "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["data_summary"]["n_external"] == 0
        assert any("external" in w for w in payload["warnings"])
        assert payload["reports"]["eff"]["theta"] == pytest.approx(
            payload["reports"]["nv"]["theta"], abs=1e-9)

    def test_clip_a_flag(self, small_csv, tmp_path):
        out = tmp_path / "rep.json"
        code = run_cli(ESTIMATE_ARGS + ["--data", str(small_csv), "--clip-a",
                                        "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert 0.0 <= payload["reports"]["safe"]["a_hat"] <= 1.0


class TestSimulate:
    BASE = ["simulate", "--model", "2ii", "--d", "4", "--n", "150", "--reps", "2",
            "--lambda", "0.05:0.05:0.02:0.02", "--oracle-draws", "100000"]

    def test_requires_seed(self, capsys):
        code = run_cli(self.BASE)
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert "seed" in err["error"]["message"]

    def test_json_output(self, tmp_path):
        out = tmp_path / "sim.json"
        code = run_cli(self.BASE + ["--seed", "5", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["config"]["seed"] == 5
        assert len(payload["rows"]) == 3

    def test_csv_deterministic_rerun(self, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        argv = self.BASE + ["--seed", "5", "--format", "csv"]
        assert run_cli(argv + ["--out", str(out1)]) == 0
        assert run_cli(argv + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_model_requires_sizing(self):
        code = run_cli(["simulate", "--model", "1", "--d", "4", "--reps", "2",
                        "--seed", "1"])
        assert code == 2

    def test_exit_zero_via_subprocess(self, tmp_path, small_csv=None):
        # the console entry point works end to end in a real process
        proc = subprocess.run(
            [sys.executable, "-m", "ecdr.cli"] + self.BASE + ["--seed", "5"],
            capture_output=True, text=True)
        assert proc.returncode == 0
        payload = json.loads(proc.stdout)
        assert len(payload["rows"]) == 3
