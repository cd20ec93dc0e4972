import json

import pytest

from longwave import harness
from longwave.cli import main
from longwave.verify import SUITES, run_suite


class TestList:
    def test_lists_experiments_and_configs(self, capsys):
        assert main(["list"]) == 0
        out = capsys.readouterr().out
        assert "kdv_sweep" in out and "zk_identities.ini" in out


class TestRun:
    def test_dry_run_writes_nothing(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("LONGWAVE_THREADS", raising=False)
        assert main(["run", "kdv_sweep.ini", "--dry-run", "--out", str(tmp_path / "o"), "--threads", "2"]) == 0
        plan = json.loads(capsys.readouterr().out)
        assert plan["experiment"] == "kdv_sweep" and plan["threads"] == 2
        assert not (tmp_path / "o").exists()

    def test_config_file_and_overrides(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("LONGWAVE_THREADS", raising=False)
        path = tmp_path / "c.ini"
        path.write_text("[experiment]\nname = kdv_sweep\n[grid]\nnx = 32\nnv = 64\n[sweep]\neps_list = 0.1, 0.05\n")
        assert main(["run", str(path), "sweep.t_end=0.5", "--dry-run"]) == 0
        plan = json.loads(capsys.readouterr().out)
        assert plan["config"]["sweep"]["t_end"] == "0.5"
        assert plan["kinetic_steps"]["0.05"]["steps"] == 100

    @pytest.mark.parametrize("args, key", [
        (["sweep.eps_list=0.05,0.1"], "sweep.eps_list"),
        (["sweep.nope=1"], "sweep.nope"),
        (["notanoverride"], "notanoverride"),
        (["--threads", "0"], "--threads"),
    ])
    def test_bad_input_names_key(self, args, key, capsys):
        assert main(["run", "kdv_sweep", "--dry-run", *args]) == 2
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1 and f"(key: {key})" in err[0]

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "missing.ini")]) == 2
        assert "error:" in capsys.readouterr().err

    def test_run_writes_outputs_and_exit_code(self, tmp_path, capsys):
        out = tmp_path / "eq"
        assert main(["run", "equilibrium_regression", "sweep.t_end=0.5", "--out", str(out)]) == 0
        assert "[PASS] equilibrium regression" in capsys.readouterr().out
        assert "overall: PASS" in (out / "report.txt").read_text()

    def test_failing_criteria_exit_nonzero(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setattr(harness, "run_experiment", lambda cfg, out: (None, [
            harness.Criterion("a", True, "fine"), harness.Criterion("b", False, "broken")]))
        assert main(["run", "ep_residual", "--out", str(tmp_path)]) == 1
        assert "[FAIL] b: broken" in capsys.readouterr().out


class TestVerify:
    @pytest.mark.parametrize("suite", sorted(SUITES))
    def test_each_suite_passes(self, suite):
        results = run_suite(suite)
        assert results and all(ok for _, ok, _ in results), results

    def test_all_via_cli(self, capsys):
        assert main(["verify", "all"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == sum(len(f()) for f in SUITES.values())
        assert all(line.startswith("[PASS]") for line in lines)

    def test_unknown_suite(self, capsys):
        assert main(["verify", "bogus"]) == 2
        assert "unknown suite" in capsys.readouterr().err
