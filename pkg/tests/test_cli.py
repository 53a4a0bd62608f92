import csv
import json

import pytest

from absorbctl import ConfigurationError
from absorbctl.cli import DEFAULTS, TUNE_GRID, load_settings, main


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "loop.cfg"
    path.write_text("# planar demo\nzeta = 0.01\nhorizon = 2.0\n")
    return path


def run_cli(*args):
    return main([str(a) for a in args])


class TestSettings:
    def test_precedence(self, config_file):
        settings = load_settings(str(config_file), ["horizon=3.5", "N=16"])
        assert settings["horizon"] == 3.5      # --set beats the file
        assert settings["N"] == 16             # --set beats the default
        assert settings["zeta"] == 0.01        # file value
        assert settings["T_s"] == DEFAULTS["T_s"]

    def test_comments_and_blanks_ignored(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("\n  # comment only\nseed = 3  # trailing\n\n")
        assert load_settings(str(path), [])["seed"] == 3

    def test_vector_and_segment_values(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("x0 = (0.5, -0.5)\nu0_segments = -0.5:0.1; -0.2:-0.1\n")
        settings = load_settings(str(path), [])
        assert settings["x0"] == (0.5, -0.5)
        assert settings["u0_segments"] == ((-0.5, (0.1,)), (-0.2, (-0.1,)))

    @pytest.mark.parametrize("line", [
        "bogus = 1",
        "N = sixteen",
        "zeta = fast",
        "x0 = (a, b)",
        "u0_segments = nocolon",
        "justakey",
    ])
    def test_rejects_malformed_lines(self, tmp_path, line):
        path = tmp_path / "c.cfg"
        path.write_text(line + "\n")
        with pytest.raises(ConfigurationError):
            load_settings(str(path), [])

    def test_rejects_malformed_override(self, config_file):
        with pytest.raises(ConfigurationError):
            load_settings(str(config_file), ["bogus=1"])


class TestExitCodes:
    def test_missing_config(self, tmp_path):
        assert run_cli("simulate", "--config", tmp_path / "nope.cfg",
                       "--out", tmp_path) == 2

    def test_unknown_key(self, config_file, tmp_path):
        assert run_cli("simulate", "--config", config_file,
                       "--set", "bogus=1", "--out", tmp_path) == 2

    def test_invalid_model_parameter(self, config_file, tmp_path):
        # zeta = 0.02 violates the observer gain bound at model build time
        assert run_cli("verify", "--config", config_file,
                       "--set", "zeta=0.02", "--out", tmp_path) == 2

    def test_invalid_run_parameter(self, config_file, tmp_path):
        assert run_cli("simulate", "--config", config_file,
                       "--set", "N=-1", "--out", tmp_path) == 2


class TestSimulate:
    def test_outputs_and_determinism(self, config_file, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run_cli("simulate", "--config", config_file, "--out", out_a) == 0
        assert run_cli("simulate", "--config", config_file, "--out", out_b) == 0
        for name in ("trajectory.csv", "summary.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
        with open(out_a / "trajectory.csv") as fh:
            header = fh.readline().strip()
        assert header == "t,x1,x2,z1,z2,w1,u1,Vx,Vz,norm"
        summary = json.loads((out_a / "summary.json").read_text())
        assert summary["max_Vx"] <= 1.0 + 1e-6
        assert summary["config"]["horizon"] == 2.0

    def test_initial_input_segments_accepted(self, config_file, tmp_path):
        assert run_cli("simulate", "--config", config_file,
                       "--set", "u0_segments=-0.5:0.1; -0.2:-0.1",
                       "--set", "horizon=1.0", "--out", tmp_path) == 0

    def test_delay_free_loop(self, config_file, tmp_path):
        assert run_cli("simulate", "--config", config_file,
                       "--set", "r=0", "--set", "tau=0",
                       "--set", "horizon=1.0", "--out", tmp_path) == 0


class TestAnalysisCommands:
    def test_predictor_study(self, config_file, tmp_path):
        assert run_cli("predictor-study", "--config", config_file,
                       "--out", tmp_path) == 0
        with open(tmp_path / "predictor_study.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [int(row["N"]) for row in rows] == [8, 16, 32, 64]
        errs = [float(row["error"]) for row in rows]
        assert all(a > b for a, b in zip(errs, errs[1:]))

    def test_verify_passes_at_default_settings(self, config_file, tmp_path):
        assert run_cli("verify", "--config", config_file, "--out", tmp_path) == 0
        payload = json.loads((tmp_path / "verification.json").read_text())
        assert payload["zeta_bound_pass"] is True
        assert payload["all_pass"] is True
        assert len(payload["checks"]) == 6
        assert all(c["pass"] for c in payload["checks"])

    def test_sweep_reports_all_runs(self, config_file, tmp_path):
        # 2-second runs cannot hit the decay target, so the sweep fails but
        # still records every seed
        code = run_cli("sweep", "--config", config_file, "--out", tmp_path)
        assert code == 1
        payload = json.loads((tmp_path / "sweep.json").read_text())
        assert len(payload["runs"]) == 20
        assert payload["all_pass"] is False
        assert [run["seed"] for run in payload["runs"]] == list(range(20))

    def test_tune_exhausts_grid(self, config_file, tmp_path):
        code = run_cli("tune", "--config", config_file, "--out", tmp_path)
        assert code == 1
        payload = json.loads((tmp_path / "tune.json").read_text())
        assert payload["passed"] is False
        assert payload["triple"] is None
        assert len(payload["attempts"]) == len(TUNE_GRID)
