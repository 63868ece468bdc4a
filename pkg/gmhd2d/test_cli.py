#!/usr/bin/env python3
"""
End-to-end tests of the gmhd2d command line through ``main``.
"""

import shutil
import sys

import pandas as pd
import pytest

from gmhd2d import cli as cli_module
from gmhd2d.checkpoint import write_checkpoint
from gmhd2d.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, SUMMARY_COLUMNS, main, resolve_workers
from gmhd2d.config import Config, RunConfig, SweepConfig
from gmhd2d.dynamics import PhysicsParams
from gmhd2d.errors import ConfigError
from gmhd2d.fields import InitialCondition, make_initial_condition
from gmhd2d.spectral import Grid2D

BASE = """
[physics]
preset = "magnetic_diffusion"
beta = 1.5

[grid]
n = 16

[stepper]
t_end = {t_end}

[diagnostics]
cadence = 0.05
"""


def _config(tmp_path, name: str = "run.toml", t_end: float = 0.2, extra: str = "") -> str:
    path = tmp_path / name
    path.write_text(BASE.format(t_end=t_end) + extra)
    return str(path)


@pytest.fixture(autouse=True)
def _no_env_workers(monkeypatch):
    monkeypatch.setattr(Config, "WORKERS", "")


class TestRun:
    def test_zero_horizon(self, tmp_path):
        out = tmp_path / "out"
        assert main(["run", "--config", _config(tmp_path, t_end=0.0), "--out", str(out)]) == EXIT_OK
        series = pd.read_csv(out / "series.csv")
        assert len(series) == 1
        assert series.loc[0, "status"] == "ok"
        assert (out / "checkpoint_final.bin").exists()
        report = pd.read_csv(out / "report.csv")
        assert report.loc[0, "verdict"] == "bounded"

    def test_checkpoints_on_interval(self, tmp_path):
        out = tmp_path / "out"
        config = _config(tmp_path, extra="\n[output]\ncheckpoint_interval = 0.1\n")
        assert main(["run", "--config", config, "--out", str(out)]) == EXIT_OK
        assert (out / "checkpoint_t0.100000.bin").exists()
        assert (out / "checkpoint_t0.200000.bin").exists()
        assert len(pd.read_csv(out / "series.csv")) == 5

    def test_restart_reproduces_series(self, tmp_path):
        first = tmp_path / "first"
        config = _config(tmp_path, extra="\n[output]\ncheckpoint_interval = 0.1\n")
        assert main(["run", "--config", config, "--out", str(first)]) == EXIT_OK

        second = tmp_path / "second"
        second.mkdir()
        shutil.copy(first / "series.csv", second / "series.csv")
        checkpoint = first / "checkpoint_t0.100000.bin"
        resume = _config(
            tmp_path,
            name="resume.toml",
            extra=f'\n[ic]\nkind = "from_file"\npath = "{checkpoint}"\n\n[output]\nresume = true\ncheckpoint_interval = 0.1\n',
        )
        assert main(["run", "--config", resume, "--out", str(second)]) == EXIT_OK
        assert (second / "series.csv").read_text() == (first / "series.csv").read_text()

    def test_blowup_exit_code(self, tmp_path, capsys):
        out = tmp_path / "out"
        config = _config(tmp_path)
        path = tmp_path / "run.toml"
        path.write_text(path.read_text().replace("[stepper]\n", "[stepper]\nblowup_threshold = 1e-3\n"))
        assert main(["run", "--config", config, "--out", str(out)]) == EXIT_FAILURE
        series = pd.read_csv(out / "series.csv")
        assert series["status"].iloc[-1] == "blowup"
        assert pd.read_csv(out / "report.csv").loc[0, "verdict"] == "blown_up"
        assert "blow-up" in capsys.readouterr().out

    def test_corrupted_checkpoint(self, tmp_path, capsys):
        path = tmp_path / "state.bin"
        write_checkpoint(str(path), make_initial_condition(InitialCondition(), Grid2D(16)), PhysicsParams())
        blob = bytearray(path.read_bytes())
        blob[0:3] = b"BAD"
        path.write_bytes(bytes(blob))
        config = _config(tmp_path, extra=f'\n[ic]\nkind = "from_file"\npath = "{path}"\n')
        assert main(["run", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_USAGE
        output = capsys.readouterr().out
        assert "magic" in output and "offset 0" in output

    def test_config_errors(self, tmp_path, capsys):
        config = _config(tmp_path, extra="\n[output]\nflush = true\n")
        assert main(["run", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_USAGE
        assert "output.flush" in capsys.readouterr().out
        assert main(["run", "--config", str(tmp_path / "missing.toml")]) == EXIT_USAGE

    def test_usage_errors(self, tmp_path):
        assert main(["run"]) == EXIT_USAGE
        assert main(["run", "--config", _config(tmp_path), "--seed", "-1"]) == EXIT_USAGE
        assert main(["explode"]) == EXIT_USAGE


class TestSweep:
    SWEEP = "\n[sweep]\nbeta = [1.3, 1.1]\n"

    def test_summary(self, tmp_path):
        config = _config(tmp_path, t_end=0.05, extra=self.SWEEP)
        out = tmp_path / "sweep"
        assert main(["sweep", "--config", config, "--out", str(out), "--workers", "1"]) == EXIT_OK
        summary = pd.read_csv(out / "summary.csv")
        assert list(summary.columns) == SUMMARY_COLUMNS
        assert summary["beta"].tolist() == pytest.approx([1.1, 1.3])
        assert (summary["status"] == "completed").all()
        assert (out / "alpha0_beta1.1_n16" / "series.csv").exists()

    def test_deterministic_across_workers(self, tmp_path):
        config = _config(tmp_path, t_end=0.05, extra=self.SWEEP)
        assert main(["sweep", "--config", config, "--out", str(tmp_path / "a"), "--workers", "1"]) == EXIT_OK
        assert main(["sweep", "--config", config, "--out", str(tmp_path / "b"), "--workers", "1"]) == EXIT_OK
        assert main(["sweep", "--config", config, "--out", str(tmp_path / "c"), "--workers", "2"]) == EXIT_OK
        reference = (tmp_path / "a" / "summary.csv").read_text()
        assert (tmp_path / "b" / "summary.csv").read_text() == reference
        assert (tmp_path / "c" / "summary.csv").read_text() == reference

    def test_failed_cell_is_reported(self, tmp_path):
        extra = "\n[ic]\nkind = \"single_mode\"\nmode = [6, 0]\n" + self.SWEEP
        config = _config(tmp_path, t_end=0.05, extra=extra)
        out = tmp_path / "sweep"
        assert main(["sweep", "--config", config, "--out", str(out), "--workers", "1"]) == EXIT_OK
        summary = pd.read_csv(out / "summary.csv")
        assert (summary["status"] == "failed").all()
        assert summary["error"].str.contains("dealiased band").all()

    def test_unexpected_cell_error_is_recorded(self, tmp_path, monkeypatch):
        real_run = cli_module.execute_run

        def flaky(config):
            if config.physics.beta == 1.3:
                raise RuntimeError("worker lost its scratch buffer")
            return real_run(config)

        monkeypatch.setattr(cli_module, "execute_run", flaky)
        config = _config(tmp_path, t_end=0.05, extra=self.SWEEP)
        out = tmp_path / "sweep"
        assert main(["sweep", "--config", config, "--out", str(out), "--workers", "1"]) == EXIT_OK
        summary = pd.read_csv(out / "summary.csv")
        assert summary["status"].tolist() == ["completed", "failed"]
        assert summary.loc[1, "error"] == "RuntimeError: worker lost its scratch buffer"

    def test_resolve_workers(self, monkeypatch):
        config = RunConfig(sweep=SweepConfig(workers=3))
        assert resolve_workers(2, config) == 2
        assert resolve_workers(None, config) == 3
        monkeypatch.setattr(Config, "WORKERS", "5")
        assert resolve_workers(None, config) == 5
        monkeypatch.setattr(Config, "WORKERS", "many")
        with pytest.raises(ConfigError):
            resolve_workers(None, config)


class TestKernel:
    def test_requires_beta(self, tmp_path, capsys):
        assert main(["kernel", "--out", str(tmp_path)]) == EXIT_USAGE
        assert "--beta" in capsys.readouterr().out

    def test_rejects_non_positive_beta(self, tmp_path):
        assert main(["kernel", "--beta", "-1", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_gaussian_tables(self, tmp_path, capsys):
        args = ["kernel", "--beta", "1", "--l-max", "0", "--eta", "0.5", "--samples", "201", "--out", str(tmp_path)]
        assert main(args) == EXIT_OK
        table = pd.read_csv(tmp_path / "kernel_beta1.csv")
        assert list(table.columns) == ["r", "h", "dh/dr"]
        bounds = pd.read_csv(tmp_path / "l1_bounds.csv")
        assert bounds["quantity"].tolist() == ["grad", "lambda"]
        assert bounds.loc[0, "value"] == pytest.approx(1.0, abs=1e-6)
        output = capsys.readouterr().out
        assert "max |h - exp(-r^2/4)/(4 pi)|" in output
        assert "0 sign change(s)" in output

    def test_tables_are_reproducible(self, tmp_path):
        for name in ("a", "b"):
            args = ["kernel", "--beta", "1.5", "--l-max", "0", "--eta", "0.5", "--samples", "201"]
            assert main(args + ["--out", str(tmp_path / name)]) == EXIT_OK
        for table in ("kernel_beta1.5.csv", "l1_bounds.csv"):
            assert (tmp_path / "a" / table).read_bytes() == (tmp_path / "b" / table).read_bytes()


class TestInspect:
    def test_header(self, tmp_path, capsys):
        path = tmp_path / "state.bin"
        write_checkpoint(str(path), make_initial_condition(InitialCondition(), Grid2D(16)), PhysicsParams(beta=1.25))
        assert main(["inspect", str(path)]) == EXIT_OK
        output = capsys.readouterr().out
        assert "beta: 1.25" in output and "n: 16" in output

    def test_missing_file(self, tmp_path):
        assert main(["inspect", str(tmp_path / "none.bin")]) == EXIT_USAGE


def main_tests():
    """Run this module's tests"""
    code = pytest.main([__file__, "-q"])
    if code == 0:
        print("\n✅ cli tests passed")
    else:
        print("\n❌ cli tests failed")
    sys.exit(code)


if __name__ == "__main__":
    main_tests()
