from __future__ import annotations

import csv
import io
import math

import numpy as np
import pytest
from click.testing import CliRunner

from omtube import __version__
from omtube.cli import cli


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


def rows(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


class TestCli:
    def test_version(self, runner):
        result = runner.invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert __version__ in result.output

    def test_tube_prob(self, runner):
        result = runner.invoke(cli, ["tube-prob", "--c", "1", "--delta", "1", "--T", "1"])
        assert result.exit_code == 0, result.output
        (row,) = rows(result.stdout)
        assert float(row["series"]) == pytest.approx(0.37077, abs=5e-5)
        assert float(row["one_term"]) > float(row["series"])

    def test_tube_prob_bad_input(self, runner):
        result = runner.invoke(cli, ["tube-prob", "--c", "0", "--delta", "1", "--T", "1"])
        assert result.exit_code == 2

    def test_simulate_path(self, runner, brownian_config):
        result = runner.invoke(cli, ["simulate", "--config", str(brownian_config)])
        assert result.exit_code == 0, result.output
        data = rows(result.stdout)
        assert len(data) == 11
        assert float(data[0]["x"]) == 0.0
        assert float(data[-1]["t"]) == pytest.approx(0.1)

    def test_simulate_is_reproducible(self, runner, brownian_config):
        args = ["simulate", "--config", str(brownian_config), "--path-index", "4"]
        assert runner.invoke(cli, args).stdout == runner.invoke(cli, args).stdout
        other = runner.invoke(cli, args + ["--seed", "9"]).stdout
        assert other != runner.invoke(cli, args).stdout

    def test_simulate_ensemble(self, runner, brownian_config):
        result = runner.invoke(
            cli, ["simulate", "--config", str(brownian_config), "--n", "5", "--workers", "1"]
        )
        assert result.exit_code == 0, result.output
        assert result.stdout.splitlines()[0] == "path_index,T"
        assert "/5 transitions" in result.stderr

    def test_simulate_to_file(self, runner, brownian_config, tmp_path):
        target = tmp_path / "path.csv"
        result = runner.invoke(
            cli, ["simulate", "--config", str(brownian_config), "--out", str(target)]
        )
        assert result.exit_code == 0
        assert result.stdout == ""
        assert len(target.read_text().splitlines()) == 12

    def test_mptp(self, runner, brownian_config):
        result = runner.invoke(cli, ["mptp", "--config", str(brownian_config), "--T", "1"])
        assert result.exit_code == 0, result.output
        data = rows(result.stdout)
        assert float(data[-1]["x"]) == pytest.approx(1.0, abs=1e-8)
        assert float(data[len(data) // 2]["x"]) == pytest.approx(0.5, abs=1e-8)
        assert "v0=1" in result.stderr

    def test_action_on_path_file(self, runner, brownian_config, tmp_path):
        t = np.linspace(0.0, 1.0, 101)
        path_file = tmp_path / "line.csv"
        path_file.write_text("t,x\n" + "".join(f"{float(a)!r},{float(a)!r}\n" for a in t))
        result = runner.invoke(
            cli,
            ["action", "--path", str(path_file), "--config", str(brownian_config),
             "--functional", "mom", "--delta", "0.5"],
        )
        assert result.exit_code == 0, result.output
        (row,) = rows(result.stdout)
        assert row["functional"] == "mom"
        assert float(row["kinetic_part"]) == pytest.approx(0.5)
        assert float(row["total"]) == pytest.approx(0.5 + math.pi**2 / 2)

    def test_action_needs_delta_for_mom(self, runner, brownian_config, tmp_path):
        path_file = tmp_path / "line.csv"
        path_file.write_text("t,x\n0,0\n0.5,0.5\n1,1\n")
        result = runner.invoke(
            cli,
            ["action", "--path", str(path_file), "--config", str(brownian_config),
             "--functional", "mom"],
        )
        assert result.exit_code == 2

    def test_action_curve(self, runner, brownian_config):
        result = runner.invoke(
            cli,
            ["action-curve", "--config", str(brownian_config), "--delta", "0.5",
             "--tmin", "0.5", "--tmax", "1", "--n", "3"],
        )
        assert result.exit_code == 0, result.output
        data = rows(result.stdout)
        assert [float(r["T"]) for r in data] == [0.5, 0.75, 1.0]
        assert all(r["ok"] == "true" for r in data)
        assert float(data[0]["s_om"]) == pytest.approx(1.0)

    def test_mptt_closed_form(self, runner, brownian_config):
        result = runner.invoke(
            cli, ["mptt", "--config", str(brownian_config), "--delta", "0.5", "--method", "closed"]
        )
        assert result.exit_code == 0, result.output
        (row,) = rows(result.stdout)
        assert float(row["t_star"]) == pytest.approx(1 / math.pi)
        assert float(row["rho"]) <= float(row["t_star"]) <= float(row["t_upper"])
        assert row["condition_ok"] == "true"

    def test_mptt_without_sign_change(self, runner, brownian_config):
        result = runner.invoke(
            cli,
            ["mptt", "--config", str(brownian_config), "--delta", "0.5", "--method", "shell",
             "--tmin", "0.5", "--tmax", "1"],
        )
        assert result.exit_code == 3
        assert "NoSignChange" in result.stderr

    def test_bounds(self, runner, brownian_config):
        result = runner.invoke(cli, ["bounds", "--config", str(brownian_config), "--delta", "0.5"])
        assert result.exit_code == 0, result.output
        (row,) = rows(result.stdout)
        assert float(row["rho"]) > 0.0
        assert float(row["mean_exit"]) == pytest.approx(30.25)
        assert row["degenerate"] == "false"

    def test_invalid_config(self, runner, write_config):
        bad = write_config(bogus=1)
        result = runner.invoke(cli, ["bounds", "--config", str(bad), "--delta", "0.5"])
        assert result.exit_code == 2
        assert "invalid configuration" in result.stderr

    def test_invalid_system(self, runner, write_config):
        bad = write_config(x0=0.5)
        result = runner.invoke(cli, ["mptp", "--config", str(bad), "--T", "1"])
        assert result.exit_code == 2
        assert "MetastabilityViolation" in result.stderr

    def test_invalid_tube(self, runner, brownian_config):
        result = runner.invoke(cli, ["bounds", "--config", str(brownian_config), "--delta", "3"])
        assert result.exit_code == 2
