#!/usr/bin/env python3
"""
Tests for the command line interface and its exit codes
"""

import json
from pathlib import Path

import pandas as pd
import pytest

from oamsim import verification
from oamsim.cli import (EXIT_ABORT, EXIT_INVALID, EXIT_OK, EXIT_VERIFY_FAILED, resolve_config,
                        run_command)
from oamsim.verification import CheckResult

BASELINE_BLOCK = {"dimensionless": {"xi": "1/2", "eta": "1/3", "theta": 0.6931471805599453,
                                    "exact": True}}


def write_config(directory: Path, **fields) -> Path:
    data = {
        "params": BASELINE_BLOCK,
        "seed": 7,
        "truncation": 20,
        "initial_state": {"pure": [1.0, 1.0]},
        "horizon": 30,
        "n_trajectories": 3,
        "checkpoint_every": 10,
        "outcome_horizon": 2,
        "shift_grid": [0, 5],
        "channel_t_max": 50000,
        "n_max": 30,
    }
    data.update(fields)
    path = directory / "run.json"
    path.write_text(json.dumps(data))
    return path


def run(config: Path, out: Path, *args: str) -> int:
    return run_command(["--config", str(config), "--output-dir", str(out), *args])


def results(out: Path, kind: str) -> dict:
    return json.loads((out / f"{kind}.json").read_text())["results"]


class TestExitCodes:
    """Test how outcomes map to exit codes"""

    def test_unknown_command(self):
        assert run_command(["transmogrify"]) == EXIT_INVALID

    def test_version(self):
        assert run_command(["--version"]) == EXIT_OK

    def test_invalid_config(self, tmp_path):
        config = write_config(tmp_path, truncation=-1)
        assert run(config, tmp_path / "out", "simulate") == EXIT_INVALID

    def test_invalid_flag_value(self, tmp_path):
        config = write_config(tmp_path)
        assert run(config, tmp_path / "out", "simulate", "--initial-state", "coherent:3") == \
            EXIT_INVALID

    def test_overflow_aborts_with_record(self, tmp_path):
        block = {"dimensionless": {"xi": "1/2", "eta": "1/3", "theta": -1.0}}
        config = write_config(tmp_path, params=block, truncation=6, initial_state="fock:2",
                              leakage_budget=1e-12, horizon=5000, n_trajectories=1)
        out = tmp_path / "out"
        assert run(config, out, "simulate") == EXIT_ABORT
        record = results(out, "error")
        assert record["error"] == "TruncationOverflow"
        assert record["leakage"] > record["budget"]


class TestResolveConfig:
    """Test layering of config file, flags and threads"""

    def test_flags_override_file(self, tmp_path):
        config = resolve_config(str(write_config(tmp_path)), {"truncation": 25, "seed": 3}, 2)
        assert config.truncation == 25
        assert config.seed == 3
        assert config.max_workers == 2

    def test_initial_state_replaced_whole(self, tmp_path):
        config = resolve_config(str(write_config(tmp_path)), {"initial_state": "fock:1"}, 1)
        assert config.initial_state == {"fock": 1}

    def test_baseline_by_default(self):
        config = resolve_config(None, {}, 1)
        assert config.seed == 20240611
        assert config.truncation == 64


class TestCommands:
    """Test each subcommand end to end"""

    def test_resonances(self, tmp_path):
        block = {"dimensionless": {"xi": "24", "eta": "1", "theta": 1.0}}
        config = write_config(tmp_path, params=block, initial_state="fock:0")
        out = tmp_path / "out"
        assert run(config, out, "resonances") == EXIT_OK
        summary = results(out, "resonances")
        assert summary["degeneracy"]["n_set"] == [0, 1]
        sectors = pd.read_csv(out / "sectors.csv")
        assert list(sectors.columns) == ["sector", "start", "end", "length", "open_ended"]

    def test_resonance_search(self, tmp_path):
        config = write_config(tmp_path, initial_state="fock:0")
        out = tmp_path / "out"
        assert run(config, out, "resonances", "--search-xi-den", "1", "--search-xi-num", "24",
                   "--search-eta-num", "1") == EXIT_OK
        pairs = results(out, "resonances")["search"]["degenerate_pairs"]
        assert {"xi": "24", "eta": "1", "n_set": [0, 1]} in pairs

    def test_simulate_identical_across_threads(self, tmp_path):
        """Outputs do not depend on the worker-thread count"""
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert run(config, out, "--threads", "1", "simulate") == EXIT_OK
        first = {name: (out / name).read_bytes()
                 for name in ("trajectories.csv", "simulate.json")}
        assert run(config, out, "--threads", "2", "simulate") == EXIT_OK
        for name, content in first.items():
            assert (out / name).read_bytes() == content

    def test_simulate_table(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert run(config, out, "simulate", "-T", "20", "-n", "2") == EXIT_OK
        table = pd.read_csv(out / "trajectories.csv")
        assert list(table.columns) == ["traj_id", "t", "m_max", "n_hat", "gap", "gap_bound",
                                       "purity", "mean_photon_number", "leakage"]
        assert sorted(table["t"].unique()) == [0, 10, 20]
        assert (table["gap"] <= table["gap_bound"] + 1e-12).all()

    def test_simulate_without_seed_records_one(self, tmp_path):
        config = write_config(tmp_path, seed=None)
        out = tmp_path / "out"
        assert run(config, out, "simulate") == EXIT_OK
        recorded = json.loads((out / "simulate.json").read_text())["config"]["seed"]
        assert isinstance(recorded, int)

    def test_classical(self, tmp_path):
        config = write_config(tmp_path, initial_state="fock:2")
        out = tmp_path / "out"
        assert run(config, out, "simulate", "--classical") == EXIT_OK
        table = pd.read_csv(out / "classical.csv")
        assert len(table) == 21
        assert table["occupation"].sum() == pytest.approx(1.0)
        assert results(out, "simulate")["mode"] == "classical"

    def test_classical_steps(self, tmp_path):
        """One row per trajectory and step, with levels following the outcomes"""
        config = write_config(tmp_path, initial_state="fock:2")
        out = tmp_path / "out"
        assert run(config, out, "simulate", "--classical") == EXIT_OK
        steps = pd.read_csv(out / "classical_steps.csv", keep_default_na=False)
        assert list(steps.columns) == ["traj_id", "t", "level", "outcome"]
        assert len(steps) == 3 * 31
        shifts = {"--": 0, "-+": -1, "+-": 1, "++": 0}
        for _, path in steps.groupby("traj_id"):
            assert list(path["t"]) == list(range(31))
            assert path["level"].iloc[0] == 2
            assert path["outcome"].iloc[0] == ""
            jumps = path["level"].diff().iloc[1:].astype(int).tolist()
            assert jumps == [shifts[y] for y in path["outcome"].iloc[1:]]

    def test_channel(self, tmp_path):
        config = write_config(tmp_path, initial_state="fock:0")
        out = tmp_path / "out"
        assert run(config, out, "channel", "-d", "40", "--tol", "1e-6", "--t-max", "200000",
                   "--record-every", "100") == EXIT_OK
        summary = results(out, "channel")
        assert summary["converged"]
        assert summary["regime"] == "non_resonant"
        table = pd.read_csv(out / "channel.csv")
        assert list(table.columns) == ["t", "trace_distance"]

    def test_outcomes(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert run(config, out, "outcomes", "-s", "2", "--shift-grid", "0,5,50") == EXIT_OK
        table = pd.read_csv(out / "outcomes.csv")
        assert list(table["t"]) == [0, 5, 50]
        assert (table["tv_distance"] <= 1.0).all()

    def test_wasserstein(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert run(config, out, "wasserstein", "-T", "20", "-n", "4") == EXIT_OK
        table = pd.read_csv(out / "wasserstein.csv")
        assert list(table["t"]) == [0, 20]
        assert (table["w1"] >= 0).all()

    def test_verify_selected_checks(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert run(config, out, "verify", "--check", "gibbs_invariance",
                   "--check", "stochasticity") == EXIT_OK
        table = pd.read_csv(out / "verify.csv")
        assert list(table["name"]) == ["gibbs_invariance", "stochasticity"]
        assert list(table.columns) == ["name", "passed", "value", "threshold", "seconds"]
        summary = results(out, "verify")
        assert summary["scale"] == "full"
        assert summary["acceptance"]

    def test_verify_quick_is_not_acceptance(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert run(config, out, "verify", "--scale", "quick", "--check", "stochasticity") == \
            EXIT_OK
        summary = results(out, "verify")
        assert summary["scale"] == "quick"
        assert not summary["acceptance"]

    def test_baseline_verifies_at_acceptance_scale(self):
        assert resolve_config(None, {}, 1).verify_scale == "full"

    def test_verify_failure(self, tmp_path, monkeypatch):
        def failing(ctx):
            return CheckResult("stochasticity", False, 1.0, 1e-12, 0.0)

        monkeypatch.setitem(verification.CHECKS, "stochasticity", failing)
        config = write_config(tmp_path)
        assert run(config, tmp_path / "out", "verify", "--check", "stochasticity") == \
            EXIT_VERIFY_FAILED

    def test_verify_needs_seed(self, tmp_path):
        config = write_config(tmp_path, seed=None)
        assert run(config, tmp_path / "out", "verify", "--check", "gibbs_invariance") == \
            EXIT_INVALID
