#!/usr/bin/env python3
"""
Tests for OAMSIM Core functionality
"""

import json
import tempfile
from pathlib import Path

import numpy as np
import pytest

from oamsim.core import (DEFAULT_PLUGINS, THREADS_ENV, MaserCore, PluginManager,
                         RunConfig, build_initial_state, config_from_dict, failure_result,
                         load_config_file, parse_config, parse_state_spec, thread_count,
                         validate_config_dict)
from oamsim.exceptions import ConfigValidationError, ParameterError, TruncationOverflow

DEGENERATE_BLOCK = {"dimensionless": {"xi": "24", "eta": "1", "theta": 1.0}}


class TestRunConfig:
    """Test RunConfig class"""

    def test_default_config(self):
        """Test default configuration"""
        config = RunConfig()
        assert config.truncation == 64
        assert config.horizon == 5000
        assert config.seed is None
        assert config.log_level == "INFO"
        assert config.verify_scale == "full"
        assert config.enabled_plugins == DEFAULT_PLUGINS

    def test_default_is_valid(self):
        assert validate_config_dict(RunConfig().to_dict()) == []

    def test_round_trip(self):
        config = RunConfig(seed=11, truncation=40, initial_state={"fock": 3})
        assert config_from_dict(config.to_dict()) == config

    def test_resolved_drops_thread_count(self):
        resolved = RunConfig(max_workers=8).resolved()
        assert "max_workers" not in resolved
        assert resolved["truncation"] == 64

    def test_resolved_params(self):
        params = RunConfig(params=DEGENERATE_BLOCK).resolved_params()
        assert params.is_exact
        assert params.xi == 24


class TestParseConfig:
    """Test configuration validation"""

    def test_minimal_config(self):
        config = parse_config(json.dumps({"params": DEGENERATE_BLOCK, "seed": 5}))
        assert config.seed == 5
        assert config.initial_state == {"thermal": None}

    def test_both_param_blocks(self):
        block = dict(DEGENERATE_BLOCK, physical={"epsilon": 1.0})
        with pytest.raises(ConfigValidationError) as info:
            parse_config(json.dumps({"params": block}))
        assert [i.path for i in info.value.issues] == ["/params"]

    def test_missing_params(self):
        issues = validate_config_dict({"seed": 1})
        assert "/params" in [i.path for i in issues]

    def test_all_issues_reported(self):
        """Every violation is collected, not just the first"""
        data = {"params": DEGENERATE_BLOCK, "truncation": -1, "n_trajectories": 0,
                "log_level": "LOUD", "leakage_budget": 2.0}
        paths = {i.path for i in validate_config_dict(data)}
        assert {"/truncation", "/n_trajectories", "/log_level", "/leakage_budget"} <= paths

    def test_guard_rule(self):
        data = {"params": DEGENERATE_BLOCK, "truncation": 6, "initial_state": "fock:4"}
        issues = validate_config_dict(data)
        assert [i.path for i in issues] == ["/truncation"]
        assert "guard rule" in issues[0].message

    def test_invalid_json(self):
        with pytest.raises(ConfigValidationError) as info:
            parse_config("{not json")
        assert info.value.issues[0].path == ""

    def test_unknown_key(self):
        issues = validate_config_dict({"params": DEGENERATE_BLOCK, "colour": "blue"})
        assert [i.path for i in issues] == ["/colour"]

    def test_physical_block_keys(self):
        issues = validate_config_dict({"params": {"physical": {"epsilon": 1.0}}})
        paths = {i.path for i in issues}
        assert "/params/physical/tau" in paths
        assert "/params/physical/lambda" in paths

    def test_outcome_horizon_limit(self):
        issues = validate_config_dict({"params": DEGENERATE_BLOCK, "outcome_horizon": 11})
        assert [i.path for i in issues] == ["/outcome_horizon"]

    def test_yaml_file(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "run.yaml"
            path.write_text("params:\n  dimensionless:\n    xi: '24'\n    eta: '1'\n"
                            "    theta: 1.0\nseed: 3\ntruncation: 30\n")
            config = load_config_file(path)
            assert config.seed == 3
            assert config.truncation == 30

    def test_missing_file(self):
        with pytest.raises(ConfigValidationError):
            load_config_file("/nonexistent/run.json")


class TestInitialStates:
    """Test initial state specifications"""

    def test_string_forms(self):
        assert parse_state_spec("fock:3") == {"fock": 3}
        assert parse_state_spec("thermal") == {"thermal": None}
        assert parse_state_spec("thermal:0.5") == {"thermal": 0.5}

    def test_pure_amplitudes(self):
        assert parse_state_spec({"pure": [1, [0, 1]]}) == {"pure": [[1.0, 0.0], [0.0, 1.0]]}

    def test_rejected_specs(self):
        for spec in ("coherent:2", "fock:x", {"fock": -1}, {"mixture": []},
                     {"pure": [0, 0]}, {"fock": 1, "thermal": None}):
            with pytest.raises(ParameterError):
                parse_state_spec(spec)

    def test_mixture(self, baseline_params):
        rho = build_initial_state({"mixture": [[0, 1], [2, 3]]}, baseline_params, 5)
        np.testing.assert_allclose(rho.diagonal, [0.25, 0, 0.75, 0, 0, 0])

    def test_thermal_uses_params_theta(self, baseline_params):
        rho = build_initial_state("thermal", baseline_params, 10)
        assert rho.diagonal[1] / rho.diagonal[0] == pytest.approx(0.5)

    def test_mixture_beyond_truncation(self, baseline_params):
        with pytest.raises(ParameterError):
            build_initial_state({"mixture": [[9, 1.0]]}, baseline_params, 5)


class TestThreadCount:
    """Test the worker-thread environment setting"""

    def test_from_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv(THREADS_ENV, "3")
        assert thread_count(env_file=str(tmp_path / ".env")) == 3

    def test_default(self, monkeypatch, tmp_path):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert thread_count(2, env_file=str(tmp_path / ".env")) == 2

    def test_from_dotenv_file(self, monkeypatch, tmp_path):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        env_file = tmp_path / ".env"
        env_file.write_text(f"{THREADS_ENV}=4\n")
        assert thread_count(env_file=str(env_file)) == 4

    def test_invalid(self, monkeypatch, tmp_path):
        monkeypatch.setenv(THREADS_ENV, "many")
        with pytest.raises(ConfigValidationError):
            thread_count(env_file=str(tmp_path / ".env"))


class TestPluginManager:
    """Test PluginManager class"""

    def test_discover_plugins(self):
        plugins = PluginManager().discover_plugins()
        assert plugins == sorted(DEFAULT_PLUGINS)

    def test_class_name(self):
        manager = PluginManager()
        assert manager._get_plugin_class_name("resonances_plugin") == "ResonancesPlugin"
        assert manager._get_plugin_class_name("wasserstein_plugin") == "WassersteinPlugin"

    def test_failure_results(self):
        overflow = failure_result("Simulation", TruncationOverflow(12, 1e-6, 1e-9, trajectory=3))
        assert overflow["exit_code"] == 2
        assert overflow["error_record"]["step"] == 12
        assert overflow["error_record"]["trajectory"] == 3

        invalid = failure_result("Simulation", ParameterError("bad"))
        assert invalid["exit_code"] == 1
        assert invalid["status"] == "failed"

        crash = failure_result("Simulation", RuntimeError("boom"))
        assert crash["exit_code"] == 2
        assert crash["error_record"] == {"error": "RuntimeError", "message": "boom"}


class TestMaserCore:
    """Test MaserCore class"""

    def test_core_init(self):
        core = MaserCore(RunConfig(params=DEGENERATE_BLOCK))
        assert core.running is False
        assert len(core.analysis_results) == 0
        assert core.params.xi == 24

    def test_resolve_seed_records_entropy(self):
        core = MaserCore()
        seed = core.resolve_seed()
        assert isinstance(seed, int)
        assert core.config.seed == seed
        assert core.resolve_seed() == seed

    @pytest.mark.asyncio
    async def test_core_initialize_and_run(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            config = RunConfig(params=DEGENERATE_BLOCK, output_directory=temp_dir, n_max=30,
                               max_workers=2)
            core = MaserCore(config)
            assert await core.initialize()
            assert core.running
            assert len(core.get_analysis_plugins()) == len(DEFAULT_PLUGINS)

            result = await core.run_plugin("resonances_plugin")
            assert result["status"] == "completed"
            assert result["n_set"] == [0, 1]
            assert core.get_analysis_result("resonances_plugin") == result

            summary = json.loads((Path(temp_dir) / "resonances.json").read_text())
            assert summary["format_version"] == 1
            assert summary["kind"] == "resonances"
            assert "max_workers" not in summary["config"]
            assert (Path(temp_dir) / "sectors.csv").exists()

            await core.shutdown()
            assert not core.running

    @pytest.mark.asyncio
    async def test_run_unloaded_plugin(self):
        core = MaserCore(RunConfig(params=DEGENERATE_BLOCK))
        with pytest.raises(KeyError):
            await core.run_plugin("resonances_plugin")

    def test_analysis_results_management(self):
        core = MaserCore()
        core.set_analysis_result("test_plugin", {"status": "completed"})
        assert core.get_analysis_result("test_plugin") == {"status": "completed"}
        assert core.get_analysis_result("nonexistent") is None

    def test_config_save_load(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            config_file = Path(temp_dir) / "test_config.json"
            core = MaserCore(RunConfig(params=DEGENERATE_BLOCK, seed=7, truncation=30))
            assert core.save_config(str(config_file))
            assert config_file.exists()

            loaded = MaserCore.load_config(str(config_file))
            assert loaded.config == core.config

    def test_load_missing_config_gives_defaults(self):
        core = MaserCore.load_config("/nonexistent/oamsim_config.json")
        assert core.config == RunConfig()


if __name__ == "__main__":
    pytest.main([__file__])
