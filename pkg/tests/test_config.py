"""Tests for environment settings and run configuration files."""
import json
import os

import pytest

from treepin.core.config import Config, RunConfig, load_run_config
from treepin.core.exceptions import ConfigurationError
from treepin.core.models import BernoulliDisorder, SubtreeConstant


class TestEnvironmentConfig:
    """Settings read from TREEPIN_* variables."""

    def test_defaults(self, monkeypatch):
        """Defaults apply when nothing is set."""
        monkeypatch.delenv("TREEPIN_OUTPUT_DIR", raising=False)
        cfg = Config()
        assert cfg.node_budget == 100_000_000
        assert cfg.brute_force_limit == 1_000_000
        assert cfg.threads == 1
        assert cfg.log_level == "WARNING"
        assert cfg.default_output_dir == "./outputs"
        assert cfg.enable_cache is False
        cfg.validate()

    def test_overrides(self, monkeypatch):
        """Environment values win over defaults."""
        monkeypatch.setenv("TREEPIN_THREADS", "6")
        monkeypatch.setenv("TREEPIN_ENABLE_CACHE", "yes")
        monkeypatch.setenv("TREEPIN_LOG_LEVEL", "debug")
        cfg = Config()
        assert cfg.threads == 6
        assert cfg.enable_cache is True
        assert cfg.log_level == "DEBUG"

    def test_unparseable_numbers_fall_back(self, monkeypatch):
        """Garbage numbers fall back to the default."""
        monkeypatch.setenv("TREEPIN_BLOCK_SIZE", "lots")
        assert Config().block_size == 262_144

    @pytest.mark.parametrize("name", ["TREEPIN_NODE_BUDGET", "TREEPIN_BRUTE_FORCE_LIMIT", "TREEPIN_BLOCK_SIZE"])
    def test_validation(self, monkeypatch, name):
        """Non-positive limits are rejected."""
        monkeypatch.setenv(name, "0")
        with pytest.raises(ConfigurationError):
            Config().validate()

    def test_env_file_does_not_override_environment(self, tmp_path, monkeypatch):
        """Variables already set win over the .env file."""
        monkeypatch.setenv("TREEPIN_THREADS", "3")
        monkeypatch.setenv("TREEPIN_BRUTE_FORCE_LIMIT", "10")
        monkeypatch.delenv("TREEPIN_BRUTE_FORCE_LIMIT")
        env = tmp_path / ".env"
        env.write_text("TREEPIN_THREADS=8\n# comment\n\nTREEPIN_BRUTE_FORCE_LIMIT=500\n")
        cfg = Config(str(env))
        assert cfg.threads == 3
        assert cfg.brute_force_limit == 500
        assert os.environ["TREEPIN_BRUTE_FORCE_LIMIT"] == "500"


class TestRunConfig:
    """JSON run configuration with flag overrides."""

    def test_defaults(self):
        """Defaults apply when nothing is set."""
        run = load_run_config()
        assert run == RunConfig()
        assert run.beta_grid[0] == 0.0 and run.beta_grid[-1] == 4.0
        assert len(run.u_grid) == 13
        assert run.potential == 0.0

    def test_file_and_overrides(self, tmp_path):
        """Flags win over the file, None flags are ignored."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({
            "model": {"d": 3, "d1": 2, "bulk": {"kind": "bernoulli", "p": 0.2},
                      "defect": {"kind": "subtree_constant", "u": 1.5}},
            "beta": 0.7,
            "replicas": 12,
        }))
        run = load_run_config(str(path), {"beta": 2.0, "replicas": None, "seed": 99})
        assert run.beta == 2.0
        assert run.replicas == 12
        assert run.seed == 99
        assert isinstance(run.model.bulk, BernoulliDisorder)
        assert isinstance(run.model.defect, SubtreeConstant)
        assert run.potential == 1.5
        assert load_run_config(str(path), {"u": -1.0}).potential == -1.0

    @pytest.mark.parametrize("content", [
        "{broken",
        "[1, 2]",
        json.dumps({"n": 0}),
        json.dumps({"seed": -1}),
        json.dumps({"beta": "hot"}),
        json.dumps({"model": {"d": 2, "d1": 1, "defect": {"kind": "branch_shift"}}, "extra": 1}),
    ])
    def test_invalid_files(self, tmp_path, content):
        """Malformed or invalid files raise ConfigurationError."""
        path = tmp_path / "run.json"
        path.write_text(content)
        with pytest.raises(ConfigurationError):
            load_run_config(str(path))

    def test_threads_default_from_environment(self, tmp_path, monkeypatch):
        """TREEPIN_THREADS fills threads unless the file or a flag sets it."""
        monkeypatch.setenv("TREEPIN_THREADS", "5")
        assert load_run_config().threads == 5
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"threads": 2}))
        assert load_run_config(str(path)).threads == 2
        assert load_run_config(str(path), {"threads": 7}).threads == 7
        assert load_run_config(None, {"threads": None}).threads == 5

    def test_missing_file(self, tmp_path):
        """An absent file is a configuration error."""
        with pytest.raises(ConfigurationError):
            load_run_config(str(tmp_path / "absent.json"))

    def test_round_trip_through_record_form(self):
        """A dumped run config validates back to itself."""
        run = load_run_config(None, {"beta": 1.25, "n_list": [3, 5]})
        assert RunConfig.model_validate(run.model_dump(mode="json")) == run
