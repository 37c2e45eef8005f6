"""Tests for configuration loading, validation and overrides."""

from pathlib import Path

import numpy as np
import pytest

from mmap_birl.models.config import (
    AscentConfig,
    EmConfig,
    EnvironmentConfig,
    ExperimentConfig,
    Method,
    PriorConfig,
    SweepConfig,
    config_from_yaml,
    config_to_yaml,
    load_config,
)
from mmap_birl.utils.error_handling import ConfigurationError

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


class TestShippedConfigs:
    @pytest.mark.parametrize("name", ["forestworld.yaml", "onionworld.yaml"])
    def test_experiment_configs_load(self, name):
        config = load_config(ExperimentConfig, CONFIG_DIR / name)
        assert config.ascent.beta == 0.03
        assert config.record_timing is False

    @pytest.mark.parametrize(
        "name",
        [
            "forestworld_occlusion_sweep.yaml",
            "forestworld_noise_sweep.yaml",
            "onionworld_occlusion_sweep.yaml",
            "smoke_sweep.yaml",
        ],
    )
    def test_sweep_configs_load(self, name):
        config = load_config(SweepConfig, CONFIG_DIR / name)
        assert config.methods == [Method.MMAP, Method.IGNORE, Method.EM]


class TestValidation:
    def test_seed_is_required(self):
        with pytest.raises(ConfigurationError) as info:
            config_from_yaml(ExperimentConfig, "method: mmap\n")
        assert any(error.startswith("seed") for error in info.value.field_errors)

    def test_unknown_keys_are_rejected(self):
        with pytest.raises(ConfigurationError, match="stepsize"):
            config_from_yaml(ExperimentConfig, "seed: 1\nascent:\n  stepsize: 0.1\n")

    def test_unknown_environment(self):
        with pytest.raises(ConfigurationError):
            config_from_yaml(ExperimentConfig, "seed: 1\nenvironment:\n  name: swampworld\n")

    def test_gradient_scale_choices(self):
        assert PriorConfig(gradient_scale=0.5).gradient_scale == 0.5
        with pytest.raises(ValueError):
            PriorConfig(gradient_scale=0.25)

    def test_empty_sweep_levels(self):
        with pytest.raises(ConfigurationError):
            config_from_yaml(SweepConfig, "seed: 1\nocclusion_levels: []\n")

    def test_missing_and_malformed_files(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            load_config(ExperimentConfig, tmp_path / "missing.yaml")
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n", encoding="utf-8")
        with pytest.raises(ConfigurationError) as info:
            load_config(ExperimentConfig, path)
        assert info.value.config_path == str(path)


class TestRoundTrip:
    def test_yaml_round_trip(self):
        config = ExperimentConfig(seed=5, method=Method.EM, ascent=AscentConfig(beta=0.1))
        assert config_from_yaml(ExperimentConfig, config_to_yaml(config)) == config

    def test_overrides_ignore_none(self):
        config = ExperimentConfig(seed=5)
        updated = config.with_overrides(seed=9, method="ignore", jobs=None)
        assert (updated.seed, updated.method, updated.jobs) == (9, Method.IGNORE, 1)

    def test_invalid_override(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(seed=5).with_overrides(jobs=0)

    def test_em_section_takes_the_file_ascent(self):
        config = ExperimentConfig(em=EmConfig(em_max_rounds=3), seed=5)
        assert config.em.ascent is None
        assert config.em.inner_ascent == AscentConfig()
        ascent = config.ascent.model_copy(update={"seed": 5})
        em = config.em.with_ascent(ascent)
        assert em.inner_ascent.seed == 5
        assert (em.em_max_rounds, em.em_tolerance) == (3, config.em.em_tolerance)

    def test_prior_broadcasts_scalars(self):
        prior = PriorConfig(mean=-1.0, variance=0.25).to_prior(3)
        np.testing.assert_allclose(prior.mean, [-1.0, -1.0, -1.0])
        np.testing.assert_allclose(prior.stddev, [0.5, 0.5, 0.5])

    def test_environment_file_is_not_builtin(self, tmp_path):
        path = tmp_path / "rooms.env"
        path.write_text("states 1\n", encoding="utf-8")
        assert not EnvironmentConfig(name=str(path)).is_builtin
