"""
Tests for settings, config files and layered merging
"""
import pytest

from multigraph_limits.config import Settings, Thresholds, get_settings, load_config_file, merge_config
from multigraph_limits.errors import ConfigError


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("MGL_WORKERS", "3")
    monkeypatch.setenv("MGL_VALIDATE_MATRICES", "true")
    settings = Settings()
    assert settings.workers == 3
    assert settings.validate_matrices is True


def test_get_settings_is_cached():
    assert get_settings() is get_settings()


def test_threshold_defaults():
    thresholds = Thresholds()
    assert thresholds.p_value_floor == 1e-3
    assert thresholds.ks_scale / 400**0.5 == pytest.approx(0.06)


class TestConfigFile:
    def test_missing_path_is_empty(self):
        assert load_config_file(None) == {}

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_file(tmp_path / "absent.env")

    def test_keys_are_normalised(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text("# sweep settings\nN=300\nrho=1.5\nreplicas=4\n")
        assert load_config_file(path) == {"n": "300", "rho": "1.5", "replicas": "4"}


class TestMerge:
    def test_flags_beat_file_beat_defaults(self):
        merged = merge_config({"n": 400, "kappa": 1.5}, {"n": "300", "seed": "9"}, {"n": 200, "seed": None})
        assert merged == {"n": 200, "kappa": 1.5, "seed": "9"}

    def test_m_flag_drops_inherited_rho(self):
        merged = merge_config({"n": 400, "rho": 2.0}, {}, {"m": 50})
        assert merged == {"n": 400, "m": 50}

    def test_rho_in_file_drops_default_m(self):
        merged = merge_config({"n": 2, "m": 2}, {"rho": "1.0"}, {})
        assert "m" not in merged
        assert merged["rho"] == "1.0"

    def test_both_in_one_layer_are_kept(self):
        merged = merge_config({}, {}, {"m": 3, "rho": 1.0})
        assert merged == {"m": 3, "rho": 1.0}
