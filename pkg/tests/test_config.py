"""Settings loading and the mapping onto training options."""

import pytest

from bhme import __version__
from bhme.core.annealing import AnnealingMode
from bhme.core.config import Settings, load_settings, settings
from bhme.core.errors import InvalidArgumentError
from bhme.core.variational import TrainingConfig


def test_settings_importable():
    """Verify core config module loads without errors."""
    assert settings.APP_NAME == "bhme"
    assert settings.APP_VERSION == __version__


def test_defaults():
    defaults = Settings(_env_file=None)
    assert defaults.PRIOR_GAMMA_SHAPE == 1e-2
    assert defaults.PRIOR_GAMMA_RATE == 1e-4
    assert defaults.ANNEALING_INITIAL == 5.85
    assert defaults.ANNEALING_DECAY == 0.97
    assert defaults.ANNEALING_SWITCH_ITERATION == 200
    assert defaults.MAX_ENUMERATION_EXPERTS == 8


def test_load_settings_without_file_returns_global():
    assert load_settings() is settings


def test_load_settings_from_file(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("MAX_ITERATIONS=120\nANNEALING_MODE=clamped\nUNRELATED=1\n")
    loaded = load_settings(str(path))
    assert loaded.MAX_ITERATIONS == 120
    assert loaded.ANNEALING_MODE == "clamped"


def test_environment_overrides_defaults(monkeypatch):
    monkeypatch.setenv("TOLERANCE", "1e-3")
    assert Settings(_env_file=None).TOLERANCE == 1e-3


def test_training_config_from_settings():
    config = TrainingConfig.from_settings(
        Settings(_env_file=None, MAX_ITERATIONS=77, ANNEALING_MODE="none")
    )
    assert config.max_iterations == 77
    assert config.annealing.mode is AnnealingMode.none
    assert config.priors.gamma_shape == 1e-2


def test_bad_annealing_mode_is_invalid_argument():
    with pytest.raises(InvalidArgumentError):
        TrainingConfig.from_settings(Settings(_env_file=None, ANNEALING_MODE="fast"))


def test_invalid_value_in_config_file(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("MAX_ITERATIONS=abc\n")
    with pytest.raises(InvalidArgumentError, match="MAX_ITERATIONS"):
        load_settings(str(path))
