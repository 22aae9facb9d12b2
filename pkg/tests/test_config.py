import json

import pytest

from src.config import Ablation, ExperimentConfig, load_config
from src.exceptions import ConfigError
from src.trajectory import UserType


def test_defaults():
    config = load_config()
    assert config.seed == 0
    assert config.trajectories_per_scene == list(range(1, 11))
    assert config.train_trajectories_per_scene == 10
    assert config.eval_user_types == [UserType.CAREFUL, UserType.NORMAL]
    assert (config.alpha, config.beta, config.gamma) == (1.0, 4.0, 10.0)
    assert config.bootstrap_resamples == 1000


def test_file_and_overrides(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"epochs": 5, "seeds": [3, 4], "image_size": 32}))
    config = load_config(path, epochs=7, jobs=None)
    assert config.epochs == 7
    assert config.seeds == [3, 4] and config.seed == 3
    assert config.image_size == 32
    assert config.jobs == 1


def test_trajectory_counts_are_sorted_and_unique():
    config = ExperimentConfig(trajectories_per_scene=[5, 1, 5, 3])
    assert config.trajectories_per_scene == [1, 3, 5]
    assert config.train_trajectories_per_scene == 5


@pytest.mark.parametrize(
    "payload",
    [
        {"trajectories_per_scene": [0, 2]},
        {"epochs": 0},
        {"image_size": 4},
        {"bootstrap_resamples": 5},
        {"user_types": ["reckless"]},
        {"epoch": 10},
    ],
)
def test_invalid_fields(tmp_path, payload):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


def test_malformed_json(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{epochs: 3")
    with pytest.raises(ConfigError):
        load_config(path)


def test_document_must_be_an_object(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(path)


def test_ablation_coefficients():
    config = ExperimentConfig(alpha=2.0, beta=3.0, gamma=5.0)
    assert config.coefficients(Ablation.FULL) == (2.0, 3.0, 5.0)
    assert config.coefficients(Ablation.AE) == (2.0, 0.0, 5.0)
    assert config.coefficients("classifier") == (0.0, 0.0, 5.0)
