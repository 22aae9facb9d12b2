"""
Experiment configuration: one JSON document, every field defaulted.
"""

import json
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.exceptions import ConfigError
from src.scene import IMAGE_SIZE
from src.specmodel import DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_GAMMA, DEFAULT_LR
from src.trajectory import UserType


class Ablation(str, Enum):
    FULL = "full"
    AE = "ae"
    CLASSIFIER = "classifier"


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seeds: List[int] = Field(
        default=[0], min_length=1, description="Run seeds; the first drives data generation"
    )
    scenes_train: int = Field(default=20, ge=1, description="Training scenes")
    scenes_test: int = Field(default=20, ge=1, description="Held-out scenes, unseen palette")
    trajectories_per_scene: List[int] = Field(
        default=list(range(1, 11)),
        min_length=1,
        description="Demonstrations per scene swept by the accuracy curve",
    )
    test_trajectories_per_scene: int = Field(
        default=10, ge=1, description="Held-out demonstrations per scene"
    )
    alpha: float = Field(default=DEFAULT_ALPHA, ge=0, description="Reconstruction weight")
    beta: float = Field(default=DEFAULT_BETA, ge=0, description="KL weight")
    gamma: float = Field(default=DEFAULT_GAMMA, ge=0, description="Classification weight")
    ablations: List[Ablation] = Field(default=list(Ablation), min_length=1)
    user_types: List[UserType] = Field(default=list(UserType), min_length=1)
    eval_user_types: List[UserType] = Field(
        default=[UserType.CAREFUL, UserType.NORMAL],
        description="User types swept by the accuracy curve",
    )
    epochs: int = Field(default=200, ge=1)
    batch_size: int = Field(default=32, ge=1)
    lr: float = Field(default=DEFAULT_LR, gt=0)
    image_size: int = Field(default=IMAGE_SIZE, ge=8, description="Rendered image side in pixels")
    irl_epochs: int = Field(default=200, ge=1)
    irl_lr: float = Field(default=1e-2, gt=0)
    refine_trials_per_scene: int = Field(default=5, ge=1)
    refine_max_steps: int = Field(default=30, ge=1)
    refine_step_size: float = Field(default=0.05, gt=0)
    latent_grid_n: int = Field(
        default=20, ge=1, description="Side of the exported latent validity grid"
    )
    causal_thetas_per_scene: int = Field(default=200, ge=1)
    bootstrap_resamples: int = Field(default=1000, ge=10)
    significance_threshold: float = Field(default=0.05, ge=0)
    jobs: int = Field(default=1, ge=1, description="Worker processes for independent jobs")

    @field_validator("trajectories_per_scene")
    @classmethod
    def positive_counts(cls, counts: List[int]) -> List[int]:
        if any(k < 1 for k in counts):
            raise ValueError("trajectories_per_scene entries must be positive")
        return sorted(set(counts))

    @property
    def seed(self) -> int:
        return self.seeds[0]

    @property
    def train_trajectories_per_scene(self) -> int:
        return max(self.trajectories_per_scene)

    def coefficients(self, ablation: Ablation) -> Tuple[float, float, float]:
        """(alpha, beta, gamma) for an ablation variant."""
        ablation = Ablation(ablation)
        if ablation == Ablation.AE:
            return self.alpha, 0.0, self.gamma
        if ablation == Ablation.CLASSIFIER:
            return 0.0, 0.0, self.gamma
        return self.alpha, self.beta, self.gamma


def load_config(path: Optional[Path] = None, **overrides) -> ExperimentConfig:
    """
    Read a config document and apply flag overrides.

    Args:
        path: JSON file; None gives the defaults
        overrides: field values from the command line, None meaning unset

    Raises:
        ConfigError: unreadable file, malformed JSON or invalid fields
    """
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"Cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config {path} must be a JSON object")

    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid config: {e}") from e
    logger.debug(f"Loaded config: {config.model_dump_json()}")
    return config
