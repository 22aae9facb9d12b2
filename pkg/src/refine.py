"""
Trajectory refinement by gradient ascent of the validity score in the
control-point coordinates, with the scene latent held at its posterior mean.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from src.exceptions import UntrainedModelError
from src.scene import Scene, render_scene
from src.specmodel import LATENT_DIM, SpecModel, classify, classify_with_grad, scene_embedding
from src.trajectory import (
    USER_TYPES,
    UserType,
    clamp_theta,
    oracle_validity,
    oracle_validity_batch,
)

MAX_STEPS = 30
STEP_SIZE = 0.05
STOP_SCORE = 0.95
_INVALID_DRAWS = 10_000


@dataclass
class RefinementTrace:
    """Every control point visited, initial one first, with its score."""

    initial_theta: np.ndarray
    step_thetas: List[np.ndarray]
    scores: List[float]
    final_valid_oracle: bool
    final_valid_model: bool

    @property
    def final_theta(self) -> np.ndarray:
        return self.step_thetas[-1]

    @property
    def steps_taken(self) -> int:
        return len(self.step_thetas) - 1

    def to_json(self, scene_path: str, user_type: UserType) -> Dict:
        return {
            "scene_path": scene_path,
            "user_type": UserType(user_type).value,
            "thetas": [[float(x), float(y)] for x, y in self.step_thetas],
            "scores": [float(s) for s in self.scores],
            "success": self.final_valid_oracle,
        }


def refine_trajectory(
    model: SpecModel,
    scene: Scene,
    initial_theta: Sequence[float],
    max_steps: int = MAX_STEPS,
    step_size: float = STEP_SIZE,
    image: Optional[np.ndarray] = None,
) -> RefinementTrace:
    """
    Push a control point towards higher predicted validity.

    Each step moves step_size along the unit-normalised score gradient and
    clamps to [-0.25, 1.25]^2. Iteration stops once the score reaches 0.95.

    Args:
        image: the scene already rendered at the model's image size, if the
            caller has it

    Raises:
        UntrainedModelError: if the model still holds its initial parameters
    """
    if max_steps < 1:
        raise ValueError(f"max_steps must be at least 1, got {max_steps}")
    if not model.is_trained:
        raise UntrainedModelError(
            f"Refusing to refine with an untrained {model.user_type.value} model"
        )
    if image is None:
        image = render_scene(scene, model.image_size)

    mu = scene_embedding(model, image)
    theta = clamp_theta(np.asarray(initial_theta, dtype=np.float64))
    score = classify(model, np.concatenate([mu, theta]))
    thetas = [theta]
    scores = [score]

    for _ in range(max_steps):
        if score >= STOP_SCORE:
            break
        _, grad = classify_with_grad(model, np.concatenate([mu, theta]))
        direction = grad[LATENT_DIM:]
        norm = np.linalg.norm(direction)
        if norm > 0:
            theta = clamp_theta(theta + step_size * direction / norm)
        score = classify(model, np.concatenate([mu, theta]))
        thetas.append(theta)
        scores.append(score)

    return RefinementTrace(
        initial_theta=thetas[0],
        step_thetas=thetas,
        scores=scores,
        final_valid_oracle=oracle_validity(scene, theta, model.user_type),
        final_valid_model=score >= 0.5,
    )


class RefinementRow(BaseModel):
    user_type: UserType
    trials: int = Field(ge=0)
    successes: int = Field(ge=0)
    success_rate: float = Field(ge=0, le=1, description="Oracle-valid final trajectories")


@dataclass
class TraceRecord:
    scene_index: int
    trial: int
    user_type: UserType
    trace: RefinementTrace


@dataclass
class RefinementResult:
    rows: List[RefinementRow]
    traces: List[TraceRecord]


def sample_invalid_theta(
    scene: Scene, user_type: UserType, rng: np.random.Generator
) -> np.ndarray:
    """Uniform control point that the oracle rejects, or any if none exists."""
    for _ in range(_INVALID_DRAWS // 64):
        chunk = rng.uniform(0.0, 1.0, size=(64, 2))
        invalid = ~oracle_validity_batch(scene, chunk, user_type)
        if invalid.any():
            return chunk[np.argmax(invalid)]
    return rng.uniform(0.0, 1.0, size=2)


def evaluate_refinement(
    models: Mapping[UserType, SpecModel],
    test_scenes: Sequence[Scene],
    trials_per_scene: int,
    seed: int,
    max_steps: int = MAX_STEPS,
    step_size: float = STEP_SIZE,
) -> RefinementResult:
    """
    Refine oracle-invalid starting points in every test scene, per user type.

    Aggressive users have no invalid control points, so their starting points
    are drawn uniformly.
    """
    rows = []
    records = []
    for user_type in [t for t in USER_TYPES if t in models]:
        model = models[user_type]
        successes = 0
        for scene_index, scene in enumerate(test_scenes):
            image = render_scene(scene, model.image_size)
            rng = np.random.default_rng([seed, scene_index, USER_TYPES.index(user_type)])
            for trial in range(trials_per_scene):
                if user_type == UserType.AGGRESSIVE:
                    start = rng.uniform(0.0, 1.0, size=2)
                else:
                    start = sample_invalid_theta(scene, user_type, rng)
                trace = refine_trajectory(
                    model, scene, start, max_steps=max_steps, step_size=step_size, image=image
                )
                successes += int(trace.final_valid_oracle)
                records.append(TraceRecord(scene_index, trial, user_type, trace))

        trials = len(test_scenes) * trials_per_scene
        row = RefinementRow(
            user_type=user_type,
            trials=trials,
            successes=successes,
            success_rate=successes / trials if trials else 0.0,
        )
        logger.info(
            f"Refinement {user_type.value}: {successes}/{trials} "
            f"({row.success_rate:.2%}) reached an oracle-valid trajectory"
        )
        rows.append(row)
    return RefinementResult(rows, records)


def save_trace(trace: RefinementTrace, path: Path, scene_path: str, user_type: UserType) -> None:
    """Write refine_trace.json."""
    Path(path).write_text(json.dumps(trace.to_json(scene_path, user_type), indent=2) + "\n")
