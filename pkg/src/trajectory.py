"""
Bezier trajectory representation, the user-type validity oracle and
demonstration synthesis.
"""

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Literal, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.exceptions import SchemaError, SynthesisFailure
from src.geometry import (
    CLEARANCE_DELTA,
    DENSE_SAMPLES,
    P_F,
    P_INIT,
    bezier_points,
    min_clearance,
)
from src.scene import ObjectKind, Scene

DEFAULT_SAMPLES = 50
THETA_CLAMP = (-0.25, 1.25)
MAX_SYNTHESIS_SAMPLES = 10_000
_SYNTHESIS_CHUNK = 64
_ENDPOINT_TOLERANCE = 1e-9


class UserType(str, Enum):
    CAREFUL = "careful"
    NORMAL = "normal"
    AGGRESSIVE = "aggressive"


USER_TYPES: Tuple[UserType, ...] = tuple(UserType)


@dataclass(frozen=True)
class Trajectory:
    """A sampled path from P_INIT to P_F, shape (T+1, 2)."""

    points: np.ndarray

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError(f"Trajectory points must be (T+1, 2), got {self.points.shape}")
        if len(self.points) < 3:
            raise ValueError("A trajectory needs T >= 2")

    @property
    def steps(self) -> int:
        return len(self.points) - 1


class Demonstration(BaseModel):
    """One labelled training record: a control point drawn in a scene for a user type."""

    model_config = ConfigDict(frozen=True)

    scene_ref: Scene = Field(description="Scene the trajectory was demonstrated in")
    theta: Tuple[float, float] = Field(description="Free Bezier control point")
    user_type: UserType = Field(description="Demonstrator type the label refers to")
    valid: bool = Field(description="Whether the trajectory satisfies the user type")


def clamp_theta(theta: np.ndarray) -> np.ndarray:
    return np.clip(np.asarray(theta, dtype=np.float64), *THETA_CLAMP)


def bezier_eval(theta: Sequence[float], t: float) -> np.ndarray:
    """B(t) = (1-t)² p_init + 2(1-t)t theta + t² p_f."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"Curve parameter must lie in [0, 1], got {t}")
    return bezier_points(np.asarray(theta, dtype=np.float64), np.array([t]))[0, 0]


def sample_trajectory(theta: Sequence[float], T: int = DEFAULT_SAMPLES) -> Trajectory:
    """Sample the curve at t = j/T for j = 0..T."""
    if T < 2:
        raise ValueError(f"T must be at least 2, got {T}")
    ts = np.arange(T + 1) / T
    return Trajectory(bezier_points(np.asarray(theta, dtype=np.float64), ts)[0])


def bezier_fit(trajectory: Trajectory) -> np.ndarray:
    """
    Least-squares control point of a trajectory sampled at t_j = j/T.

    Raises:
        ValueError: if the endpoints are not p_init and p_f.
    """
    points = trajectory.points
    if np.max(np.abs(points[0] - P_INIT)) > _ENDPOINT_TOLERANCE or np.max(
        np.abs(points[-1] - P_F)
    ) > _ENDPOINT_TOLERANCE:
        raise ValueError("Trajectory endpoints do not match p_init and p_f")
    ts = np.arange(len(points)) / trajectory.steps
    w = 2.0 * (1.0 - ts) * ts
    residual = points - ((1.0 - ts) ** 2)[:, None] * P_INIT - (ts**2)[:, None] * P_F
    return (w[:, None] * residual).sum(axis=0) / np.sum(w**2)


def relevant_kinds(user_type: UserType) -> Tuple[ObjectKind, ...]:
    """Object kinds a user type keeps its distance from."""
    if user_type == UserType.CAREFUL:
        return tuple(ObjectKind)
    if user_type == UserType.NORMAL:
        return (ObjectKind.GLASS,)
    return ()


def oracle_validity_batch(
    scene: Scene,
    thetas: np.ndarray,
    user_type: UserType,
    samples: int = DENSE_SAMPLES,
) -> np.ndarray:
    """Ground-truth validity for many control points at once."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    user_type = UserType(user_type)
    if user_type == UserType.AGGRESSIVE:
        return np.ones(len(thetas), dtype=bool)
    kinds = relevant_kinds(user_type)
    footprints = [obj.footprint for obj in scene.objects if obj.kind in kinds]
    return min_clearance(thetas, footprints, samples) >= CLEARANCE_DELTA


def oracle_validity(scene: Scene, theta: Sequence[float], user_type: UserType) -> bool:
    """
    Whether a control point satisfies a user type in a scene.

    Aggressive users accept everything; careful users keep CLEARANCE_DELTA from
    every object, normal users only from glasses.
    """
    return bool(oracle_validity_batch(scene, theta, user_type)[0])


def synthesize_demonstrations(
    scene: Scene, user_type: UserType, count: int, seed: int
) -> List[Demonstration]:
    """
    Draw labelled demonstrations by rejection sampling control points.

    Careful and normal users get ceil(count/2) valid and floor(count/2)
    invalid demonstrations; aggressive users only valid ones.

    Raises:
        SynthesisFailure: if 10000 samples cannot fill a label bucket.
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    user_type = UserType(user_type)
    rng = np.random.default_rng([seed, USER_TYPES.index(user_type)])

    if user_type == UserType.AGGRESSIVE:
        thetas = rng.uniform(0.0, 1.0, size=(count, 2))
        return [
            Demonstration(scene_ref=scene, theta=tuple(t), user_type=user_type, valid=True)
            for t in thetas.tolist()
        ]

    wanted = {True: math.ceil(count / 2), False: count // 2}
    demos: List[Demonstration] = []
    drawn = 0
    while wanted[True] or wanted[False]:
        if drawn >= MAX_SYNTHESIS_SAMPLES:
            raise SynthesisFailure(
                f"Could not fill {user_type.value} demonstrations for scene "
                f"seed={scene.seed}: missing {wanted[True]} valid, {wanted[False]} invalid"
            )
        chunk = rng.uniform(0.0, 1.0, size=(_SYNTHESIS_CHUNK, 2))
        labels = oracle_validity_batch(scene, chunk, user_type)
        for theta, label in zip(chunk.tolist(), labels.tolist()):
            drawn += 1
            if wanted[label]:
                wanted[label] -= 1
                demos.append(
                    Demonstration(
                        scene_ref=scene, theta=tuple(theta), user_type=user_type, valid=label
                    )
                )
            if drawn >= MAX_SYNTHESIS_SAMPLES:
                break

    logger.debug(
        f"Synthesized {len(demos)} {user_type.value} demonstrations from {drawn} samples"
    )
    return demos


class DemonstrationRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    theta: Tuple[float, float] = Field(description="Free Bezier control point")
    valid: bool = Field(description="Oracle label for the user type of the file")


class DemonstrationsFile(BaseModel):
    """On-disk layout of demos.json: one scene, one user type."""

    model_config = ConfigDict(extra="forbid")

    version: Literal[1] = Field(default=1, description="File schema version")
    user_type: UserType = Field(description="Demonstrator type every label refers to")
    scene_path: str = Field(description="Scene directory relative to the data root")
    demos: List[DemonstrationRecord] = Field(description="Labelled control points")


def save_demonstrations(
    demos: Sequence[Demonstration], path: Path, scene_path: str
) -> None:
    """Write demos.json for one scene and one user type."""
    if not demos:
        raise ValueError("No demonstrations to save")
    user_types = {d.user_type for d in demos}
    if len(user_types) != 1:
        raise ValueError("All demonstrations in a file must share a user type")
    record = DemonstrationsFile(
        user_type=demos[0].user_type,
        scene_path=scene_path,
        demos=[DemonstrationRecord(theta=d.theta, valid=d.valid) for d in demos],
    )
    Path(path).write_text(record.model_dump_json(indent=2) + "\n")


def load_demonstrations(path: Path, scene: Scene) -> List[Demonstration]:
    """Read demos.json, binding every record to the already loaded scene."""
    path = Path(path)
    try:
        record = DemonstrationsFile.model_validate_json(path.read_text())
    except ValidationError as e:
        raise SchemaError(f"{path} is not a demonstration file: {e}") from e
    return [
        Demonstration(
            scene_ref=scene, theta=d.theta, user_type=record.user_type, valid=d.valid
        )
        for d in record.demos
    ]
