"""
Patch-reward baseline: a per-point reward r_s(p, I) read from the image
window around each trajectory sample, scored by a logistic model.
"""

import json
from pathlib import Path
from typing import List, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, ValidationError

from src import diffnet as dn
from src.diffnet import ParamStore, Tape, Tensor
from src.exceptions import SchemaError, ShapeError
from src.scene import BACKGROUND, IMAGE_SIZE
from src.specmodel import dataset_arrays
from src.trajectory import DEFAULT_SAMPLES, Demonstration, UserType, sample_trajectory

PATCH = 9
FEATURES = PATCH * PATCH * 3
DEFAULT_EPOCHS = 200
DEFAULT_LR = 1e-2


class RewardModel:
    """Logistic weights over one flattened 9x9 RGB patch, plus a bias."""

    def __init__(self, user_type: UserType, image_size: int = IMAGE_SIZE, seed: int = 0):
        self.user_type = UserType(user_type)
        self.image_size = image_size
        self.params = ParamStore()
        rng = np.random.default_rng(seed)
        self.params.add("reward.W", rng.standard_normal((FEATURES, 1)) * 0.01)
        self.params.add("reward.b", np.zeros(1))
        self.history: List[float] = []

    def score(self, tape, features: np.ndarray, trainable: bool = False) -> Tensor:
        W, b = self.params["reward.W"], self.params["reward.b"]
        if not trainable:
            W, b = Tensor(W.data, requires_grad=False), Tensor(b.data, requires_grad=False)
        return dn.dense(tape, dn.constant(features), W, b)


def _pixel_index(coords: np.ndarray, size: int) -> np.ndarray:
    return np.clip(np.floor(coords * size).astype(int), 0, size - 1)


def patch_features(
    image: np.ndarray, theta: Sequence[float], T: int = DEFAULT_SAMPLES
) -> np.ndarray:
    """
    Mean 9x9 patch over the T+1 trajectory samples.

    The image is padded with the background colour so every window is full.
    Since the per-point reward is linear in the patch, the mean reward along
    the trajectory equals the reward of this mean patch.
    """
    image = np.asarray(image, dtype=np.float64)
    size = image.shape[0]
    if image.shape != (size, size, 3):
        raise ShapeError(f"Expected a square RGB image, got {image.shape}")
    half = PATCH // 2
    padded = np.empty((size + 2 * half, size + 2 * half, 3))
    padded[...] = BACKGROUND
    padded[half : half + size, half : half + size] = image

    points = sample_trajectory(theta, T).points
    cols = _pixel_index(points[:, 0], size)
    rows = _pixel_index(1.0 - points[:, 1], size)
    offsets = np.arange(PATCH)
    patches = padded[
        (rows[:, None] + offsets)[:, :, None], (cols[:, None] + offsets)[:, None, :]
    ]
    return patches.mean(axis=0).ravel()


def _feature_matrix(dataset: Sequence[Demonstration], image_size: int) -> np.ndarray:
    images, scene_idx, thetas, _ = dataset_arrays(dataset, image_size)
    return np.stack(
        [patch_features(images[i], theta) for i, theta in zip(scene_idx, thetas)]
    )


def train_irl(
    dataset: Sequence[Demonstration],
    epochs: int = DEFAULT_EPOCHS,
    seed: int = 0,
    lr: float = DEFAULT_LR,
    batch_size: int = 32,
    image_size: int = IMAGE_SIZE,
) -> RewardModel:
    """
    Fit the patch reward so that sigmoid(mean reward) predicts the label.

    Returns:
        The trained model; model.history holds the mean loss of each epoch.
    """
    if not dataset:
        raise ValueError("Cannot train on an empty dataset")
    user_types = {d.user_type for d in dataset}
    if len(user_types) != 1:
        raise ValueError("All demonstrations must share a user type")

    model = RewardModel(user_types.pop(), image_size, seed)
    features = _feature_matrix(dataset, image_size)
    labels = np.array([[float(d.valid)] for d in dataset])
    state = dn.adam_state(model.params, lr=lr)

    for epoch in range(1, epochs + 1):
        rng = np.random.default_rng([seed, epoch])
        order = rng.permutation(len(dataset))
        total = 0.0
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            tape = Tape()
            pred = dn.sigmoid(tape, model.score(tape, features[batch], trainable=True))
            loss = dn.bce(tape, pred, labels[batch])
            tape.backward(loss)
            dn.adam_step(model.params, state)
            total += loss.item() * len(batch)
        model.history.append(total / len(dataset))

    logger.debug(
        f"IRL {model.user_type.value}: loss {model.history[0]:.4f} -> {model.history[-1]:.4f}"
    )
    return model


def irl_score(model: RewardModel, scene_image: np.ndarray, theta: Sequence[float]) -> float:
    features = patch_features(scene_image, theta)[None]
    return float(dn.sigmoid(None, model.score(None, features)).data[0, 0])


def classify_irl(model: RewardModel, scene_image: np.ndarray, theta: Sequence[float]) -> bool:
    return irl_score(model, scene_image, theta) >= 0.5


class RewardSidecar(BaseModel):
    kind: str = Field(default="irl", pattern="^irl$")
    user_type: UserType
    image_size: int = Field(default=IMAGE_SIZE)
    epochs: int = Field(default=0, ge=0)


def save_reward_model(model: RewardModel, directory: Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    model.params.save(directory / "reward.spc")
    sidecar = RewardSidecar(
        user_type=model.user_type, image_size=model.image_size, epochs=len(model.history)
    )
    (directory / "reward.json").write_text(sidecar.model_dump_json(indent=2) + "\n")


def load_reward_model(directory: Path) -> RewardModel:
    directory = Path(directory)
    try:
        sidecar = RewardSidecar.model_validate(
            json.loads((directory / "reward.json").read_text())
        )
    except (json.JSONDecodeError, ValidationError) as e:
        raise SchemaError(f"{directory / 'reward.json'} is not an IRL sidecar: {e}") from e
    model = RewardModel(sidecar.user_type, sidecar.image_size)
    model.params.load_values(ParamStore.load(directory / "reward.spc"))
    return model
