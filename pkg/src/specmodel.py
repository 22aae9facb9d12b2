"""
Specification model: a convolutional beta-VAE over the scene image whose
latent code, joined with the trajectory control point, feeds a validity
classifier. One model is trained per user type.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, ValidationError

from src import diffnet as dn
from src.diffnet import OptimizerState, ParamStore, Tape, Tensor
from src.exceptions import SchemaError, ShapeError
from src.scene import IMAGE_SIZE, render_scene
from src.trajectory import Demonstration, UserType

LATENT_DIM = 15
THETA_DIM = 2
ENCODER_CHANNELS = (16, 8, 4)
DECODER_CHANNELS = (8, 16, 3)
CLASSIFIER_HIDDEN = (64, 32)

DEFAULT_ALPHA = 1.0
DEFAULT_BETA = 4.0
DEFAULT_GAMMA = 10.0
DEFAULT_LR = 1e-3


def _halve(size: int) -> int:
    return (size - 1) // 2 + 1


class LossBreakdown(BaseModel):
    recon: float = Field(ge=0, description="Per-pixel BCE, summed per image")
    kl: float = Field(ge=0, description="KL of the posterior from the unit Gaussian")
    cls: float = Field(ge=0, description="Validity BCE")
    total: float = Field(description="alpha*recon + beta*kl + gamma*cls")


class EpochRecord(BaseModel):
    epoch: int = Field(description="1-based epoch index over the model's lifetime")
    recon: float
    kl: float
    cls: float
    total: float
    train_accuracy: float = Field(ge=0, le=1)


@dataclass
class TrainingLog:
    epochs: List[EpochRecord]
    optimizer: OptimizerState


@dataclass
class LatentCode:
    """Scene latent (with its posterior) and, once attached, the control point."""

    z_I: np.ndarray
    mu: np.ndarray
    logvar: np.ndarray
    z_theta: Optional[np.ndarray] = None

    @property
    def z(self) -> np.ndarray:
        if self.z_theta is None:
            raise ValueError("z_theta has not been set on this latent code")
        return np.concatenate([self.z_I, self.z_theta])

    def with_theta(self, theta: Sequence[float]) -> "LatentCode":
        return LatentCode(self.z_I, self.mu, self.logvar, np.asarray(theta, dtype=float))


class SpecModel:
    """Encoder, decoder and classifier parameters for one user type."""

    def __init__(
        self,
        user_type: UserType,
        alpha: float = DEFAULT_ALPHA,
        beta: float = DEFAULT_BETA,
        gamma: float = DEFAULT_GAMMA,
        image_size: int = IMAGE_SIZE,
        seed: int = 0,
    ):
        self.user_type = UserType(user_type)
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.image_size = image_size
        self.seed = seed
        self.epoch = 0

        sizes = [image_size]
        for _ in ENCODER_CHANNELS:
            sizes.append(_halve(sizes[-1]))
        self.feature_size = sizes[-1]
        self.flat_dim = ENCODER_CHANNELS[-1] * self.feature_size**2

        self.params = self._init_params(np.random.default_rng(seed))
        self.init_checksum = self.params.checksum()

    def _init_params(self, rng: np.random.Generator) -> ParamStore:
        store = ParamStore()

        def he(shape, fan_in, scale=1.0):
            return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in) * scale

        channels = (3, *ENCODER_CHANNELS)
        for i, (c_in, c_out) in enumerate(zip(channels, channels[1:]), start=1):
            store.add(f"encoder.conv{i}.k", he((c_out, c_in, 3, 3), c_in * 9))
        store.add("encoder.head.W", he((self.flat_dim, 2 * LATENT_DIM), self.flat_dim, 0.1))
        store.add("encoder.head.b", np.zeros(2 * LATENT_DIM))

        store.add("decoder.dense.W", he((LATENT_DIM, self.flat_dim), LATENT_DIM))
        store.add("decoder.dense.b", np.zeros(self.flat_dim))
        channels = (ENCODER_CHANNELS[-1], *DECODER_CHANNELS)
        for i, (c_in, c_out) in enumerate(zip(channels, channels[1:]), start=1):
            store.add(f"decoder.deconv{i}.k", he((c_in, c_out, 3, 3), c_in * 9 / 4))

        widths = (LATENT_DIM + THETA_DIM, *CLASSIFIER_HIDDEN, 1)
        for i, (w_in, w_out) in enumerate(zip(widths, widths[1:]), start=1):
            store.add(f"classifier.fc{i}.W", he((w_in, w_out), w_in))
            store.add(f"classifier.fc{i}.b", np.zeros(w_out))
        return store

    @property
    def is_trained(self) -> bool:
        return self.params.checksum() != self.init_checksum

    def weights(self, trainable: bool) -> Dict[str, Tensor]:
        """Parameter tensors; frozen copies do not collect gradients."""
        if trainable:
            return {name: tensor for name, tensor in self.params.items()}
        return {
            name: Tensor(tensor.data, requires_grad=False)
            for name, tensor in self.params.items()
        }


def _to_channels_first(images: np.ndarray, size: int) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 3:
        images = images[None]
    if images.shape[1:] != (size, size, 3):
        raise ShapeError(f"Expected images of shape (.., {size}, {size}, 3), got {images.shape}")
    return np.ascontiguousarray(images.transpose(0, 3, 1, 2))


def _encode(
    tape: Optional[Tape], w: Dict[str, Tensor], x: np.ndarray
) -> Tuple[Tensor, Tensor]:
    h = dn.constant(x)
    for i in range(1, len(ENCODER_CHANNELS) + 1):
        h = dn.relu(tape, dn.conv2d(tape, h, w[f"encoder.conv{i}.k"]))
    h = dn.reshape(tape, h, (x.shape[0], -1))
    stats = dn.dense(tape, h, w["encoder.head.W"], w["encoder.head.b"])
    return dn.split(tape, stats, LATENT_DIM)


def _decode(
    tape: Optional[Tape], model: SpecModel, w: Dict[str, Tensor], z_I: Tensor
) -> Tensor:
    h = dn.relu(tape, dn.dense(tape, z_I, w["decoder.dense.W"], w["decoder.dense.b"]))
    size = model.feature_size
    h = dn.reshape(tape, h, (z_I.shape[0], ENCODER_CHANNELS[-1], size, size))
    last = len(DECODER_CHANNELS)
    for i in range(1, last + 1):
        h = dn.deconv2d(tape, h, w[f"decoder.deconv{i}.k"])
        if i < last:
            h = dn.relu(tape, h)
    return dn.center_crop(tape, dn.sigmoid(tape, h), model.image_size)


def _classify(tape: Optional[Tape], w: Dict[str, Tensor], z: Tensor) -> Tensor:
    h = z
    n_layers = len(CLASSIFIER_HIDDEN) + 1
    for i in range(1, n_layers + 1):
        h = dn.dense(tape, h, w[f"classifier.fc{i}.W"], w[f"classifier.fc{i}.b"])
        h = dn.relu(tape, h) if i < n_layers else dn.sigmoid(tape, h)
    return h


def objective(
    tape: Optional[Tape],
    model: SpecModel,
    images: np.ndarray,
    thetas: np.ndarray,
    labels: np.ndarray,
    noise: np.ndarray,
    trainable: bool = True,
) -> Tuple[Tensor, LossBreakdown, np.ndarray]:
    """
    The three-term loss on a batch.

    Returns:
        The total loss tensor, its breakdown and the classifier outputs.
    """
    w = model.weights(trainable)
    x = _to_channels_first(images, model.image_size)
    mu, logvar = _encode(tape, w, x)
    z_I = dn.reparameterize(tape, mu, logvar, noise)

    recon_img = _decode(tape, model, w, z_I)
    recon = dn.bce(tape, recon_img, x, reduce="sample_sum")
    kl = dn.kl_gaussian(tape, mu, logvar)

    z_theta = dn.constant(np.asarray(thetas, dtype=np.float64).reshape(-1, THETA_DIM))
    pred = _classify(tape, w, dn.concat(tape, z_I, z_theta))
    cls = dn.bce(tape, pred, np.asarray(labels, dtype=np.float64).reshape(-1, 1))

    total = dn.weighted_sum(
        tape, [recon, kl, cls], [model.alpha, model.beta, model.gamma]
    )
    breakdown = LossBreakdown(
        recon=recon.item(), kl=kl.item(), cls=cls.item(), total=total.item()
    )
    return total, breakdown, pred.data[:, 0]


def encode(model: SpecModel, image: np.ndarray, noise: np.ndarray) -> LatentCode:
    """Posterior statistics of one image and a reparameterised sample."""
    w = model.weights(trainable=False)
    mu, logvar = _encode(None, w, _to_channels_first(image, model.image_size))
    noise = np.asarray(noise, dtype=np.float64).reshape(mu.shape)
    z_I = dn.reparameterize(None, mu, logvar, noise)
    return LatentCode(z_I.data[0], mu.data[0], logvar.data[0])


def scene_embedding(model: SpecModel, images: np.ndarray) -> np.ndarray:
    """Posterior means for one image (15,) or a batch (B, 15)."""
    images = np.asarray(images)
    w = model.weights(trainable=False)
    mu, _ = _encode(None, w, _to_channels_first(images, model.image_size))
    return mu.data[0] if images.ndim == 3 else mu.data


def decode(model: SpecModel, z_I: np.ndarray) -> np.ndarray:
    """Reconstruct an image of shape (size, size, 3) from a scene latent."""
    w = model.weights(trainable=False)
    z = dn.constant(np.asarray(z_I, dtype=np.float64).reshape(1, LATENT_DIM))
    return _decode(None, model, w, z).data[0].transpose(1, 2, 0)


def classify_batch(model: SpecModel, z: np.ndarray) -> np.ndarray:
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape[1] != LATENT_DIM + THETA_DIM:
        raise ShapeError(f"Classifier input must be {LATENT_DIM + THETA_DIM} wide")
    return _classify(None, model.weights(trainable=False), dn.constant(z)).data[:, 0]


def classify(model: SpecModel, z: np.ndarray) -> float:
    """Validity score in (0, 1) for one 17-dimensional latent."""
    return float(classify_batch(model, z)[0])


def classify_with_grad(model: SpecModel, z: np.ndarray) -> Tuple[float, np.ndarray]:
    """Score and its gradient with respect to the full latent z."""
    z_in = Tensor(np.asarray(z, dtype=np.float64).reshape(1, -1))
    tape = Tape()
    out = _classify(tape, model.weights(trainable=False), z_in)
    tape.backward(out)
    return float(out.data[0, 0]), z_in.grad[0]


def loss(
    model: SpecModel,
    image: np.ndarray,
    theta: Sequence[float],
    v: int,
    noise: np.ndarray,
) -> LossBreakdown:
    if v not in (0, 1):
        raise ValueError(f"Validity label must be 0 or 1, got {v}")
    _, breakdown, _ = objective(
        None,
        model,
        image,
        np.asarray(theta, dtype=np.float64).reshape(1, THETA_DIM),
        np.array([v]),
        np.asarray(noise, dtype=np.float64).reshape(1, LATENT_DIM),
        trainable=False,
    )
    return breakdown


def _scene_key(demo: Demonstration) -> str:
    return demo.scene_ref.model_dump_json()


def dataset_arrays(
    dataset: Sequence[Demonstration], image_size: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Render each distinct scene once.

    Returns:
        (scene images, per-demo scene index, thetas, labels)
    """
    index: Dict[str, int] = {}
    images = []
    scene_idx = np.empty(len(dataset), dtype=np.int64)
    for i, demo in enumerate(dataset):
        key = _scene_key(demo)
        if key not in index:
            index[key] = len(images)
            images.append(render_scene(demo.scene_ref, image_size))
        scene_idx[i] = index[key]
    thetas = np.array([d.theta for d in dataset], dtype=np.float64)
    labels = np.array([float(d.valid) for d in dataset])
    return np.stack(images), scene_idx, thetas, labels


def train(
    model: SpecModel,
    dataset: Sequence[Demonstration],
    epochs: int,
    batch_size: int = 32,
    seed: int = 0,
    lr: float = DEFAULT_LR,
    optimizer: Optional[OptimizerState] = None,
) -> TrainingLog:
    """
    Fit the model with Adam on the mean batch loss.

    Shuffling and reparameterisation noise for an epoch are drawn from
    (seed, epoch), so continuing from a checkpoint with its optimizer state
    replays exactly what an uninterrupted run would have done.
    """
    if not dataset:
        raise ValueError("Cannot train on an empty dataset")
    if any(d.user_type != model.user_type for d in dataset):
        raise ValueError(f"Every demonstration must be {model.user_type.value}")

    images, scene_idx, thetas, labels = dataset_arrays(dataset, model.image_size)
    state = optimizer or dn.adam_state(model.params, lr=lr)
    model.params.zero_grad()
    records: List[EpochRecord] = []

    for _ in range(epochs):
        epoch = model.epoch + 1
        rng = np.random.default_rng([seed, epoch])
        order = rng.permutation(len(dataset))
        sums = np.zeros(4)
        correct = 0
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            noise = rng.standard_normal((len(batch), LATENT_DIM))
            tape = Tape()
            total, parts, pred = objective(
                tape, model, images[scene_idx[batch]], thetas[batch], labels[batch], noise
            )
            tape.backward(total)
            dn.adam_step(model.params, state)

            sums += len(batch) * np.array([parts.recon, parts.kl, parts.cls, parts.total])
            correct += int(np.sum((pred >= 0.5) == (labels[batch] >= 0.5)))

        means = sums / len(dataset)
        record = EpochRecord(
            epoch=epoch,
            recon=means[0],
            kl=means[1],
            cls=means[2],
            total=means[3],
            train_accuracy=correct / len(dataset),
        )
        records.append(record)
        model.epoch = epoch
        logger.debug(
            f"[{model.user_type.value}] epoch {epoch}: total={record.total:.4f} "
            f"cls={record.cls:.4f} acc={record.train_accuracy:.3f}"
        )

    return TrainingLog(records, state)


def predict_validity_batch(
    model: SpecModel, image: np.ndarray, thetas: np.ndarray
) -> np.ndarray:
    """Noise-free validity scores of many control points in one scene."""
    mu = scene_embedding(model, image)
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    z = np.concatenate([np.broadcast_to(mu, (len(thetas), LATENT_DIM)), thetas], axis=1)
    return classify_batch(model, z)


def predict_validity(model: SpecModel, image: np.ndarray, theta: Sequence[float]) -> float:
    """Validity score with z_I set to the posterior mean; threshold at 0.5 for v̂."""
    return float(predict_validity_batch(model, image, theta)[0])


def theta_lattice(grid_n: int) -> np.ndarray:
    """Cell centers of a grid_n x grid_n lattice over the unit square."""
    if grid_n < 1:
        raise ValueError(f"grid_n must be positive, got {grid_n}")
    return (np.arange(grid_n) + 0.5) / grid_n


def latent_grid_sample(model: SpecModel, image: np.ndarray, grid_n: int) -> np.ndarray:
    """
    Validity scores over a lattice of control points.

    Returns:
        Matrix whose entry [i, j] scores theta = (axis[j], axis[i]).
    """
    axis = theta_lattice(grid_n)
    xs, ys = np.meshgrid(axis, axis, indexing="xy")
    thetas = np.stack([xs.ravel(), ys.ravel()], axis=1)
    return predict_validity_batch(model, image, thetas).reshape(grid_n, grid_n)


class CheckpointSidecar(BaseModel):
    user_type: UserType
    alpha: float
    beta: float
    gamma: float
    epoch: int = Field(ge=0)
    seed: int
    image_size: int = Field(default=IMAGE_SIZE)
    init_checksum: str = Field(description="Parameter checksum at initialization")
    optimizer_step: int = Field(default=0)
    lr: float = Field(default=DEFAULT_LR)


def save_checkpoint(
    model: SpecModel, directory: Path, optimizer: Optional[OptimizerState] = None
) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    model.params.save(directory / "model.spc")
    sidecar = CheckpointSidecar(
        user_type=model.user_type,
        alpha=model.alpha,
        beta=model.beta,
        gamma=model.gamma,
        epoch=model.epoch,
        seed=model.seed,
        image_size=model.image_size,
        init_checksum=model.init_checksum,
        optimizer_step=optimizer.step if optimizer else 0,
        lr=optimizer.lr if optimizer else DEFAULT_LR,
    )
    (directory / "model.json").write_text(sidecar.model_dump_json(indent=2) + "\n")
    if optimizer is not None:
        optimizer.moments().save(directory / "optimizer.spc")


def load_checkpoint(directory: Path) -> Tuple[SpecModel, Optional[OptimizerState]]:
    directory = Path(directory)
    try:
        sidecar = CheckpointSidecar.model_validate(
            json.loads((directory / "model.json").read_text())
        )
    except (json.JSONDecodeError, ValidationError) as e:
        raise SchemaError(f"{directory / 'model.json'} is not a checkpoint sidecar: {e}") from e

    model = SpecModel(
        sidecar.user_type,
        alpha=sidecar.alpha,
        beta=sidecar.beta,
        gamma=sidecar.gamma,
        image_size=sidecar.image_size,
        seed=sidecar.seed,
    )
    model.params.load_values(ParamStore.load(directory / "model.spc"))
    model.epoch = sidecar.epoch
    model.init_checksum = sidecar.init_checksum

    optimizer = None
    moments_path = directory / "optimizer.spc"
    if moments_path.exists():
        optimizer = dn.adam_state(model.params, lr=sidecar.lr)
        optimizer.restore_moments(ParamStore.load(moments_path))
        optimizer.step = sidecar.optimizer_step
    return model, optimizer
