"""
Training fan-out: one checkpoint per (user type, ablation, seed).
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

import pandas as pd
from loguru import logger

from src.cli.dataset import flatten, load_demos
from src.config import Ablation, ExperimentConfig
from src.scene import Split
from src.specmodel import SpecModel, load_checkpoint, save_checkpoint, train
from src.trajectory import UserType

LOG_COLUMNS = [
    "user_type",
    "ablation",
    "seed",
    "epoch",
    "alpha",
    "beta",
    "gamma",
    "recon",
    "kl",
    "cls",
    "weighted_recon",
    "weighted_kl",
    "weighted_cls",
    "total",
    "train_accuracy",
]


@dataclass(frozen=True)
class TrainJob:
    user_type: UserType
    ablation: Ablation
    seed: int

    @property
    def key(self):
        return (self.user_type.value, self.ablation.value, self.seed)


def checkpoint_dir(ckpt_root: Path, user_type: UserType, ablation: Ablation, seed: int) -> Path:
    return (
        Path(ckpt_root)
        / UserType(user_type).value
        / Ablation(ablation).value
        / f"seed_{seed}"
    )


def _run_job(
    job: TrainJob, config: ExperimentConfig, data_dir: Path, out_dir: Path, resume: bool
) -> List[Dict]:
    directory = checkpoint_dir(out_dir, job.user_type, job.ablation, job.seed)
    log_path = directory / "log.csv"
    alpha, beta, gamma = config.coefficients(job.ablation)

    frames = []
    optimizer = None
    if resume and (directory / "model.json").exists():
        model, optimizer = load_checkpoint(directory)
        if log_path.exists():
            previous = pd.read_csv(log_path, float_precision="round_trip")
            frames.append(previous[previous["epoch"] <= model.epoch])
        logger.info(f"Resuming {job.key} from epoch {model.epoch}")
    else:
        model = SpecModel(
            job.user_type,
            alpha=alpha,
            beta=beta,
            gamma=gamma,
            image_size=config.image_size,
            seed=job.seed,
        )

    dataset = flatten(load_demos(data_dir, Split.TRAIN, job.user_type))
    remaining = max(config.epochs - model.epoch, 0)
    log = train(
        model,
        dataset,
        remaining,
        batch_size=config.batch_size,
        seed=job.seed,
        lr=config.lr,
        optimizer=optimizer,
    )
    save_checkpoint(model, directory, log.optimizer)

    rows = [
        {
            "user_type": job.user_type.value,
            "ablation": job.ablation.value,
            "seed": job.seed,
            "epoch": r.epoch,
            "alpha": model.alpha,
            "beta": model.beta,
            "gamma": model.gamma,
            "recon": r.recon,
            "kl": r.kl,
            "cls": r.cls,
            "weighted_recon": model.alpha * r.recon,
            "weighted_kl": model.beta * r.kl,
            "weighted_cls": model.gamma * r.cls,
            "total": r.total,
            "train_accuracy": r.train_accuracy,
        }
        for r in log.epochs
    ]
    frames.append(pd.DataFrame(rows, columns=LOG_COLUMNS))
    frame = pd.concat(frames, ignore_index=True)
    frame.to_csv(log_path, index=False)
    logger.info(
        f"Trained {job.user_type.value}/{job.ablation.value}/seed {job.seed} "
        f"to epoch {model.epoch}"
    )
    return frame.to_dict("records")


def cmd_train(
    config: ExperimentConfig, data_dir: Path, out_dir: Path, resume: bool = False
) -> pd.DataFrame:
    """
    Train every (user type, ablation, seed) model and merge their logs into
    training_log.csv.
    """
    out_dir = Path(out_dir)
    jobs = sorted(
        (
            TrainJob(user_type, ablation, seed)
            for user_type in config.user_types
            for ablation in config.ablations
            for seed in config.seeds
        ),
        key=lambda j: j.key,
    )
    logger.info(f"Training {len(jobs)} models with {config.jobs} worker(s)")

    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            futures = [
                pool.submit(_run_job, job, config, data_dir, out_dir, resume) for job in jobs
            ]
            results = [f.result() for f in futures]
    else:
        results = [_run_job(job, config, data_dir, out_dir, resume) for job in jobs]

    frame = pd.DataFrame([row for rows in results for row in rows], columns=LOG_COLUMNS)
    frame = frame.sort_values(["user_type", "ablation", "seed", "epoch"], kind="stable")
    out_dir.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out_dir / "training_log.csv", index=False)
    return frame.reset_index(drop=True)


def load_models(ckpt_dir: Path, ablation: Ablation, seed: int) -> Dict[UserType, SpecModel]:
    """Every user type's checkpoint for one (ablation, seed) that exists on disk."""
    models = {}
    for user_type in UserType:
        directory = checkpoint_dir(ckpt_dir, user_type, ablation, seed)
        if (directory / "model.json").exists():
            models[user_type], _ = load_checkpoint(directory)
    return models
