"""
Accuracy versus demonstrations per scene, for every model variant.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger

from src.cli.dataset import flatten, load_demos
from src.cli.train import checkpoint_dir
from src.config import Ablation, ExperimentConfig
from src.irl_baseline import irl_score, save_reward_model, train_irl
from src.plots import plot_accuracy_curve
from src.scene import Split
from src.specmodel import (
    SpecModel,
    dataset_arrays,
    load_checkpoint,
    predict_validity_batch,
    train,
)
from src.trajectory import Demonstration, UserType

IRL_VARIANT = "irl"
CURVE_COLUMNS = [
    "user_type",
    "variant",
    "k",
    "mean",
    "q1",
    "q3",
    "mean_outside_iqr",
    "runs",
]


@dataclass(frozen=True)
class EvalJob:
    user_type: UserType
    variant: str
    k: int
    seed: int

    @property
    def key(self):
        return (self.user_type.value, self.variant, self.k, self.seed)


def irl_checkpoint_dir(out_dir: Path, user_type: UserType, k: int, seed: int) -> Path:
    return Path(out_dir) / IRL_VARIANT / UserType(user_type).value / f"k_{k}" / f"seed_{seed}"


def spec_accuracy(model: SpecModel, demos: Sequence[Demonstration]) -> float:
    """Share of demonstrations whose thresholded prediction matches the label."""
    images, scene_idx, thetas, labels = dataset_arrays(demos, model.image_size)
    predicted = np.empty(len(demos), dtype=bool)
    for i, image in enumerate(images):
        rows = scene_idx == i
        predicted[rows] = predict_validity_batch(model, image, thetas[rows]) >= 0.5
    return float(np.mean(predicted == (labels >= 0.5)))


def irl_accuracy(model, demos: Sequence[Demonstration]) -> float:
    images, scene_idx, thetas, labels = dataset_arrays(demos, model.image_size)
    predicted = np.array(
        [irl_score(model, images[i], theta) >= 0.5 for i, theta in zip(scene_idx, thetas)]
    )
    return float(np.mean(predicted == (labels >= 0.5)))



def _run_job(job: EvalJob, config: ExperimentConfig, data_dir: Path, out_dir: Path) -> Dict:
    train_set = flatten(
        load_demos(data_dir, Split.TRAIN, job.user_type, per_scene=job.k, seed=job.seed)
    )
    test_set = flatten(load_demos(data_dir, Split.TEST, job.user_type))

    if job.variant == IRL_VARIANT:
        model = train_irl(
            train_set,
            epochs=config.irl_epochs,
            seed=job.seed,
            lr=config.irl_lr,
            batch_size=config.batch_size,
            image_size=config.image_size,
        )
        save_reward_model(model, irl_checkpoint_dir(out_dir, job.user_type, job.k, job.seed))
        accuracy = irl_accuracy(model, test_set)
    else:
        alpha, beta, gamma = config.coefficients(Ablation(job.variant))
        model = SpecModel(
            job.user_type,
            alpha=alpha,
            beta=beta,
            gamma=gamma,
            image_size=config.image_size,
            seed=job.seed,
        )
        train(model, train_set, config.epochs, config.batch_size, job.seed, config.lr)
        accuracy = spec_accuracy(model, test_set)

    logger.debug(f"{job.key}: held-out accuracy {accuracy:.3f}")
    return {
        "user_type": job.user_type.value,
        "variant": job.variant,
        "k": job.k,
        "seed": job.seed,
        "accuracy": accuracy,
    }


def summarize(runs: pd.DataFrame) -> pd.DataFrame:
    """
    Mean and quartiles over seeds for each (user type, variant, k).

    q1 and q3 are the plain 25th and 75th percentiles; mean_outside_iqr marks
    cells where a skewed sample puts the mean outside them.
    """
    rows = []
    for (user_type, variant, k), group in runs.groupby(["user_type", "variant", "k"], sort=True):
        values = group["accuracy"].to_numpy()
        mean = round(float(values.mean()), 6)
        q1, q3 = (round(float(q), 6) for q in np.percentile(values, [25, 75]))
        rows.append(
            {
                "user_type": user_type,
                "variant": variant,
                "k": int(k),
                "mean": mean,
                "q1": q1,
                "q3": q3,
                "mean_outside_iqr": not q1 <= mean <= q3,
                "runs": len(values),
            }
        )
    return pd.DataFrame(rows, columns=CURVE_COLUMNS)


def checkpoint_accuracy(
    config: ExperimentConfig, data_dir: Path, ckpt_dir: Path
) -> pd.DataFrame:
    """Held-out accuracy of every trained checkpoint found under ckpt_dir."""
    rows = []
    for user_type in config.user_types:
        test_set = None
        for ablation in config.ablations:
            for seed in config.seeds:
                directory = checkpoint_dir(ckpt_dir, user_type, ablation, seed)
                if not (directory / "model.json").exists():
                    continue
                if test_set is None:
                    test_set = flatten(load_demos(data_dir, Split.TEST, user_type))
                model, _ = load_checkpoint(directory)
                rows.append(
                    {
                        "user_type": user_type.value,
                        "ablation": ablation.value,
                        "seed": seed,
                        "epoch": model.epoch,
                        "accuracy": round(spec_accuracy(model, test_set), 6),
                    }
                )
    return pd.DataFrame(rows, columns=["user_type", "ablation", "seed", "epoch", "accuracy"])


def cmd_eval(
    config: ExperimentConfig,
    data_dir: Path,
    out_dir: Path,
    ckpt_dir: Optional[Path] = None,
) -> pd.DataFrame:
    """
    Retrain every variant on k demonstrations per scene, for every k and seed,
    and write accuracy_runs.csv, accuracy_curve.csv and accuracy_curve.svg.
    Trained IRL reward models are kept under irl/<user type>/k_<k>/seed_<seed>.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    variants = [a.value for a in config.ablations] + [IRL_VARIANT]
    jobs = sorted(
        (
            EvalJob(user_type, variant, k, seed)
            for user_type in config.eval_user_types
            for variant in variants
            for k in config.trajectories_per_scene
            for seed in config.seeds
        ),
        key=lambda j: j.key,
    )
    logger.info(f"Evaluating {len(jobs)} training runs with {config.jobs} worker(s)")

    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results: List[Dict] = list(
                pool.map(
                    _run_job,
                    jobs,
                    [config] * len(jobs),
                    [data_dir] * len(jobs),
                    [out_dir] * len(jobs),
                )
            )
    else:
        results = [_run_job(job, config, data_dir, out_dir) for job in jobs]

    runs = pd.DataFrame(results, columns=["user_type", "variant", "k", "seed", "accuracy"])
    runs.to_csv(out_dir / "accuracy_runs.csv", index=False)
    curve = summarize(runs)
    curve.to_csv(out_dir / "accuracy_curve.csv", index=False)
    plot_accuracy_curve(curve, out_dir / "accuracy_curve.svg")

    if ckpt_dir is not None:
        checkpoint_accuracy(config, data_dir, ckpt_dir).to_csv(
            out_dir / "checkpoint_accuracy.csv", index=False
        )
    logger.info(f"Wrote accuracy curve for {len(curve)} (type, variant, k) cells to {out_dir}")
    return curve
