from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from src.cli.dataset import load_scenes
from src.cli.train import load_models
from src.config import Ablation, ExperimentConfig
from src.plots import plot_refinement_trace
from src.refine import evaluate_refinement, save_trace
from src.scene import Split, render_scene
from src.specmodel import latent_grid_sample, theta_lattice


def _write_latent_grids(models, scenes, grid_n: int, out_dir: Path) -> None:
    axis = theta_lattice(grid_n)
    xs, ys = np.meshgrid(axis, axis, indexing="xy")
    for user_type, model in models.items():
        for index, (_, scene) in enumerate(scenes):
            grid = latent_grid_sample(model, render_scene(scene, model.image_size), grid_n)
            frame = pd.DataFrame(
                {
                    "theta_x": xs.ravel().round(6),
                    "theta_y": ys.ravel().round(6),
                    "score": grid.ravel().round(6),
                }
            )
            path = out_dir / "latent_grid" / f"{user_type.value}_scene_{index:03d}.csv"
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(path, index=False)


def cmd_refine(
    config: ExperimentConfig, ckpt_dir: Path, data_dir: Path, out_dir: Path
) -> pd.DataFrame:
    """
    Refinement success per user type on the test split, one trace file and
    overlay per refinement, and the latent validity grid of every test scene.
    """
    out_dir = Path(out_dir)
    models = load_models(ckpt_dir, Ablation.FULL, config.seed)
    if not models:
        raise FileNotFoundError(f"No full-model checkpoints for seed {config.seed} in {ckpt_dir}")
    scenes = load_scenes(data_dir, Split.TEST)

    result = evaluate_refinement(
        models,
        [scene for _, scene in scenes],
        config.refine_trials_per_scene,
        config.seed,
        max_steps=config.refine_max_steps,
        step_size=config.refine_step_size,
    )

    trace_dir = out_dir / "traces"
    trace_dir.mkdir(parents=True, exist_ok=True)
    for record in result.traces:
        directory, scene = scenes[record.scene_index]
        stem = f"{record.user_type.value}_scene_{record.scene_index:03d}_trial_{record.trial}"
        scene_path = directory.relative_to(Path(data_dir)).as_posix()
        save_trace(record.trace, trace_dir / f"{stem}.json", scene_path, record.user_type)
        outcome = "valid" if record.trace.final_valid_oracle else "failed"
        plot_refinement_trace(
            render_scene(scene),
            record.trace.step_thetas,
            record.trace.scores,
            trace_dir / f"{stem}.svg",
            title=f"{record.user_type.value}, {outcome}",
        )

    _write_latent_grids(models, scenes, config.latent_grid_n, out_dir)

    frame = pd.DataFrame([row.model_dump(mode="json") for row in result.rows])
    frame["success_rate"] = frame["success_rate"].round(6)
    frame.to_csv(out_dir / "refinement.csv", index=False)
    logger.info(f"Wrote refinement results for {len(frame)} user types to {out_dir}")
    return frame
