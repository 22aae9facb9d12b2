from pathlib import Path

from loguru import logger

from src.cli.dataset import (
    DatasetManifest,
    SceneEntry,
    demos_path,
    scene_dir,
    scene_seed,
)
from src.config import ExperimentConfig
from src.exceptions import SynthesisFailure
from src.scene import Split, generate_scene, scene_to_files
from src.trajectory import oracle_validity, save_demonstrations, synthesize_demonstrations


def cmd_generate(config: ExperimentConfig, out_dir: Path) -> DatasetManifest:
    """
    Write train and test scenes with per-type demonstrations.

    Every label is checked against the oracle once more before it is saved.
    """
    out_dir = Path(out_dir)
    counts = {
        Split.TRAIN: (config.scenes_train, config.train_trajectories_per_scene),
        Split.TEST: (config.scenes_test, config.test_trajectories_per_scene),
    }
    entries = []
    for split, (n_scenes, per_scene) in counts.items():
        for index in range(n_scenes):
            seed = scene_seed(config.seed, split, index)
            scene = generate_scene(seed, split)
            directory = scene_dir(out_dir, split, index)
            scene_to_files(scene, directory)
            relative = directory.relative_to(out_dir).as_posix()

            for user_type in config.user_types:
                demos = synthesize_demonstrations(scene, user_type, per_scene, seed)
                mislabeled = [
                    d for d in demos if oracle_validity(scene, d.theta, user_type) != d.valid
                ]
                if mislabeled:
                    raise SynthesisFailure(
                        f"{len(mislabeled)} {user_type.value} labels in {relative} "
                        f"disagree with the oracle"
                    )
                save_demonstrations(demos, demos_path(directory, user_type), relative)

            entries.append(SceneEntry(split=split, index=index, seed=seed, path=relative))
            logger.debug(f"Generated {relative} with {len(scene.objects)} objects")

    manifest = DatasetManifest(
        seed=config.seed,
        user_types=config.user_types,
        demos_per_scene={split: per_scene for split, (_, per_scene) in counts.items()},
        scenes=entries,
    )
    (out_dir / "manifest.json").write_text(manifest.model_dump_json(indent=2) + "\n")
    logger.info(
        f"Generated {config.scenes_train} train and {config.scenes_test} test scenes in {out_dir}"
    )
    return manifest
