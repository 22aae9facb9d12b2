"""
On-disk dataset layout shared by the subcommands.

    <data>/manifest.json
    <data>/<split>/scene_<index>/scene.json, scene.png, demos_<user type>.json
"""

import json
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from src.exceptions import SchemaError
from src.scene import Scene, Split, scene_from_files
from src.trajectory import Demonstration, UserType, load_demonstrations

MANIFEST_VERSION = 1


class SceneEntry(BaseModel):
    split: Split
    index: int = Field(ge=0)
    seed: int = Field(ge=0, lt=2**64)
    path: str = Field(description="Scene directory relative to the dataset root")


class DatasetManifest(BaseModel):
    version: int = MANIFEST_VERSION
    seed: int = Field(description="Run seed every scene seed was derived from")
    user_types: List[UserType]
    demos_per_scene: Dict[Split, int]
    scenes: List[SceneEntry]


def scene_seed(seed: int, split: Split, index: int) -> int:
    """Independent 64-bit seed for one scene of a split."""
    split_code = list(Split).index(Split(split))
    state = np.random.SeedSequence([seed, split_code, index]).generate_state(2, np.uint64)
    return int(state[0])


def scene_dir(root: Path, split: Split, index: int) -> Path:
    return Path(root) / Split(split).value / f"scene_{index:03d}"


def demos_path(directory: Path, user_type: UserType) -> Path:
    return Path(directory) / f"demos_{UserType(user_type).value}.json"


def load_manifest(data_dir: Path) -> DatasetManifest:
    path = Path(data_dir) / "manifest.json"
    try:
        manifest = DatasetManifest.model_validate(json.loads(path.read_text()))
    except (json.JSONDecodeError, ValidationError) as e:
        raise SchemaError(f"{path} is not a dataset manifest: {e}") from e
    if manifest.version != MANIFEST_VERSION:
        raise SchemaError(f"{path} has unsupported version {manifest.version}")
    return manifest


def load_scenes(data_dir: Path, split: Split) -> List[Tuple[Path, Scene]]:
    """Scene directories of a split in manifest order, with their scenes."""
    manifest = load_manifest(data_dir)
    entries = sorted(
        (e for e in manifest.scenes if e.split == Split(split)), key=lambda e: e.index
    )
    return [
        (Path(data_dir) / e.path, scene_from_files(Path(data_dir) / e.path)) for e in entries
    ]


def load_demos(
    data_dir: Path,
    split: Split,
    user_type: UserType,
    per_scene: Optional[int] = None,
    seed: Optional[int] = None,
) -> List[List[Demonstration]]:
    """
    Demonstrations of one user type, grouped by scene.

    Args:
        per_scene: keep only this many demonstrations per scene
        seed: draw the kept subset at random from (seed, per_scene, scene index);
            without a seed the first per_scene demonstrations are kept
    """
    grouped = []
    for index, (directory, scene) in enumerate(load_scenes(data_dir, split)):
        demos = load_demonstrations(demos_path(directory, user_type), scene)
        if per_scene is not None and per_scene < len(demos):
            if seed is None:
                demos = demos[:per_scene]
            else:
                rng = np.random.default_rng([seed, per_scene, index])
                keep = np.sort(rng.choice(len(demos), size=per_scene, replace=False))
                demos = [demos[i] for i in keep]
        grouped.append(demos)
    return grouped


def flatten(grouped: List[List[Demonstration]]) -> List[Demonstration]:
    return [demo for demos in grouped for demo in demos]
