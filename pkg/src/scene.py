"""
Synthetic tabletop scenes: generation, rendering, serialization and symbol
augmentation.
"""

import colorsys
from enum import Enum
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from loguru import logger
from PIL import Image as PILImage
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.exceptions import PlacementFailure, SchemaError
from src.geometry import (
    CLEARANCE_DELTA,
    P_F,
    P_INIT,
    Footprint,
    footprint_distance,
    min_clearance,
)

SCHEMA_VERSION = 1
IMAGE_SIZE = 100

MIN_OBJECTS = 2
MAX_OBJECTS = 6
# Random counts stop one short of the maximum so a symbol can still be added.
RANDOM_MAX_OBJECTS = 5

ENDPOINT_MARGIN = 0.08
MAX_PLACEMENT_ATTEMPTS = 1000
MAX_REGENERATIONS = 100
PATH_GRID = 21

TEST_RADIUS_SCALE = 0.9
TEST_HUE_SHIFT = 1.0 / 12.0

RGB = Tuple[float, float, float]


class ObjectKind(str, Enum):
    BOWL = "bowl"
    PLATE = "plate"
    CUTLERY = "cutlery"
    GLASS = "glass"


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


BACKGROUND: RGB = (0.96, 0.96, 0.94)

RADIUS_RANGES: Dict[ObjectKind, Tuple[float, float]] = {
    ObjectKind.PLATE: (0.10, 0.16),
    ObjectKind.BOWL: (0.07, 0.11),
    ObjectKind.GLASS: (0.04, 0.07),
    ObjectKind.CUTLERY: (0.08, 0.12),
}

TRAIN_PALETTE: Dict[ObjectKind, RGB] = {
    ObjectKind.PLATE: (0.75, 0.75, 0.78),
    ObjectKind.BOWL: (0.55, 0.35, 0.20),
    ObjectKind.GLASS: (0.25, 0.45, 0.85),
    ObjectKind.CUTLERY: (0.60, 0.60, 0.62),
}


def _shift_hue(color: RGB, shift: float) -> RGB:
    h, s, v = colorsys.rgb_to_hsv(*color)
    return colorsys.hsv_to_rgb((h + shift) % 1.0, s, v)


TEST_PALETTE: Dict[ObjectKind, RGB] = {
    kind: _shift_hue(color, TEST_HUE_SHIFT) for kind, color in TRAIN_PALETTE.items()
}

_SPLIT_CODE = {Split.TRAIN: 0, Split.TEST: 1}
_AUGMENT_TAG = 0xA06


class SceneObject(BaseModel):
    """One typed, placed object on the table."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ObjectKind = Field(description="Symbol type of the object")
    cx: float = Field(description="Center x in normalized table coordinates")
    cy: float = Field(description="Center y in normalized table coordinates")
    radius: float = Field(
        gt=0, description="Disk radius, or half-length of the long axis for cutlery"
    )
    angle: float = Field(default=0.0, description="Orientation in radians (cutlery)")
    variant: Split = Field(description="Appearance variant the object is drawn with")

    @property
    def footprint(self) -> Footprint:
        return Footprint(
            self.cx, self.cy, self.radius, self.angle, self.kind == ObjectKind.CUTLERY
        )

    @property
    def color(self) -> RGB:
        palette = TRAIN_PALETTE if self.variant == Split.TRAIN else TEST_PALETTE
        return palette[self.kind]


class Scene(BaseModel):
    """A tabletop: its objects plus the seed and split it was drawn for."""

    model_config = ConfigDict(frozen=True)

    objects: List[SceneObject] = Field(default_factory=list)
    seed: int = Field(ge=0, lt=2**64, description="Seed the scene was generated from")
    split: Split = Field(default=Split.TRAIN, description="Train or test split")


def radius_range(kind: ObjectKind, split: Split) -> Tuple[float, float]:
    lo, hi = RADIUS_RANGES[kind]
    if split == Split.TEST:
        return lo * TEST_RADIUS_SCALE, hi * TEST_RADIUS_SCALE
    return lo, hi


def _fits(candidate: SceneObject, existing: List[SceneObject]) -> bool:
    c = np.array([candidate.cx, candidate.cy])
    for endpoint in (P_INIT, P_F):
        if np.linalg.norm(c - endpoint) <= candidate.radius + ENDPOINT_MARGIN:
            return False
    for other in existing:
        if np.hypot(candidate.cx - other.cx, candidate.cy - other.cy) <= (
            candidate.radius + other.radius
        ):
            return False
    return True


def _place_object(
    rng: np.random.Generator,
    kind: ObjectKind,
    split: Split,
    existing: List[SceneObject],
) -> SceneObject:
    lo, hi = radius_range(kind, split)
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        radius = float(rng.uniform(lo, hi))
        cx, cy = rng.uniform(radius, 1.0 - radius, size=2)
        angle = float(rng.uniform(0.0, np.pi)) if kind == ObjectKind.CUTLERY else 0.0
        candidate = SceneObject(
            kind=kind,
            cx=float(cx),
            cy=float(cy),
            radius=radius,
            angle=angle,
            variant=split,
        )
        if _fits(candidate, existing):
            return candidate
    raise PlacementFailure(
        f"Could not place a {kind.value} among {len(existing)} objects "
        f"after {MAX_PLACEMENT_ATTEMPTS} attempts"
    )


def has_careful_path(scene: Scene) -> bool:
    """True when some control point on a 21x21 grid keeps clear of every object."""
    axis = np.linspace(0.0, 1.0, PATH_GRID)
    grid = np.stack(np.meshgrid(axis, axis, indexing="xy"), axis=-1).reshape(-1, 2)
    clear = min_clearance(grid, [obj.footprint for obj in scene.objects])
    return bool(np.any(clear >= CLEARANCE_DELTA))


def generate_scene(
    seed: int, split: Split = Split.TRAIN, object_count: Optional[int] = None
) -> Scene:
    """
    Draw a random scene.

    Args:
        seed: 64-bit unsigned seed
        split: which appearance variant to draw objects with
        object_count: number of objects in [2, 6], or None for a random count

    Returns:
        A Scene satisfying every placement invariant and admitting a careful path.
    """
    if not 0 <= seed < 2**64:
        raise ValueError(f"Seed must be a 64-bit unsigned integer, got {seed}")
    if object_count is not None and not MIN_OBJECTS <= object_count <= MAX_OBJECTS:
        raise ValueError(
            f"object_count must be in [{MIN_OBJECTS}, {MAX_OBJECTS}], got {object_count}"
        )
    split = Split(split)
    rng = np.random.default_rng([seed, _SPLIT_CODE[split]])
    kinds = list(ObjectKind)

    for attempt in range(MAX_REGENERATIONS):
        count = object_count or int(rng.integers(MIN_OBJECTS, RANDOM_MAX_OBJECTS + 1))
        objects: List[SceneObject] = []
        for _ in range(count):
            kind = kinds[int(rng.integers(len(kinds)))]
            objects.append(_place_object(rng, kind, split, objects))
        scene = Scene(objects=objects, seed=seed, split=split)
        if has_careful_path(scene):
            return scene
        logger.debug(f"Scene seed={seed} attempt {attempt} has no careful path, redrawing")

    raise PlacementFailure(
        f"No scene with a careful path after {MAX_REGENERATIONS} draws (seed={seed})"
    )


def augment_scene(scene: Scene, kind: ObjectKind, seed: int) -> Scene:
    """Return a copy of the scene with one extra object of the given kind."""
    kind = ObjectKind(kind)
    if len(scene.objects) >= MAX_OBJECTS:
        raise PlacementFailure(
            f"Scene already holds {len(scene.objects)} objects, no room for a {kind.value}"
        )
    rng = np.random.default_rng([seed, _AUGMENT_TAG, list(ObjectKind).index(kind)])
    added = _place_object(rng, kind, scene.split, list(scene.objects))
    return Scene(objects=[*scene.objects, added], seed=scene.seed, split=scene.split)


def render_scene(scene: Scene, size: int = IMAGE_SIZE) -> np.ndarray:
    """
    Rasterize a scene top-down with hard edges.

    Row 0 is the far edge of the table (y = 1); objects are painted in list
    order so later ones occlude earlier ones.

    Returns:
        Array of shape (size, size, 3) with intensities in [0, 1].
    """
    centers = (np.arange(size) + 0.5) / size
    xs, ys = np.meshgrid(centers, 1.0 - centers, indexing="xy")
    points = np.stack([xs, ys], axis=-1)

    image = np.empty((size, size, 3), dtype=np.float64)
    image[...] = BACKGROUND
    for obj in scene.objects:
        mask = footprint_distance(points, obj.footprint) <= 0.0
        image[mask] = obj.color
    return image


class SceneFile(BaseModel):
    """On-disk layout of scene.json."""

    model_config = ConfigDict(extra="forbid")

    version: Literal[1] = Field(default=SCHEMA_VERSION, description="File schema version")
    seed: int = Field(ge=0, lt=2**64, description="Seed the scene was generated from")
    split: Split = Field(description="Train or test split")
    objects: List[SceneObject] = Field(description="Objects in paint order")

    @classmethod
    def from_scene(cls, scene: Scene) -> "SceneFile":
        return cls(seed=scene.seed, split=scene.split, objects=list(scene.objects))

    def to_scene(self) -> Scene:
        return Scene(objects=self.objects, seed=self.seed, split=self.split)


def scene_to_files(scene: Scene, directory: Path) -> None:
    """Write scene.json and scene.png into the directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    record = SceneFile.from_scene(scene)
    (directory / "scene.json").write_text(record.model_dump_json(indent=2) + "\n")
    pixels = np.round(render_scene(scene) * 255.0).astype(np.uint8)
    PILImage.fromarray(pixels).save(directory / "scene.png")


def scene_from_files(directory: Path) -> Scene:
    """Read a scene written by scene_to_files."""
    path = Path(directory) / "scene.json"
    try:
        return SceneFile.model_validate_json(path.read_text()).to_scene()
    except ValidationError as e:
        raise SchemaError(f"{path} does not describe a scene: {e}") from e


def load_scene_image(directory: Path) -> np.ndarray:
    """Decode scene.png into float intensities in [0, 1]."""
    with PILImage.open(Path(directory) / "scene.png") as img:
        return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0


def scene_violations(scene: Scene) -> List[str]:
    """List every placement invariant the scene breaks (empty when valid)."""
    problems = []
    if not MIN_OBJECTS <= len(scene.objects) <= MAX_OBJECTS:
        problems.append(f"object count {len(scene.objects)}")
    for i, obj in enumerate(scene.objects):
        if not (
            obj.radius <= obj.cx <= 1 - obj.radius
            and obj.radius <= obj.cy <= 1 - obj.radius
        ):
            problems.append(f"object {i} leaves the table")
        if not _fits(obj, []):
            problems.append(f"object {i} blocks an endpoint")
        for j in range(i):
            other = scene.objects[j]
            if np.hypot(obj.cx - other.cx, obj.cy - other.cy) <= obj.radius + other.radius:
                problems.append(f"objects {j} and {i} overlap")
    return problems
