import json

import numpy as np
import pytest

from src.exceptions import PlacementFailure, SchemaError
from src.scene import (
    BACKGROUND,
    MAX_OBJECTS,
    MIN_OBJECTS,
    RANDOM_MAX_OBJECTS,
    TEST_PALETTE,
    TRAIN_PALETTE,
    ObjectKind,
    Scene,
    Split,
    augment_scene,
    generate_scene,
    has_careful_path,
    load_scene_image,
    render_scene,
    scene_from_files,
    scene_to_files,
    scene_violations,
)


def test_generate_is_deterministic():
    assert generate_scene(3) == generate_scene(3)
    assert generate_scene(3) != generate_scene(4)


def test_placement_rules_hold_across_many_scenes():
    for seed in range(1000):
        split = Split.TEST if seed % 2 else Split.TRAIN
        scene = generate_scene(seed, split)
        assert MIN_OBJECTS <= len(scene.objects) <= RANDOM_MAX_OBJECTS, seed
        assert scene_violations(scene) == [], seed
        assert has_careful_path(scene), seed
        assert all(obj.variant == split for obj in scene.objects), seed


def test_explicit_object_count():
    assert len(generate_scene(5, object_count=2).objects) == 2


@pytest.mark.parametrize("count", [1, MAX_OBJECTS + 1])
def test_object_count_out_of_range(count):
    with pytest.raises(ValueError):
        generate_scene(0, object_count=count)


def test_seed_must_be_unsigned_64_bit():
    with pytest.raises(ValueError):
        generate_scene(-1)
    with pytest.raises(ValueError):
        generate_scene(2**64)


def test_render_shape_and_range(scene):
    image = render_scene(scene)
    assert image.shape == (100, 100, 3)
    assert image.min() >= 0.0 and image.max() <= 1.0


def test_empty_scene_renders_background():
    image = render_scene(Scene(objects=[], seed=0), size=10)
    assert np.allclose(image, BACKGROUND)


def test_object_is_painted_where_it_lies(glass_scene):
    image = render_scene(glass_scene)
    # row 0 is y = 1, so the table center is at row 50, column 50
    assert np.allclose(image[50, 50], TRAIN_PALETTE[ObjectKind.GLASS])
    assert np.allclose(image[0, 0], BACKGROUND)


def test_test_palette_differs():
    for kind in ObjectKind:
        assert not np.allclose(TRAIN_PALETTE[kind], TEST_PALETTE[kind])


def test_file_round_trip(tmp_path, scene):
    scene_to_files(scene, tmp_path)
    assert scene_from_files(tmp_path) == scene
    assert np.allclose(load_scene_image(tmp_path), render_scene(scene), atol=0.5 / 255)


def test_rejects_unknown_keys(tmp_path, scene):
    scene_to_files(scene, tmp_path)
    payload = json.loads((tmp_path / "scene.json").read_text())
    payload["extra"] = 1
    (tmp_path / "scene.json").write_text(json.dumps(payload))
    with pytest.raises(SchemaError):
        scene_from_files(tmp_path)


def test_rejects_other_versions(tmp_path, scene):
    scene_to_files(scene, tmp_path)
    payload = json.loads((tmp_path / "scene.json").read_text())
    payload["version"] = 99
    (tmp_path / "scene.json").write_text(json.dumps(payload))
    with pytest.raises(SchemaError):
        scene_from_files(tmp_path)


def test_rejects_broken_json(tmp_path):
    (tmp_path / "scene.json").write_text("{not json")
    with pytest.raises(SchemaError):
        scene_from_files(tmp_path)


@pytest.mark.parametrize(
    "edit",
    [
        lambda payload: payload["objects"][0].update(color="red"),
        lambda payload: payload["objects"][0].pop("radius"),
        lambda payload: payload.pop("split"),
        lambda payload: payload.update(objects="plate"),
    ],
    ids=["extra object key", "missing object field", "missing split", "objects not a list"],
)
def test_rejects_malformed_scene_files(tmp_path, scene, edit):
    scene_to_files(scene, tmp_path)
    payload = json.loads((tmp_path / "scene.json").read_text())
    edit(payload)
    (tmp_path / "scene.json").write_text(json.dumps(payload))
    with pytest.raises(SchemaError):
        scene_from_files(tmp_path)


@pytest.mark.parametrize("kind", list(ObjectKind))
def test_augment_adds_one_object(scene, kind):
    augmented = augment_scene(scene, kind, seed=5)
    assert len(augmented.objects) == len(scene.objects) + 1
    assert augmented.objects[:-1] == scene.objects
    assert augmented.objects[-1].kind == kind
    assert augmented.objects[-1].variant == scene.split
    assert augment_scene(scene, kind, seed=5) == augmented
    assert scene_violations(augmented) == []


def test_augment_full_scene_fails(glass_scene):
    full = Scene(objects=glass_scene.objects * 3, seed=0)
    with pytest.raises(PlacementFailure):
        augment_scene(full, ObjectKind.GLASS, seed=0)
