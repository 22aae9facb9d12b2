import numpy as np
import pytest

from src.exceptions import SchemaError, ShapeError
from src.irl_baseline import (
    FEATURES,
    classify_irl,
    irl_score,
    load_reward_model,
    patch_features,
    save_reward_model,
    train_irl,
)
from src.scene import BACKGROUND, render_scene
from src.trajectory import UserType, sample_trajectory, synthesize_demonstrations

from tests.conftest import TINY


@pytest.fixture
def glass_demos(glass_scene):
    return synthesize_demonstrations(glass_scene, UserType.CAREFUL, 8, seed=0)


def test_features_of_an_empty_table_are_background():
    image = np.empty((TINY, TINY, 3))
    image[...] = BACKGROUND
    features = patch_features(image, (0.5, 0.5))
    assert features.shape == (FEATURES,)
    assert np.allclose(features.reshape(-1, 3), BACKGROUND)


def test_features_see_an_object_on_the_path(glass_scene):
    image = render_scene(glass_scene, 32)
    through = patch_features(image, (0.5, 0.5)).reshape(-1, 3)
    around = patch_features(image, (0.0, 1.0)).reshape(-1, 3)
    background = np.array(BACKGROUND)
    assert np.abs(through - background).sum() > np.abs(around - background).sum()


def test_features_reject_non_square_images():
    with pytest.raises(ShapeError):
        patch_features(np.zeros((TINY, TINY + 2, 3)), (0.5, 0.5))


def test_train_rejects_empty_and_mixed_datasets(scene):
    with pytest.raises(ValueError):
        train_irl([], epochs=1)
    mixed = synthesize_demonstrations(scene, UserType.CAREFUL, 2, seed=0)
    mixed += synthesize_demonstrations(scene, UserType.NORMAL, 2, seed=0)
    with pytest.raises(ValueError):
        train_irl(mixed, epochs=1, image_size=TINY)


def test_training_reduces_the_loss(glass_demos):
    model = train_irl(glass_demos, epochs=40, image_size=TINY)
    assert len(model.history) == 40
    assert model.history[-1] < model.history[0]
    assert model.user_type == UserType.CAREFUL


def test_training_is_deterministic(glass_demos):
    first = train_irl(glass_demos, epochs=3, seed=4, image_size=TINY)
    second = train_irl(glass_demos, epochs=3, seed=4, image_size=TINY)
    assert first.params.checksum() == second.params.checksum()
    assert first.history == second.history


def test_scores_are_probabilities(glass_demos, glass_scene):
    model = train_irl(glass_demos, epochs=2, image_size=TINY)
    image = render_scene(glass_scene, TINY)
    for theta in [(0.5, 0.5), (0.0, 1.0), (1.2, -0.2)]:
        score = irl_score(model, image, theta)
        assert 0.0 < score < 1.0
        assert classify_irl(model, image, theta) == (score >= 0.5)


def test_scoring_leaves_parameter_gradients_alone(glass_demos, glass_scene):
    model = train_irl(glass_demos, epochs=1, image_size=TINY)
    before = model.params["reward.W"].grad.copy()
    irl_score(model, render_scene(glass_scene, TINY), (0.3, 0.3))
    assert np.array_equal(model.params["reward.W"].grad, before)


def test_reward_model_round_trip(tmp_path, glass_demos, glass_scene):
    model = train_irl(glass_demos, epochs=2, image_size=TINY)
    save_reward_model(model, tmp_path)
    loaded = load_reward_model(tmp_path)
    assert loaded.user_type == UserType.CAREFUL
    assert loaded.image_size == TINY
    image = render_scene(glass_scene, TINY)
    assert irl_score(loaded, image, (0.4, 0.6)) == irl_score(model, image, (0.4, 0.6))


def test_reward_model_with_foreign_sidecar(tmp_path, glass_demos):
    save_reward_model(train_irl(glass_demos, epochs=1, image_size=TINY), tmp_path)
    (tmp_path / "reward.json").write_text('{"kind": "spec", "user_type": "careful"}')
    with pytest.raises(SchemaError):
        load_reward_model(tmp_path)


@pytest.mark.parametrize("theta", [(0.5, 0.5), (0.1, 0.9), (1.1, 0.2)])
def test_pixels_far_from_the_path_do_not_change_the_reward(glass_demos, glass_scene, theta):
    model = train_irl(glass_demos, epochs=2, image_size=TINY)
    image = render_scene(glass_scene)
    size = image.shape[0]
    points = sample_trajectory(theta).points
    cols = np.clip(np.floor(points[:, 0] * size), 0, size - 1)
    rows = np.clip(np.floor((1.0 - points[:, 1]) * size), 0, size - 1)
    grid_rows, grid_cols = np.mgrid[0:size, 0:size]
    distance = np.min(
        np.hypot(grid_rows[..., None] - rows, grid_cols[..., None] - cols), axis=-1
    )
    far = distance > 9.0
    assert far.any()

    edited = image.copy()
    edited[far] = np.random.default_rng(0).uniform(size=(int(far.sum()), 3))
    assert np.array_equal(patch_features(edited, theta), patch_features(image, theta))
    assert irl_score(model, edited, theta) == irl_score(model, image, theta)

    near = image.copy()
    near[int(rows[25]), int(cols[25])] = 1.0 - near[int(rows[25]), int(cols[25])]
    assert not np.array_equal(patch_features(near, theta), patch_features(image, theta))
