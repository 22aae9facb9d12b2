import numpy as np
import pytest

from src.scene import ObjectKind, Scene, SceneObject, Split, generate_scene
from src.specmodel import SpecModel, train
from src.trajectory import UserType, synthesize_demonstrations

TINY = 16


def make_object(kind, cx, cy, radius, angle=0.0, split=Split.TRAIN):
    return SceneObject(kind=kind, cx=cx, cy=cy, radius=radius, angle=angle, variant=split)


@pytest.fixture
def scene():
    return generate_scene(7)


@pytest.fixture
def glass_scene():
    """A glass on the straight path and a plate well off it."""
    return Scene(
        objects=[
            make_object(ObjectKind.GLASS, 0.5, 0.5, 0.06),
            make_object(ObjectKind.PLATE, 0.75, 0.25, 0.1),
        ],
        seed=1,
    )


@pytest.fixture
def plate_scene():
    return Scene(objects=[make_object(ObjectKind.PLATE, 0.5, 0.5, 0.1)], seed=2)


@pytest.fixture
def tiny_model():
    return SpecModel(UserType.CAREFUL, image_size=TINY, seed=0)


@pytest.fixture
def tiny_dataset(scene):
    return synthesize_demonstrations(scene, UserType.CAREFUL, 8, seed=1)


@pytest.fixture
def trained_tiny(tiny_model, tiny_dataset):
    train(tiny_model, tiny_dataset, epochs=2, batch_size=4, seed=0)
    return tiny_model


@pytest.fixture
def tiny_models():
    """One briefly trained 16-pixel model per user type."""
    scenes = [generate_scene(s) for s in (11, 12)]
    models = {}
    for user_type in UserType:
        demos = [
            d
            for i, s in enumerate(scenes)
            for d in synthesize_demonstrations(s, user_type, 4, seed=i)
        ]
        model = SpecModel(user_type, image_size=TINY, seed=0)
        train(model, demos, epochs=1, batch_size=4, seed=0)
        models[user_type] = model
    return models


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
