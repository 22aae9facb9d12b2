import json

import numpy as np
import pytest

from src.exceptions import UntrainedModelError
from src.refine import (
    STOP_SCORE,
    evaluate_refinement,
    refine_trajectory,
    sample_invalid_theta,
    save_trace,
)
from src.scene import generate_scene
from src.trajectory import USER_TYPES, UserType, oracle_validity


def _constant_classifier(model, bias):
    model.params["classifier.fc3.W"].data[:] = 0.0
    model.params["classifier.fc3.b"].data[:] = bias


def _rightward_classifier(model):
    """Score = sigmoid(theta_x - 2) for theta_x >= 0."""
    for name in ("fc1", "fc2", "fc3"):
        model.params[f"classifier.{name}.W"].data[:] = 0.0
        model.params[f"classifier.{name}.b"].data[:] = 0.0
    model.params["classifier.fc1.W"].data[15, 0] = 1.0
    model.params["classifier.fc2.W"].data[0, 0] = 1.0
    model.params["classifier.fc3.W"].data[0, 0] = 1.0
    model.params["classifier.fc3.b"].data[:] = -2.0


def test_untrained_model_is_refused(tiny_model, scene):
    with pytest.raises(UntrainedModelError):
        refine_trajectory(tiny_model, scene, (0.5, 0.5))


def test_needs_at_least_one_step(trained_tiny, scene):
    with pytest.raises(ValueError):
        refine_trajectory(trained_tiny, scene, (0.5, 0.5), max_steps=0)


def test_confident_start_stops_immediately(tiny_model, scene):
    _constant_classifier(tiny_model, 5.0)
    trace = refine_trajectory(tiny_model, scene, (0.3, 0.6))
    assert trace.steps_taken == 0
    assert trace.scores[0] >= STOP_SCORE
    assert np.array_equal(trace.final_theta, [0.3, 0.6])
    assert trace.final_valid_model


def test_flat_score_keeps_theta_but_records_steps(tiny_model, scene):
    _constant_classifier(tiny_model, -5.0)
    trace = refine_trajectory(tiny_model, scene, (0.3, 0.6), max_steps=4)
    assert trace.steps_taken == 4
    assert all(np.array_equal(t, [0.3, 0.6]) for t in trace.step_thetas)
    assert len(set(trace.scores)) == 1
    assert not trace.final_valid_model


def test_ascent_follows_the_gradient_and_clamps(tiny_model, scene):
    _rightward_classifier(tiny_model)
    trace = refine_trajectory(tiny_model, scene, (0.2, 0.5), max_steps=30, step_size=0.05)
    assert trace.steps_taken == 30
    assert len(trace.scores) == len(trace.step_thetas) == 31
    assert np.all(np.diff(trace.scores) >= 0)
    assert trace.step_thetas[1] == pytest.approx([0.25, 0.5])
    assert np.array_equal(trace.final_theta, [1.25, 0.5])
    assert trace.final_valid_oracle == oracle_validity(scene, (1.25, 0.5), UserType.CAREFUL)


def test_start_outside_the_box_is_clamped(tiny_model, scene):
    _constant_classifier(tiny_model, 5.0)
    trace = refine_trajectory(tiny_model, scene, (-3.0, 4.0))
    assert np.array_equal(trace.initial_theta, [-0.25, 1.25])


def test_refinement_is_deterministic(trained_tiny, scene):
    first = refine_trajectory(trained_tiny, scene, (0.4, 0.4), max_steps=5)
    second = refine_trajectory(trained_tiny, scene, (0.4, 0.4), max_steps=5)
    assert first.scores == second.scores
    assert all(np.array_equal(a, b) for a, b in zip(first.step_thetas, second.step_thetas))


def test_refinement_leaves_parameter_gradients_alone(trained_tiny, scene):
    before = {name: t.grad.copy() for name, t in trained_tiny.params.items()}
    refine_trajectory(trained_tiny, scene, (0.4, 0.4), max_steps=3)
    for name, tensor in trained_tiny.params.items():
        assert np.array_equal(tensor.grad, before[name])


def test_invalid_start_is_rejected_by_the_oracle(glass_scene):
    rng = np.random.default_rng(0)
    for _ in range(10):
        theta = sample_invalid_theta(glass_scene, UserType.CAREFUL, rng)
        assert not oracle_validity(glass_scene, theta, UserType.CAREFUL)


def test_invalid_start_falls_back_when_everything_is_valid(glass_scene):
    theta = sample_invalid_theta(glass_scene, UserType.AGGRESSIVE, np.random.default_rng(0))
    assert theta.shape == (2,)
    assert np.all((theta >= 0) & (theta <= 1))


def test_evaluate_refinement(tiny_models):
    scenes = [generate_scene(s) for s in (21, 22)]
    result = evaluate_refinement(tiny_models, scenes, trials_per_scene=2, seed=0, max_steps=2)
    assert [row.user_type for row in result.rows] == list(USER_TYPES)
    for row in result.rows:
        assert row.trials == 4
        assert 0 <= row.successes <= row.trials
        assert row.success_rate == pytest.approx(row.successes / row.trials)
    assert len(result.traces) == 4 * len(USER_TYPES)

    again = evaluate_refinement(tiny_models, scenes, trials_per_scene=2, seed=0, max_steps=2)
    assert again.rows == result.rows


def test_evaluate_refinement_starts_from_invalid_points(tiny_models, glass_scene):
    scenes = [glass_scene]
    result = evaluate_refinement(tiny_models, scenes, trials_per_scene=2, seed=3, max_steps=1)
    for record in result.traces:
        if record.user_type == UserType.AGGRESSIVE:
            continue
        scene = scenes[record.scene_index]
        assert not oracle_validity(scene, record.trace.initial_theta, record.user_type)


def test_trace_file(tmp_path, trained_tiny, scene):
    trace = refine_trajectory(trained_tiny, scene, (0.4, 0.4), max_steps=3)
    path = tmp_path / "refine_trace.json"
    save_trace(trace, path, "test/scene_000", UserType.CAREFUL)
    payload = json.loads(path.read_text())
    assert set(payload) == {"scene_path", "user_type", "thetas", "scores", "success"}
    assert payload["user_type"] == "careful"
    assert len(payload["thetas"]) == len(payload["scores"]) == trace.steps_taken + 1
    assert payload["success"] == trace.final_valid_oracle
