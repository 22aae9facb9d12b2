import json

import pandas as pd
import pytest

from src.cli import EXIT_CONFIG, EXIT_GATE, EXIT_IO, EXIT_OK, main
from src.cli.evaluate import summarize
from src.cli.train import LOG_COLUMNS
from src.irl_baseline import load_reward_model

TINY_CONFIG = {
    "scenes_train": 2,
    "scenes_test": 2,
    "trajectories_per_scene": [1, 2],
    "test_trajectories_per_scene": 2,
    "epochs": 1,
    "batch_size": 4,
    "image_size": 16,
    "irl_epochs": 2,
    "refine_trials_per_scene": 1,
    "refine_max_steps": 2,
    "latent_grid_n": 2,
    "causal_thetas_per_scene": 5,
    "bootstrap_resamples": 20,
}


def _config(directory, **changes):
    path = directory / "config.json"
    path.write_text(json.dumps({**TINY_CONFIG, **changes}))
    return str(path)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One tiny end-to-end run shared by the tests of this module."""
    root = tmp_path_factory.mktemp("pipeline")
    config = _config(root)
    data, ckpt = root / "data", root / "ckpt"
    codes = {
        "generate": main(["generate", "--config", config, "--out", str(data)]),
        "train": main(["train", "--config", config, "--data", str(data), "--out", str(ckpt)]),
        "eval": main(
            ["eval", "--config", config, "--data", str(data), "--ckpt", str(ckpt),
             "--out", str(root / "eval")]
        ),
        "refine": main(
            ["refine", "--config", config, "--data", str(data), "--ckpt", str(ckpt),
             "--out", str(root / "refine")]
        ),
        "causal": main(
            ["causal", "--config", config, "--data", str(data), "--ckpt", str(ckpt),
             "--out", str(root / "causal")]
        ),
    }
    codes["report"] = main(
        ["report", str(root / "eval"), str(root / "refine"), str(root / "causal"),
         str(ckpt), "--out", str(root / "report")]
    )
    return root, codes


def test_pipeline_exit_codes(pipeline):
    _, codes = pipeline
    for command in ("generate", "train", "eval", "refine", "report"):
        assert codes[command] == EXIT_OK, command
    assert codes["causal"] in (EXIT_OK, EXIT_GATE)


def test_generated_inventory(pipeline):
    root, _ = pipeline
    data = root / "data"
    manifest = json.loads((data / "manifest.json").read_text())
    assert len(manifest["scenes"]) == 4
    for split in ("train", "test"):
        for index in range(2):
            directory = data / split / f"scene_{index:03d}"
            assert (directory / "scene.json").exists()
            assert (directory / "scene.png").exists()
            for user_type in ("careful", "normal", "aggressive"):
                demos = json.loads((directory / f"demos_{user_type}.json").read_text())
                assert len(demos["demos"]) == 2


def test_training_outputs(pipeline):
    root, _ = pipeline
    log = pd.read_csv(root / "ckpt" / "training_log.csv")
    assert list(log.columns) == LOG_COLUMNS
    assert len(log) == 3 * 3  # user types x ablations, one epoch each
    assert (log.loc[log["ablation"] == "ae", "weighted_kl"] == 0).all()
    classifier_only = log[log["ablation"] == "classifier"]
    assert (classifier_only["weighted_recon"] == 0).all()
    for user_type in ("careful", "normal", "aggressive"):
        for ablation in ("full", "ae", "classifier"):
            directory = root / "ckpt" / user_type / ablation / "seed_0"
            assert {"model.spc", "model.json", "optimizer.spc", "log.csv"} <= {
                p.name for p in directory.iterdir()
            }


def test_eval_outputs(pipeline):
    root, _ = pipeline
    curve = pd.read_csv(root / "eval" / "accuracy_curve.csv")
    assert set(curve["variant"]) == {"full", "ae", "classifier", "irl"}
    assert set(curve["user_type"]) == {"careful", "normal"}
    assert set(curve["k"]) == {1, 2}
    assert (curve["q1"] <= curve["q3"]).all()
    outside = (curve["mean"] < curve["q1"]) | (curve["mean"] > curve["q3"])
    assert (curve["mean_outside_iqr"] == outside).all()
    assert (root / "eval" / "accuracy_curve.svg").exists()
    checkpoints = pd.read_csv(root / "eval" / "checkpoint_accuracy.csv")
    assert len(checkpoints) == 9
    for user_type in ("careful", "normal"):
        for k in (1, 2):
            reward = load_reward_model(root / "eval" / "irl" / user_type / f"k_{k}" / "seed_0")
            assert reward.user_type.value == user_type
            assert reward.image_size == 16


def test_summary_reports_plain_quartiles():
    runs = pd.DataFrame(
        {
            "user_type": ["careful"] * 8,
            "variant": ["full"] * 5 + ["irl"] * 3,
            "k": [1] * 8,
            "seed": list(range(5)) + list(range(3)),
            "accuracy": [0.0, 0.0, 0.0, 0.0, 1.0, 0.5, 0.6, 0.7],
        }
    )
    curve = summarize(runs).set_index("variant")
    skewed = curve.loc["full"]
    assert (skewed["mean"], skewed["q1"], skewed["q3"]) == (0.2, 0.0, 0.0)
    assert skewed["mean_outside_iqr"]
    spread = curve.loc["irl"]
    assert (spread["q1"], spread["q3"]) == (0.55, 0.65)
    assert not spread["mean_outside_iqr"]
    assert list(curve["runs"]) == [5, 3]


def test_refine_outputs(pipeline):
    root, _ = pipeline
    out = root / "refine"
    frame = pd.read_csv(out / "refinement.csv")
    assert list(frame["user_type"]) == ["careful", "normal", "aggressive"]
    assert (frame["trials"] == 2).all()
    traces = sorted((out / "traces").glob("*.json"))
    assert len(traces) == 3 * 2
    assert len(sorted((out / "traces").glob("*.svg"))) == len(traces)
    trace = json.loads(traces[0].read_text())
    assert trace["scene_path"].startswith("test/scene_")
    grid = pd.read_csv(out / "latent_grid" / "careful_scene_000.csv")
    assert list(grid.columns) == ["theta_x", "theta_y", "score"]
    assert len(grid) == 4


def test_causal_outputs(pipeline):
    root, _ = pipeline
    frame = pd.read_csv(root / "causal" / "causal_report.csv")
    assert len(frame) == 3 * 5
    swaps = pd.read_csv(root / "causal" / "causal_user_types.csv")
    assert list(swaps["intervention"]) == ["do(S=careful)", "do(S=normal)", "do(S=aggressive)"]
    assert list(swaps.columns) == list(frame.columns)
    assert (root / "causal" / "causal_report.md").read_text().startswith("# Intervention")


def test_report_lists_every_criterion(pipeline):
    root, _ = pipeline
    text = (root / "report" / "report.md").read_text()
    assert text.startswith("# Reproduction report")
    assert "## training_log.csv" in text
    assert "refinement success" in text


def test_generate_is_byte_identical(tmp_path):
    config = _config(tmp_path)
    outputs = []
    for name in ("a", "b"):
        assert main(["generate", "--config", config, "--out", str(tmp_path / name)]) == 0
        outputs.append(
            {
                p.relative_to(tmp_path / name): p.read_bytes()
                for p in sorted((tmp_path / name).rglob("*"))
                if p.is_file()
            }
        )
    assert outputs[0] == outputs[1]


def test_seed_flag_changes_the_scenes(tmp_path):
    config = _config(tmp_path)
    main(["generate", "--config", config, "--out", str(tmp_path / "a")])
    main(["generate", "--config", config, "--seed", "1", "--out", str(tmp_path / "b")])
    scene = "train/scene_000/scene.json"
    assert (tmp_path / "a" / scene).read_text() != (tmp_path / "b" / scene).read_text()


def test_resumed_training_replays_the_log(tmp_path):
    config = _config(tmp_path, user_types=["careful"], ablations=["full"])
    data = str(tmp_path / "data")
    assert main(["generate", "--config", config, "--out", data]) == 0

    straight, resumed = tmp_path / "straight", tmp_path / "resumed"
    base = ["train", "--config", config, "--data", data]
    assert main(base + ["--epochs", "2", "--out", str(straight)]) == 0
    assert main(base + ["--epochs", "1", "--out", str(resumed)]) == 0
    assert main(base + ["--epochs", "2", "--resume", "--out", str(resumed)]) == 0

    assert (resumed / "training_log.csv").read_bytes() == (
        straight / "training_log.csv"
    ).read_bytes()
    weights = "careful/full/seed_0/model.spc"
    assert (resumed / weights).read_bytes() == (straight / weights).read_bytes()


def test_bad_config_exit_code(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"epochs": -1}))
    assert main(["generate", "--config", str(path), "--out", str(tmp_path / "out")]) == (
        EXIT_CONFIG
    )
    assert main(["generate", "--config", str(tmp_path / "absent.json"), "--out", "x"]) == (
        EXIT_CONFIG
    )


def test_missing_inputs_exit_code(tmp_path):
    config = _config(tmp_path)
    missing = str(tmp_path / "nothing")
    assert main(["train", "--config", config, "--data", missing, "--out", missing]) == EXIT_IO
    assert main(
        ["refine", "--config", config, "--data", missing, "--ckpt", missing, "--out", missing]
    ) == EXIT_IO
