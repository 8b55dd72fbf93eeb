import json

import pytest

from attrition.cli import main

FAST_CONFIG = {
    "lr_lambda_grid": [0.001, 0.1],
    "knn_k_grid": [3, 9, 15],
    "forest_depth_grid": [2, 4],
    "forest_n_trees": 30,
    "cv_folds": 5,
    "synth": {"n_students": 300, "seed": 77},
}


def write_config(tmp_path, **overrides):
    raw = dict(FAST_CONFIG)
    raw.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw), encoding="utf-8")
    return path


def run(args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("pipeline")
    config = write_config(tmp)
    out = tmp / "out"
    data = tmp / "data"
    code = run(["pipeline", "--config", config, "--data", data, "--out", out])
    assert code == 0
    return out, data


def test_pipeline_writes_report_with_three_models(pipeline_run):
    out, _ = pipeline_run
    report = json.loads((out / "report.json").read_text())
    assert set(report["models"]) == {"logistic_regression", "random_forest", "knn"}
    for name, model in report["models"].items():
        assert 0.0 <= model["accuracy"] <= 1.0
        assert 0.0 <= model["auc"] <= 1.0
        assert model["roc_points"][0][:2] == [0.0, 0.0]
        assert model["roc_points"][-1][:2] == [1.0, 1.0]
        assert model["hyperparameters"]


def test_pipeline_writes_all_stage_artifacts(pipeline_run):
    out, data = pipeline_run
    for name in (
        "labels.csv",
        "features.csv",
        "schema.json",
        "split.csv",
        "model_logistic_regression.json",
        "model_random_forest.json",
        "model_knn.json",
        "report.json",
        "roc_logistic_regression.csv",
        "roc_random_forest.csv",
        "roc_knn.csv",
        "screen.csv",
        "timing.json",
        "run_config.json",
        "manifest.jsonl",
    ):
        assert (out / name).exists(), name
    for name in ("students.csv", "transcripts.csv", "degrees.csv", "ground_truth.csv"):
        assert (data / name).exists(), name


def test_screen_csv_has_table_shaped_header(pipeline_run):
    out, _ = pipeline_run
    header = (out / "screen.csv").read_text().splitlines()[0]
    assert header == "Feature,Accuracy,AUC"


def test_labels_csv_columns(pipeline_run):
    out, _ = pipeline_run
    lines = (out / "labels.csv").read_text().splitlines()
    assert lines[0] == "student_id,graduated,quarters_enrolled,window_allowance"
    assert len(lines) - 1 == 300


def test_roc_files_have_expected_columns(pipeline_run):
    out, _ = pipeline_run
    lines = (out / "roc_logistic_regression.csv").read_text().splitlines()
    assert lines[0] == "fpr,tpr,threshold"
    assert len(lines) > 2


def test_timing_report_fields(pipeline_run):
    out, _ = pipeline_run
    timing = json.loads((out / "timing.json").read_text())
    assert timing["rmse"] >= timing["rmse_drop5"] >= timing["rmse_drop10"]
    assert timing["n_test"] >= 1


def test_resolved_config_echoes_all_seeds(pipeline_run):
    out, _ = pipeline_run
    resolved = json.loads((out / "run_config.json").read_text())
    for key in ("split_seed", "cv_seed", "sampling_seed"):
        assert key in resolved
    assert resolved["synth"]["seed"] == 77
    assert resolved["forest_n_trees"] == 30


def test_manifest_lines_cover_stages(pipeline_run):
    out, _ = pipeline_run
    stages = [json.loads(line)["stage"] for line in (out / "manifest.jsonl").read_text().splitlines()]
    assert stages == ["generate", "label", "featurize", "train", "evaluate", "screen", "timing"]


def test_evaluate_before_train_names_prerequisite(tmp_path, capsys):
    config = write_config(tmp_path)
    out = tmp_path / "out"
    data = tmp_path / "data"
    assert run(["generate", "--config", config, "--data", data, "--out", out]) == 0
    assert run(["label", "--config", config, "--data", data, "--out", out]) == 0
    assert run(["featurize", "--config", config, "--data", data, "--out", out]) == 0
    code = run(["evaluate", "--config", config, "--data", data, "--out", out])
    captured = capsys.readouterr()
    assert code == 1
    assert captured.err.startswith("error: evaluate:")
    assert "train" in captured.err
    assert len(captured.err.strip().splitlines()) == 1


def test_featurize_before_label_names_prerequisite(tmp_path, capsys):
    config = write_config(tmp_path)
    out = tmp_path / "out"
    data = tmp_path / "data"
    assert run(["generate", "--config", config, "--data", data, "--out", out]) == 0
    code = run(["featurize", "--config", config, "--data", data, "--out", out])
    captured = capsys.readouterr()
    assert code == 1
    assert "label" in captured.err


def test_label_before_generate_names_prerequisite(tmp_path, capsys):
    config = write_config(tmp_path)
    code = run(["label", "--config", config, "--data", tmp_path / "nothing", "--out", tmp_path / "out"])
    captured = capsys.readouterr()
    assert code == 1
    assert "generate" in captured.err


def test_schema_hash_mismatch_refused(tmp_path, capsys):
    config = write_config(tmp_path)
    out = tmp_path / "out"
    data = tmp_path / "data"
    for sub in ("generate", "label", "featurize", "train"):
        assert run([sub, "--config", config, "--data", data, "--out", out]) == 0
    # refit features under a different sampling seed: schema stats change
    config2 = write_config(tmp_path, sampling_seed=999)
    assert run(["featurize", "--config", config2, "--data", data, "--out", out]) == 0
    code = run(["evaluate", "--config", config2, "--data", data, "--out", out])
    captured = capsys.readouterr()
    assert code == 1
    assert "schema" in captured.err.lower()


def test_seed_flag_overrides_all_seeds(tmp_path):
    config = write_config(tmp_path)
    out = tmp_path / "out"
    assert run(["generate", "--config", config, "--data", tmp_path / "d", "--out", out, "--seed", "5"]) == 0
    resolved = json.loads((out / "run_config.json").read_text())
    assert resolved["split_seed"] == 5
    assert resolved["cv_seed"] == 6
    assert resolved["sampling_seed"] == 7
    assert resolved["synth"]["seed"] == 8


def test_unknown_config_field_is_an_error(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"lr_lambda_gird": [0.1]}), encoding="utf-8")
    code = run(["generate", "--config", path, "--out", tmp_path / "out"])
    captured = capsys.readouterr()
    assert code == 1
    assert "unknown config fields" in captured.err
