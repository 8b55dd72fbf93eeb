"""Command-line entry point chaining the full pipeline.

Subcommands: generate, label, featurize, train, evaluate, screen, timing,
pipeline. Each stage reads its inputs from files, writes its artifacts plus
a manifest line (input hashes, seeds, version), and fails with a one-line
error naming the prerequisite subcommand when an input is missing. The
resolved configuration is always echoed to the output directory, and two
runs with identical configuration produce byte-identical reports.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .evaluation import (
    EvalReport,
    ModelEval,
    accuracy,
    cv_tune,
    roc_and_auc,
    screen_features,
    split,
    timing_experiment,
)
from .features import encode_dataset, fit_schema
from .io import load_students
from .labeling import LabeledDataset, OutcomeLabel, balance, label_all
from .models import (
    check_schema,
    fit_knn,
    load_model,
    predict_scores,
    save_model,
    train_forest,
    train_logistic,
)

SUBCOMMANDS = ("generate", "label", "featurize", "train", "evaluate", "screen", "timing", "pipeline")

MODEL_FILES = {
    "logistic_regression": "model_logistic_regression.json",
    "random_forest": "model_random_forest.json",
    "knn": "model_knn.json",
}


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(message)


def _require(stage: str, path: Path, prerequisite: str) -> Path:
    if not path.exists():
        raise StageError(stage, f"missing input {path}; run '{prerequisite}' first")
    return path


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _manifest_line(cfg: RunConfig, stage: str, inputs: list[Path], outputs: list[Path]) -> None:
    line = {
        "stage": stage,
        "version": __version__,
        "inputs": {p.name: _sha256(p) for p in inputs},
        "outputs": [p.name for p in outputs],
        "seeds": {
            "split": cfg.split_seed,
            "cv": cfg.cv_seed,
            "sampling": cfg.sampling_seed,
            "synth": cfg.synth.seed,
        },
    }
    out = Path(cfg.out_dir) / "manifest.jsonl"
    with open(out, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(line, sort_keys=True) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _data_paths(cfg: RunConfig) -> dict[str, Path]:
    d = Path(cfg.data_dir)
    return {
        "students": d / "students.csv",
        "transcripts": d / "transcripts.csv",
        "degrees": d / "degrees.csv",
        "ground_truth": d / "ground_truth.csv",
    }


def _load_cohort(stage: str, cfg: RunConfig):
    paths = _data_paths(cfg)
    for key in ("students", "transcripts", "degrees"):
        _require(stage, paths[key], "generate")
    return load_students(paths["students"], paths["transcripts"], paths["degrees"])


def _read_labels(stage: str, cfg: RunConfig) -> dict[str, OutcomeLabel]:
    path = _require(stage, Path(cfg.out_dir) / "labels.csv", "label")
    labels: dict[str, OutcomeLabel] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            labels[row["student_id"]] = OutcomeLabel(
                graduated=row["graduated"] == "1",
                quarters_enrolled=int(row["quarters_enrolled"]),
                window_allowance=int(row["window_allowance"]),
            )
    return labels


def _read_features(stage: str, cfg: RunConfig) -> tuple[list[str], np.ndarray]:
    path = _require(stage, Path(cfg.out_dir) / "features.csv", "featurize")
    ids: list[str] = []
    rows: list[list[float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    return ids, np.array(rows)


def _read_split(stage: str, cfg: RunConfig) -> dict[str, str]:
    path = _require(stage, Path(cfg.out_dir) / "split.csv", "featurize")
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["student_id"]: row["partition"] for row in csv.DictReader(fh)}


def _read_schema_meta(stage: str, cfg: RunConfig) -> dict:
    path = _require(stage, Path(cfg.out_dir) / "schema.json", "featurize")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _standardize_with(meta: dict, x: np.ndarray) -> np.ndarray:
    means = np.array(meta["means"])
    sds = np.array(meta["sds"])
    mask = np.array(meta["standardized"], dtype=bool)
    out = np.array(x, copy=True)
    safe = np.where(sds > 0, sds, 1.0)
    out[:, mask] = np.where(sds[mask] > 0, (out[:, mask] - means[mask]) / safe[mask], 0.0)
    return out


def _matrices(stage: str, cfg: RunConfig):
    """Shared loading path for train/evaluate/screen: raw + standardized matrices."""
    ids, x_raw = _read_features(stage, cfg)
    labels = _read_labels(stage, cfg)
    parts = _read_split(stage, cfg)
    meta = _read_schema_meta(stage, cfg)
    y = np.array([0.0 if labels[i].graduated else 1.0 for i in ids])
    part = np.array([parts[i] for i in ids])
    x_std = _standardize_with(meta, x_raw)
    return ids, x_raw, x_std, y, part == "train", meta


# ---------------------------------------------------------------------------
# stages

def stage_generate(cfg: RunConfig) -> list[Path]:
    from .synthetic import generate_cohort, write_cohort

    records, truths = generate_cohort(cfg.synth)
    paths = write_cohort(records, truths, cfg.data_dir)
    outputs = list(paths.values())
    _manifest_line(cfg, "generate", [], outputs)
    return outputs


def stage_label(cfg: RunConfig) -> list[Path]:
    records = _load_cohort("label", cfg)
    ds = label_all(records, cfg.degree_credits)
    out = Path(cfg.out_dir) / "labels.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["student_id", "graduated", "quarters_enrolled", "window_allowance"])
        for student, lab in ds.records:
            writer.writerow(
                [student.student_id, int(lab.graduated), lab.quarters_enrolled, lab.window_allowance]
            )
    inputs = [p for p in _data_paths(cfg).values() if p.exists()]
    _manifest_line(cfg, "label", inputs, [out])
    return [out]


def stage_featurize(cfg: RunConfig) -> list[Path]:
    records = _load_cohort("featurize", cfg)
    labels = _read_labels("featurize", cfg)
    ds = LabeledDataset(tuple((r, labels[r.student_id]) for r in records))
    balanced = balance(ds, cfg.sampling_seed)
    train, test = split(balanced, cfg.test_fraction, cfg.split_seed)
    schema = fit_schema(train, cfg.feature_config())

    out_dir = Path(cfg.out_dir)
    schema_path = out_dir / "schema.json"
    schema.to_json(schema_path)

    features_path = out_dir / "features.csv"
    ids, x_raw, _ = encode_dataset(balanced, schema, standardize=False)
    with open(features_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["student_id"] + schema.feature_names)
        for sid, row in zip(ids, x_raw):
            writer.writerow([sid] + [repr(float(v)) for v in row])

    split_path = out_dir / "split.csv"
    train_ids = {s.student_id for s, _ in train.records}
    with open(split_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["student_id", "partition"])
        for sid in ids:
            writer.writerow([sid, "train" if sid in train_ids else "test"])

    inputs = [p for p in _data_paths(cfg).values() if p.exists()] + [out_dir / "labels.csv"]
    outputs = [features_path, schema_path, split_path]
    _manifest_line(cfg, "featurize", inputs, outputs)
    return outputs


def stage_train(cfg: RunConfig) -> list[Path]:
    ids, x_raw, x_std, y, is_train, meta = _matrices("train", cfg)
    x_tr_std, x_tr_raw, y_tr = x_std[is_train], x_raw[is_train], y[is_train]
    schema_hash = meta["hash"]
    out_dir = Path(cfg.out_dir)

    lam, _ = cv_tune(x_tr_std, y_tr, "logistic_regression", cfg.lr_lambda_grid,
                     folds=cfg.cv_folds, seed=cfg.cv_seed)
    lr = train_logistic(x_tr_std, y_tr, lam)
    lr.schema_hash = schema_hash

    fold_train_size = (len(y_tr) * (cfg.cv_folds - 1)) // cfg.cv_folds
    k_grid = [k for k in cfg.knn_k_grid if k <= fold_train_size] or [1]
    k, _ = cv_tune(x_tr_std, y_tr, "knn", k_grid, folds=cfg.cv_folds, seed=cfg.cv_seed)
    knn = fit_knn(x_tr_std, y_tr, k)
    knn.schema_hash = schema_hash

    depth, _ = cv_tune(x_tr_raw, y_tr, "random_forest", cfg.forest_depth_grid,
                       folds=cfg.cv_folds, seed=cfg.cv_seed,
                       forest_params=cfg.forest_params())
    forest = train_forest(x_tr_raw, y_tr, cfg.forest_params(max_depth=depth), cfg.cv_seed)
    forest.schema_hash = schema_hash

    outputs = []
    for name, model in (("logistic_regression", lr), ("random_forest", forest), ("knn", knn)):
        path = out_dir / MODEL_FILES[name]
        save_model(model, path)
        outputs.append(path)
    inputs = [out_dir / "features.csv", out_dir / "split.csv", out_dir / "labels.csv", out_dir / "schema.json"]
    _manifest_line(cfg, "train", inputs, outputs)
    return outputs


def stage_evaluate(cfg: RunConfig) -> list[Path]:
    ids, x_raw, x_std, y, is_train, meta = _matrices("evaluate", cfg)
    out_dir = Path(cfg.out_dir)
    x_te_std, x_te_raw, y_te = x_std[~is_train], x_raw[~is_train], y[~is_train]

    models = {}
    for name, filename in MODEL_FILES.items():
        path = _require("evaluate", out_dir / filename, "train")
        models[name] = load_model(path)

    report_models: dict[str, ModelEval] = {}
    outputs = []
    for name, model in models.items():
        check_schema(model, meta["hash"])
        x_te = x_te_raw if name == "random_forest" else x_te_std
        scores = np.asarray(predict_scores(model, x_te))
        points, auc = roc_and_auc(scores, y_te)
        if name == "logistic_regression":
            hyper = {"lambda": model.regularization}
        elif name == "knn":
            hyper = {"k": model.k}
        else:
            hyper = {"max_depth": model.params.max_depth, "n_trees": model.params.n_trees}
        report_models[name] = ModelEval(accuracy(scores, y_te), auc, tuple(points), hyper)
        roc_path = out_dir / f"roc_{name}.csv"
        with open(roc_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["fpr", "tpr", "threshold"])
            for fpr, tpr, thr in points:
                writer.writerow([repr(fpr), repr(tpr), repr(thr)])
        outputs.append(roc_path)

    report = EvalReport(report_models, cfg.split_seed)
    report_path = out_dir / "report.json"
    _write_json(report_path, report.to_dict())
    outputs.insert(0, report_path)
    inputs = [out_dir / MODEL_FILES[m] for m in MODEL_FILES]
    inputs += [out_dir / "features.csv", out_dir / "split.csv", out_dir / "labels.csv"]
    _manifest_line(cfg, "evaluate", inputs, outputs)
    return outputs


def stage_screen(cfg: RunConfig) -> list[Path]:
    ids, x_raw, x_std, y, is_train, meta = _matrices("screen", cfg)
    rows = screen_features(
        meta["feature_names"],
        x_std[is_train], y[is_train],
        x_std[~is_train], y[~is_train],
    )
    out = Path(cfg.out_dir) / "screen.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["Feature", "Accuracy", "AUC"])
        for r in rows:
            writer.writerow([r.feature, repr(r.accuracy), repr(r.auc)])
    inputs = [Path(cfg.out_dir) / n for n in ("features.csv", "split.csv", "labels.csv", "schema.json")]
    _manifest_line(cfg, "screen", inputs, [out])
    return [out]


def stage_timing(cfg: RunConfig) -> list[Path]:
    records = _load_cohort("timing", cfg)
    labels = _read_labels("timing", cfg)
    ncs = LabeledDataset(
        tuple((r, labels[r.student_id]) for r in records if not labels[r.student_id].graduated)
    )
    report = timing_experiment(
        ncs, cfg.timing_lambda_grid, cfg.split_seed,
        feature_config=cfg.feature_config(), folds=cfg.cv_folds,
        test_fraction=cfg.test_fraction, cv_seed=cfg.cv_seed,
    )
    out = Path(cfg.out_dir) / "timing.json"
    _write_json(out, report.to_dict())
    inputs = [p for p in _data_paths(cfg).values() if p.exists()] + [Path(cfg.out_dir) / "labels.csv"]
    _manifest_line(cfg, "timing", inputs, [out])
    return [out]


def stage_pipeline(cfg: RunConfig) -> list[Path]:
    written: list[Path] = []
    for stage in (stage_generate, stage_label, stage_featurize, stage_train,
                  stage_evaluate, stage_screen, stage_timing):
        written.extend(stage(cfg))
    return written


STAGES = {
    "generate": stage_generate,
    "label": stage_label,
    "featurize": stage_featurize,
    "train": stage_train,
    "evaluate": stage_evaluate,
    "screen": stage_screen,
    "timing": stage_timing,
    "pipeline": stage_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attrition",
        description="Student non-completion prediction pipeline on registrar-style data.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", type=str, default=None, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override all seeds")
        p.add_argument("--data", type=str, default=None, help="data directory")
        p.add_argument("--out", type=str, default=None, help="output directory")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.override_seed(args.seed)
    if args.data is not None:
        cfg.data_dir = args.data
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        cfg.write_resolved(Path(cfg.out_dir) / "run_config.json")
        STAGES[args.subcommand](cfg)
    except StageError as exc:
        print(f"error: {exc.stage}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {args.subcommand}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
