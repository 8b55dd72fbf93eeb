"""Run configuration: one dataclass covering every stage, JSON-loadable.

Every field has a default, the resolved configuration is echoed next to the
outputs, and all seeds are explicit so a run can be reproduced from its
config alone.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .features import DEFAULT_GATEKEEPER_DEPARTMENTS, FeatureConfig
from .models import ForestParams
from .synthetic import SynthConfig


def _default_knn_grid() -> tuple[int, ...]:
    return tuple(range(1, 52, 2))


@dataclass
class RunConfig:
    data_dir: str = "data"
    out_dir: str = "out"
    degree_credits: float = 180.0
    imputation_mode: str = "regression"
    major_vocab_size: int = 150
    gatekeeper_range: tuple[int, int] = (100, 199)
    gatekeeper_departments: dict[str, str] = field(
        default_factory=lambda: dict(DEFAULT_GATEKEEPER_DEPARTMENTS)
    )
    lr_lambda_grid: tuple[float, ...] = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0)
    knn_k_grid: tuple[int, ...] = field(default_factory=_default_knn_grid)
    forest_depth_grid: tuple[int, ...] = (2, 4, 6, 8, 12, 16)
    forest_n_trees: int = 200
    forest_min_samples_split: int = 2
    forest_min_samples_leaf: int = 1
    test_fraction: float = 0.30
    cv_folds: int = 10
    timing_lambda_grid: tuple[float, ...] = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0)
    split_seed: int = 7301
    cv_seed: int = 7302
    sampling_seed: int = 7303
    synth: SynthConfig = field(default_factory=SynthConfig)

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        raw = dict(raw)
        if "synth" in raw and isinstance(raw["synth"], dict):
            raw["synth"] = SynthConfig.from_dict(raw["synth"])
        for tup in ("gatekeeper_range", "lr_lambda_grid", "knn_k_grid",
                    "forest_depth_grid", "timing_lambda_grid"):
            if tup in raw:
                raw[tup] = tuple(raw[tup])
        return cls(**raw)

    def override_seed(self, seed: int) -> "RunConfig":
        """One seed to rule them all: split, CV, sampling, and generation."""
        cfg = RunConfig.from_dict(self.to_dict())
        cfg.split_seed = seed
        cfg.cv_seed = seed + 1
        cfg.sampling_seed = seed + 2
        synth = self.to_dict()["synth"]
        synth["seed"] = seed + 3
        cfg.synth = SynthConfig.from_dict(synth)
        return cfg

    def to_dict(self) -> dict:
        out = asdict(self)
        out["synth"]["entry_year_range"] = list(self.synth.entry_year_range)
        out["gatekeeper_range"] = list(self.gatekeeper_range)
        for tup in ("lr_lambda_grid", "knn_k_grid", "forest_depth_grid", "timing_lambda_grid"):
            out[tup] = list(getattr(self, tup))
        return out

    def write_resolved(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(
            major_vocab_size=self.major_vocab_size,
            gatekeeper_range=self.gatekeeper_range,
            gatekeeper_departments=self.gatekeeper_departments,
            imputation_mode=self.imputation_mode,
        )

    def forest_params(self, max_depth: int | None = None) -> ForestParams:
        return ForestParams(
            n_trees=self.forest_n_trees,
            max_depth=max_depth or self.forest_depth_grid[-1],
            min_samples_split=self.forest_min_samples_split,
            min_samples_leaf=self.forest_min_samples_leaf,
        )
