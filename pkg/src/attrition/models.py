"""From-scratch learners: regularized logistic/ridge regression, kNN, random forest.

The two linear trainers share a batch gradient-descent engine with Armijo
backtracking (Barzilai-Borwein initial step), which guarantees the loss is
non-increasing at every accepted iterate. Training stops when the gradient
infinity-norm drops below tolerance or the iteration cap is hit. All
trainers are deterministic functions of (data, hyperparameters, seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

DEFAULT_MAX_ITERS = 10_000
DEFAULT_TOL = 1e-6
_ARMIJO_C = 1e-4
_BACKTRACK = 0.5


class SchemaMismatchError(ValueError):
    """A model was asked to predict against features from a different schema."""


# ---------------------------------------------------------------------------
# gradient-descent engine

def _minimize(
    loss_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    theta0: np.ndarray,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> tuple[np.ndarray, int, list[float]]:
    """Batch gradient descent with backtracking line search.

    Returns (theta, iterations, loss history); the history is non-increasing
    by the Armijo acceptance rule.
    """
    theta = np.array(theta0, dtype=float)
    loss, grad = loss_and_grad(theta)
    history = [loss]
    prev_theta: np.ndarray | None = None
    prev_grad: np.ndarray | None = None
    iteration = 0
    while iteration < max_iters:
        gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
        if gnorm < tol:
            break
        step = 1.0
        if prev_theta is not None:
            s = theta - prev_theta
            dg = grad - prev_grad
            denom = float(s @ dg)
            if denom > 0:
                step = float(s @ s) / denom
                step = min(max(step, 1e-12), 1e12)
        gsq = float(grad @ grad)
        accepted = False
        for _ in range(80):
            candidate = theta - step * grad
            cand_loss, cand_grad = loss_and_grad(candidate)
            if cand_loss <= loss - _ARMIJO_C * step * gsq:
                accepted = True
                break
            step *= _BACKTRACK
        if not accepted:
            break  # no float-representable descent step left
        prev_theta, prev_grad = theta, grad
        theta, loss, grad = candidate, cand_loss, cand_grad
        history.append(loss)
        iteration += 1
    return theta, iteration, history


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_design(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"feature matrix must be 2-D, got shape {x.shape}")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"row mismatch: {x.shape[0]} feature rows vs {y.shape[0]} targets")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 training rows")
    if not np.isfinite(x).all() or not np.isfinite(y).all():
        raise ValueError("training data contains non-finite values")
    return x, y


# ---------------------------------------------------------------------------
# linear models

@dataclass
class LinearModel:
    weights: np.ndarray
    intercept: float
    regularization: float
    task: str  # "classification" | "regression"
    n_iterations: int = 0
    loss_history: list[float] = field(default_factory=list, repr=False)
    schema_hash: str | None = None


def logistic_objective(
    x: np.ndarray, y: np.ndarray, regularization: float, theta: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean log-loss + (lambda/2)*||w||^2 and its gradient at theta = [w, b]."""
    n, d = x.shape
    w, b = theta[:d], theta[d]
    z = x @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * regularization * (w @ w))
    residual = _sigmoid(z) - y
    grad = np.empty(d + 1)
    grad[:d] = x.T @ residual / n + regularization * w
    grad[d] = residual.mean()
    return loss, grad


def train_logistic(
    x: np.ndarray,
    y: np.ndarray,
    regularization: float,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> LinearModel:
    """L2-regularized logistic regression by gradient descent.

    Minimizes mean log-loss + (lambda/2) * ||w||^2 with an unpenalized
    intercept, from zero initialization.
    """
    x, y = _check_design(x, y)
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("logistic regression needs both classes present")
    if regularization < 0:
        raise ValueError("regularization strength must be non-negative")
    n, d = x.shape
    theta, iters, history = _minimize(
        lambda t: logistic_objective(x, y, regularization, t), np.zeros(d + 1), max_iters, tol
    )
    return LinearModel(theta[:d], float(theta[d]), regularization, "classification", iters, history)


def ridge_objective(
    x: np.ndarray, y: np.ndarray, regularization: float, theta: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean squared error + lambda*||w||^2 and its gradient at theta = [w, b]."""
    n, d = x.shape
    w, b = theta[:d], theta[d]
    r = x @ w + b - y
    loss = float(np.mean(r * r) + regularization * (w @ w))
    grad = np.empty(d + 1)
    grad[:d] = 2.0 * (x.T @ r) / n + 2.0 * regularization * w
    grad[d] = 2.0 * r.mean()
    return loss, grad


def train_ridge(
    x: np.ndarray,
    y: np.ndarray,
    regularization: float,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> LinearModel:
    """Ridge regression by gradient descent.

    Minimizes mean squared error + lambda * ||w||^2 with an unpenalized
    intercept, matching the normal-equations solution
    (X^T X + n*lambda*I)^-1 X^T y on centered data. The intercept is exact
    for any weights (b = mean(y - Xw)), so descent runs on the centered
    weight problem; this keeps the iteration count flat even when lambda
    dwarfs the data curvature.
    """
    x, y = _check_design(x, y)
    if regularization < 0:
        raise ValueError("regularization strength must be non-negative")
    n, d = x.shape
    x_mean = x.mean(axis=0)
    y_mean = float(y.mean())
    xc = x - x_mean
    yc = y - y_mean

    def profiled(w: np.ndarray) -> tuple[float, np.ndarray]:
        r = xc @ w - yc
        loss = float(np.mean(r * r) + regularization * (w @ w))
        grad = 2.0 * (xc.T @ r) / n + 2.0 * regularization * w
        return loss, grad

    w, iters, history = _minimize(profiled, np.zeros(d), max_iters, tol)
    b = y_mean - float(x_mean @ w)
    return LinearModel(w, b, regularization, "regression", iters, history)


def predict_linear(model: LinearModel, x: np.ndarray) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    mat = np.atleast_2d(x)
    if mat.shape[1] != model.weights.shape[0]:
        raise ValueError(
            f"feature length {mat.shape[1]} does not match model dimension {model.weights.shape[0]}"
        )
    z = mat @ model.weights + model.intercept
    return float(z[0]) if single else z


def predict_proba(model: LinearModel, x: np.ndarray) -> np.ndarray | float:
    """Sigmoid of the linear score; strictly inside (0, 1)."""
    if model.task != "classification":
        raise ValueError("predict_proba requires a classification model")
    z = predict_linear(model, x)
    if isinstance(z, float):
        return float(_sigmoid(np.array([z]))[0])
    return _sigmoid(z)


# ---------------------------------------------------------------------------
# k-nearest neighbors

@dataclass
class KnnModel:
    x_train: np.ndarray
    y_train: np.ndarray
    k: int
    schema_hash: str | None = None


def fit_knn(x: np.ndarray, y: np.ndarray, k: int) -> KnnModel:
    x, y = _check_design(x, y)
    if k < 1 or k % 2 == 0:
        raise ValueError(f"k must be a positive odd integer, got {k}")
    if k > x.shape[0]:
        raise ValueError(f"k={k} exceeds training size {x.shape[0]}")
    return KnnModel(x, y, k)


def knn_predict(model: KnnModel, x: np.ndarray, chunk: int = 256) -> np.ndarray | float:
    """Fraction of positive labels among the k nearest training rows.

    Euclidean distance; exact distance ties resolve to the lowest training
    row index (stable sort over squared distances).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    queries = np.atleast_2d(x)
    if queries.shape[1] != model.x_train.shape[1]:
        raise ValueError(
            f"query length {queries.shape[1]} does not match training dimension {model.x_train.shape[1]}"
        )
    out = np.empty(queries.shape[0])
    for start in range(0, queries.shape[0], chunk):
        block = queries[start : start + chunk]
        diff = block[:, None, :] - model.x_train[None, :, :]
        d2 = np.einsum("qtf,qtf->qt", diff, diff)
        order = np.argsort(d2, axis=1, kind="stable")[:, : model.k]
        out[start : start + chunk] = model.y_train[order].mean(axis=1)
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# random forest

@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 200
    max_depth: int = 8
    features_per_split: int | None = None  # default: ceil(sqrt(d))
    min_samples_split: int = 2
    min_samples_leaf: int = 1

    def __post_init__(self) -> None:
        if self.n_trees < 1 or self.max_depth < 1:
            raise ValueError("n_trees and max_depth must be positive")
        if self.min_samples_split < 2 or self.min_samples_leaf < 1:
            raise ValueError("bad minimum node sizes")


@dataclass
class _Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    prob: np.ndarray


@dataclass
class ForestModel:
    trees: list[_Tree]
    params: ForestParams
    seed: int
    n_features: int
    schema_hash: str | None = None


def _best_split(
    x: np.ndarray, y: np.ndarray, rows: np.ndarray, feats: np.ndarray, min_leaf: int
) -> tuple[int, float] | None:
    """Exact best Gini split over candidate features; ties go to the lowest
    feature index, then the lowest threshold."""
    m = rows.shape[0]
    cols = x[np.ix_(rows, feats)]
    order = np.argsort(cols, axis=0, kind="stable")
    svals = np.take_along_axis(cols, order, axis=0)
    sy = y[rows][order]

    pos_total = float(y[rows].sum())
    left_pos = np.cumsum(sy, axis=0)[:-1]
    left_cnt = np.arange(1, m, dtype=float)[:, None]
    right_pos = pos_total - left_pos
    right_cnt = m - left_cnt

    valid = svals[1:] > svals[:-1]
    if min_leaf > 1:
        valid &= (left_cnt >= min_leaf) & (right_cnt >= min_leaf)
    if not valid.any():
        return None

    pl = left_pos / left_cnt
    pr = right_pos / right_cnt
    gini_left = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
    gini_right = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
    weighted = (left_cnt * gini_left + right_cnt * gini_right) / m
    weighted = np.where(valid, weighted, np.inf)

    best = float(weighted.min())
    if not math.isfinite(best):
        return None
    positions = np.argwhere(weighted == best)
    choice: tuple[int, float] | None = None
    for pos, col in positions:
        feat = int(feats[col])
        lo, hi = float(svals[pos, col]), float(svals[pos + 1, col])
        thr = (lo + hi) / 2.0
        if thr >= hi:  # midpoint rounded up between adjacent floats
            thr = lo
        if choice is None or (feat, thr) < choice:
            choice = (feat, thr)
    return choice


def _grow_tree(
    x: np.ndarray, y: np.ndarray, rows: np.ndarray, params: ForestParams,
    nf: int, rng: np.random.Generator,
) -> _Tree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    prob: list[float] = []
    d = x.shape[1]

    def leaf(node_rows: np.ndarray) -> int:
        idx = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        prob.append(float(y[node_rows].mean()))
        return idx

    def build(node_rows: np.ndarray, depth: int) -> int:
        m = node_rows.shape[0]
        pos = float(y[node_rows].sum())
        if depth >= params.max_depth or m < params.min_samples_split or pos == 0.0 or pos == m:
            return leaf(node_rows)
        feats = np.sort(rng.choice(d, size=nf, replace=False))
        split = _best_split(x, y, node_rows, feats, params.min_samples_leaf)
        if split is None:
            return leaf(node_rows)
        feat, thr = split
        mask = x[node_rows, feat] <= thr
        idx = len(feature)
        feature.append(feat)
        threshold.append(thr)
        left.append(-1)
        right.append(-1)
        prob.append(float(y[node_rows].mean()))
        left_idx = build(node_rows[mask], depth + 1)
        right_idx = build(node_rows[~mask], depth + 1)
        left[idx] = left_idx
        right[idx] = right_idx
        return idx

    build(rows, 0)
    return _Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(prob, dtype=float),
    )


def train_forest(
    x: np.ndarray, y: np.ndarray, params: ForestParams, seed: int
) -> ForestModel:
    """Random forest of Gini trees on bootstrap resamples, deterministic in seed.

    Each tree runs off its own spawned substream, so trees could be built in
    parallel and still reproduce the sequential result bit for bit.
    """
    x, y = _check_design(x, y)
    if len(np.unique(y)) < 2:
        raise ValueError("random forest needs both classes present")
    n, d = x.shape
    nf = params.features_per_split or math.ceil(math.sqrt(d))
    nf = min(nf, d)
    seeds = np.random.SeedSequence(seed).spawn(params.n_trees)
    trees = []
    for tree_seed in seeds:
        rng = np.random.default_rng(tree_seed)
        rows = rng.integers(0, n, size=n)
        trees.append(_grow_tree(x, y, rows, params, nf, rng))
    return ForestModel(trees, params, seed, d)


def _tree_predict(tree: _Tree, x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    out = np.empty(n)
    idx = np.arange(n)
    node = np.zeros(n, dtype=np.int64)
    while idx.size:
        feats = tree.feature[node]
        at_leaf = feats < 0
        if at_leaf.any():
            out[idx[at_leaf]] = tree.prob[node[at_leaf]]
            idx = idx[~at_leaf]
            node = node[~at_leaf]
            feats = feats[~at_leaf]
        if not idx.size:
            break
        goes_left = x[idx, feats] <= tree.threshold[node]
        node = np.where(goes_left, tree.left[node], tree.right[node])
    return out


def forest_predict(model: ForestModel, x: np.ndarray) -> np.ndarray | float:
    """Mean of per-tree leaf class frequencies."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    mat = np.atleast_2d(x)
    if mat.shape[1] != model.n_features:
        raise ValueError(
            f"feature length {mat.shape[1]} does not match model dimension {model.n_features}"
        )
    acc = np.zeros(mat.shape[0])
    for tree in model.trees:
        acc += _tree_predict(tree, mat)
    acc /= len(model.trees)
    return float(acc[0]) if single else acc


def per_tree_probabilities(model: ForestModel, x: np.ndarray) -> np.ndarray:
    mat = np.atleast_2d(np.asarray(x, dtype=float))
    return np.stack([_tree_predict(tree, mat) for tree in model.trees])


# ---------------------------------------------------------------------------
# prediction dispatch + JSON serialization

Model = LinearModel | KnnModel | ForestModel


def predict_scores(model: Model, x: np.ndarray) -> np.ndarray:
    """Positive-class scores for any model kind (2-D input)."""
    if isinstance(model, LinearModel):
        return predict_proba(model, x) if model.task == "classification" else predict_linear(model, x)
    if isinstance(model, KnnModel):
        return knn_predict(model, x)
    return forest_predict(model, x)


def check_schema(model: Model, schema_hash: str) -> None:
    if model.schema_hash is not None and model.schema_hash != schema_hash:
        raise SchemaMismatchError(
            f"model was trained against schema {model.schema_hash[:12]}..., "
            f"got features from schema {schema_hash[:12]}..."
        )


def model_to_dict(model: Model) -> dict:
    if isinstance(model, LinearModel):
        return {
            "kind": "logistic" if model.task == "classification" else "ridge",
            "weights": [float(v) for v in model.weights],
            "intercept": float(model.intercept),
            "regularization": float(model.regularization),
            "schema_hash": model.schema_hash,
        }
    if isinstance(model, KnnModel):
        return {
            "kind": "knn",
            "k": int(model.k),
            "x_train": [[float(v) for v in row] for row in model.x_train],
            "y_train": [float(v) for v in model.y_train],
            "schema_hash": model.schema_hash,
        }
    return {
        "kind": "forest",
        "seed": int(model.seed),
        "n_features": int(model.n_features),
        "params": {
            "n_trees": model.params.n_trees,
            "max_depth": model.params.max_depth,
            "features_per_split": model.params.features_per_split,
            "min_samples_split": model.params.min_samples_split,
            "min_samples_leaf": model.params.min_samples_leaf,
        },
        "trees": [
            {
                "feature": [int(v) for v in t.feature],
                "threshold": [float(v) for v in t.threshold],
                "left": [int(v) for v in t.left],
                "right": [int(v) for v in t.right],
                "prob": [float(v) for v in t.prob],
            }
            for t in model.trees
        ],
        "schema_hash": model.schema_hash,
    }


def model_from_dict(payload: dict) -> Model:
    kind = payload["kind"]
    if kind in ("logistic", "ridge"):
        return LinearModel(
            weights=np.array(payload["weights"], dtype=float),
            intercept=float(payload["intercept"]),
            regularization=float(payload["regularization"]),
            task="classification" if kind == "logistic" else "regression",
            schema_hash=payload.get("schema_hash"),
        )
    if kind == "knn":
        return KnnModel(
            x_train=np.array(payload["x_train"], dtype=float),
            y_train=np.array(payload["y_train"], dtype=float),
            k=int(payload["k"]),
            schema_hash=payload.get("schema_hash"),
        )
    if kind == "forest":
        p = payload["params"]
        trees = [
            _Tree(
                np.array(t["feature"], dtype=np.int64),
                np.array(t["threshold"], dtype=float),
                np.array(t["left"], dtype=np.int64),
                np.array(t["right"], dtype=np.int64),
                np.array(t["prob"], dtype=float),
            )
            for t in payload["trees"]
        ]
        return ForestModel(
            trees=trees,
            params=ForestParams(
                n_trees=p["n_trees"],
                max_depth=p["max_depth"],
                features_per_split=p["features_per_split"],
                min_samples_split=p["min_samples_split"],
                min_samples_leaf=p["min_samples_leaf"],
            ),
            seed=int(payload["seed"]),
            n_features=int(payload["n_features"]),
            schema_hash=payload.get("schema_hash"),
        )
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model: Model, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path) -> Model:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
