"""Multiclass gradient-boosted decision trees with grid-search tuning.

Softmax objective. Each boosting iteration fits one regression tree per
class to the negative gradient (one-hot truth minus predicted
probability), choosing splits by variance reduction of that target and
setting leaf values by a regularized Newton step sum(g) / (sum(h) + l2),
scaled by the learning rate. Exact greedy split search over midpoint
thresholds; no row or feature subsampling, so fitting is fully
deterministic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataio import Dataset, train_test_split
from .errors import ConfigError, DataError

_PROBA_CLAMP = 1e-15


@dataclass(frozen=True)
class GbdtParams:
    depth: int = 3
    iterations: int = 50
    learning_rate: float = 0.5
    l2_leaf_reg: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if self.l2_leaf_reg < 0.0:
            raise ConfigError(f"l2_leaf_reg must be >= 0, got {self.l2_leaf_reg}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


@dataclass(eq=False)
class RegressionTree:
    """Flat-array binary tree; rows go left iff value <= threshold.

    ``feature[i] == -1`` marks node i as a leaf carrying ``value[i]``; leaf
    children point back at the leaf itself so batched descent can run a
    fixed number of steps without branching.
    """

    feature: np.ndarray  # int32; -1 at leaves
    threshold: np.ndarray  # float64; 0.0 at leaves
    left: np.ndarray  # int32
    right: np.ndarray  # int32
    value: np.ndarray  # float64; 0.0 at internal nodes

    def __post_init__(self):
        for name, dtype in (
            ("feature", np.int32),
            ("threshold", np.float64),
            ("left", np.int32),
            ("right", np.int32),
            ("value", np.float64),
        ):
            arr = np.ascontiguousarray(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            setattr(self, name, arr)
        if not np.all(np.isfinite(self.threshold)):
            raise DataError("tree thresholds must be finite")

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def height(self) -> int:
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))

        return walk(0)

    def apply(self, x: np.ndarray, steps: int) -> np.ndarray:
        """Leaf values for every row of x; steps >= tree height."""
        node = np.zeros(len(x), dtype=np.int32)
        for _ in range(steps):
            feat = self.feature[node]
            go_left = x[np.arange(len(x)), np.maximum(feat, 0)] <= self.threshold[node]
            node = np.where(feat < 0, node, np.where(go_left, self.left[node], self.right[node]))
        return self.value[node]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RegressionTree):
            return NotImplemented
        return (
            np.array_equal(self.feature, other.feature)
            and np.array_equal(self.threshold, other.threshold)
            and np.array_equal(self.left, other.left)
            and np.array_equal(self.right, other.right)
            and np.array_equal(self.value, other.value)
        )


@dataclass(eq=False)
class GbdtModel:
    """Fitted booster: trees[t][k] is iteration t's tree for class k.

    A model with zero tree rows is legal (it predicts from base_scores
    alone); fitted models always carry params.iterations rows.
    """

    params: GbdtParams
    n_classes: int
    n_features: int
    trees: tuple[tuple[RegressionTree, ...], ...]
    base_scores: np.ndarray  # length K; log class priors, -inf for absent classes

    def __post_init__(self):
        scores = np.ascontiguousarray(self.base_scores, dtype=np.float64)
        if scores.shape != (self.n_classes,):
            raise DataError("base_scores length must equal n_classes")
        if np.any(np.isnan(scores)) or np.any(scores == np.inf):
            raise DataError("base_scores must be finite or -inf")
        scores.setflags(write=False)
        self.base_scores = scores
        self.trees = tuple(tuple(row) for row in self.trees)
        for row in self.trees:
            if len(row) != self.n_classes:
                raise DataError("each iteration must carry one tree per class")
            for tree in row:
                internal = tree.feature[tree.feature >= 0]
                if internal.size and internal.max() >= self.n_features:
                    raise DataError("tree references a feature beyond n_features")
        if self.trees and len(self.trees) != self.params.iterations:
            raise DataError("tree rows must match params.iterations")

    @property
    def n_iterations(self) -> int:
        return len(self.trees)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GbdtModel):
            return NotImplemented
        return (
            self.params == other.params
            and self.n_classes == other.n_classes
            and self.n_features == other.n_features
            and np.array_equal(self.base_scores, other.base_scores)
            and self.trees == other.trees
        )


# ---------------------------------------------------------------------------
# fitting


def _leaf(value: float) -> RegressionTree:
    return RegressionTree(
        feature=np.array([-1], dtype=np.int32),
        threshold=np.zeros(1),
        left=np.zeros(1, dtype=np.int32),
        right=np.zeros(1, dtype=np.int32),
        value=np.array([value]),
    )


class _TreeBuilder:
    """Grows one regression tree on (gradient, hessian) targets."""

    def __init__(self, x: np.ndarray, g: np.ndarray, h: np.ndarray, params: GbdtParams):
        self.x = x
        self.g = g
        self.h = h
        self.lam = params.l2_leaf_reg
        self.lr = params.learning_rate
        self.max_depth = params.depth
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _new_node(self) -> int:
        i = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(i)
        self.right.append(i)
        self.value.append(0.0)
        return i

    def _leaf_value(self, rows: np.ndarray) -> float:
        return self.lr * float(self.g[rows].sum() / (self.h[rows].sum() + self.lam))

    def _best_split(self, rows: np.ndarray):
        """(feature, threshold, left_rows, right_rows), or None if no gain.

        Gain is the variance-reduction surrogate sum_L^2/n_L + sum_R^2/n_R
        (the parent term is constant per node). Ties break toward the
        lowest feature index, then the lowest threshold.
        """
        x = self.x[rows]
        g = self.g[rows]
        n = len(rows)
        order = np.argsort(x, axis=0, kind="stable")
        xs = np.take_along_axis(x, order, axis=0)
        gs = np.cumsum(g[order], axis=0)
        total = gs[-1]
        left_sum = gs[:-1]
        n_left = np.arange(1, n, dtype=np.float64)[:, None]
        score = left_sum**2 / n_left + (total - left_sum) ** 2 / (n - n_left)
        baseline = float((g.sum() ** 2) / n)
        score[xs[1:] == xs[:-1]] = -np.inf
        flat = np.ravel(score.T)  # feature-major: ties pick lowest feature
        best = int(np.argmax(flat))
        if flat[best] <= baseline + 1e-9 * (abs(baseline) + 1.0):
            return None  # no split with a real variance reduction
        feat, pos = divmod(best, n - 1)
        lo = float(xs[pos, feat])
        hi = float(xs[pos + 1, feat])
        mid = lo + (hi - lo) / 2.0
        if not lo <= mid < hi:
            mid = lo
        mask = x[:, feat] <= mid
        return feat, mid, rows[mask], rows[~mask]

    def build(self, rows: np.ndarray) -> RegressionTree:
        root = self._new_node()
        self._grow(root, rows, 0)
        return RegressionTree(
            feature=np.array(self.feature, dtype=np.int32),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int32),
            right=np.array(self.right, dtype=np.int32),
            value=np.array(self.value, dtype=np.float64),
        )

    def _grow(self, node: int, rows: np.ndarray, depth: int):
        if depth >= self.max_depth or len(rows) < 2:
            self.value[node] = self._leaf_value(rows)
            return
        split = self._best_split(rows)
        if split is None:
            self.value[node] = self._leaf_value(rows)
            return
        feat, mid, left_rows, right_rows = split
        self.feature[node] = feat
        self.threshold[node] = mid
        # children are numbered in pre-order so the flat arrays are canonical:
        # equal trees have equal arrays, whatever path built them
        left = self._new_node()
        self.left[node] = left
        self._grow(left, left_rows, depth + 1)
        right = self._new_node()
        self.right[node] = right
        self._grow(right, right_rows, depth + 1)


def _softmax(margins: np.ndarray) -> np.ndarray:
    shifted = margins - margins.max(axis=1, keepdims=True)
    p = np.exp(shifted)
    p /= p.sum(axis=1, keepdims=True)
    return p


def _log_priors(labels: np.ndarray, n_classes: int) -> np.ndarray:
    counts = np.bincount(labels, minlength=n_classes).astype(np.float64)
    with np.errstate(divide="ignore"):
        return np.log(counts / counts.sum())


def fit(train: Dataset, params: GbdtParams = GbdtParams()) -> GbdtModel:
    """Boost params.iterations rounds of one tree per class.

    Classes absent from the training data get base score -inf (probability
    zero) and no-op trees. Training data containing a single distinct
    class is flagged with a RuntimeWarning; the model then always predicts
    that class.
    """
    if train.n_rows == 0:
        raise DataError("training data is empty")
    k = train.n_classes
    labels = train.labels
    if len(np.unique(labels)) == 1:
        warnings.warn(
            f"training data contains a single class ({int(labels[0])}); "
            "the model will always predict it",
            RuntimeWarning,
            stacklevel=2,
        )
    x = train.features
    base = _log_priors(labels, k)
    onehot = np.zeros((train.n_rows, k), dtype=np.float64)
    onehot[np.arange(train.n_rows), labels] = 1.0
    margins = np.broadcast_to(base, (train.n_rows, k)).copy()
    all_rows = np.arange(train.n_rows)
    rounds = []
    for _ in range(params.iterations):
        p = _softmax(margins)
        grad = onehot - p
        hess = p * (1.0 - p)
        row = []
        for c in range(k):
            if np.all(grad[:, c] == 0.0):
                tree = _leaf(0.0)
            else:
                tree = _TreeBuilder(x, grad[:, c], hess[:, c], params).build(all_rows)
            row.append(tree)
            margins[:, c] += tree.apply(x, params.depth)
        rounds.append(tuple(row))
    return GbdtModel(
        params=params,
        n_classes=k,
        n_features=train.n_features,
        trees=tuple(rounds),
        base_scores=base,
    )


# ---------------------------------------------------------------------------
# prediction


def _margins(model: GbdtModel, x: np.ndarray) -> np.ndarray:
    out = np.broadcast_to(model.base_scores, (len(x), model.n_classes)).copy()
    steps = model.params.depth
    for row in model.trees:
        for c, tree in enumerate(row):
            out[:, c] += tree.apply(x, steps)
    return out


def _as_batch(model: GbdtModel, x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != model.n_features:
        raise DataError(f"expected {model.n_features} features, got shape {np.shape(x)}")
    return arr, single


def predict_proba(model: GbdtModel, x) -> np.ndarray:
    """Class probabilities; accepts one vector (D,) or a batch (N, D)."""
    batch, single = _as_batch(model, x)
    proba = _softmax(_margins(model, batch))
    return proba[0] if single else proba


def predict(model: GbdtModel, x) -> np.ndarray | int:
    """argmax class id(s); ties break to the lowest class id."""
    batch, single = _as_batch(model, x)
    ids = np.argmax(_softmax(_margins(model, batch)), axis=1)
    return int(ids[0]) if single else ids


def logloss(model: GbdtModel, data: Dataset) -> float:
    """Mean -ln p(true class), probabilities clamped away from 0 and 1."""
    if data.n_rows == 0:
        raise DataError("cannot score an empty dataset")
    proba = predict_proba(model, data.features)
    p_true = np.clip(proba[np.arange(data.n_rows), data.labels], _PROBA_CLAMP, 1 - _PROBA_CLAMP)
    return float(-np.log(p_true).mean())


def staged_logloss(model: GbdtModel, data: Dataset) -> list[float]:
    """Log-loss after 0, 1, ..., n_iterations boosting rounds."""
    if data.n_rows == 0:
        raise DataError("cannot score an empty dataset")
    margins = np.broadcast_to(model.base_scores, (data.n_rows, model.n_classes)).copy()
    rows = np.arange(data.n_rows)

    def loss():
        p = np.clip(_softmax(margins)[rows, data.labels], _PROBA_CLAMP, 1 - _PROBA_CLAMP)
        return float(-np.log(p).mean())

    out = [loss()]
    for row in model.trees:
        for c, tree in enumerate(row):
            margins[:, c] += tree.apply(data.features, model.params.depth)
        out.append(loss())
    return out


def accuracy_on(model: GbdtModel, data: Dataset) -> float:
    return float(np.mean(predict(model, data.features) == data.labels))


# ---------------------------------------------------------------------------
# grid search


@dataclass(frozen=True)
class GridSpec:
    depths: tuple[int, ...] = (3, 4, 5, 6, 7)
    iterations: tuple[int, ...] = (50, 100, 150, 200)
    learning_rates: tuple[float, ...] = (0.1, 0.25, 0.5, 0.75, 1.0)

    def __post_init__(self):
        if not self.depths or not self.iterations or not self.learning_rates:
            raise ConfigError("grid axes must be non-empty")
        # values must satisfy the same bounds GbdtParams enforces
        for d in self.depths:
            if d < 1:
                raise ConfigError(f"grid depth {d} out of range")
        for it in self.iterations:
            if it < 1:
                raise ConfigError(f"grid iterations {it} out of range")
        for lr in self.learning_rates:
            if not 0.0 < lr <= 1.0:
                raise ConfigError(f"grid learning rate {lr} out of range")

    def combinations(self) -> int:
        return len(self.depths) * len(self.iterations) * len(self.learning_rates)


@dataclass(frozen=True)
class GridResult:
    params: GbdtParams
    accuracy: float


def grid_search(
    train: Dataset,
    grid: GridSpec = GridSpec(),
    validation_fraction: float = 0.25,
    seed: int = 0,
) -> tuple[GbdtParams, GbdtModel, list[GridResult]]:
    """Exhaustive search over the grid, scored on a stratified slice.

    Enumeration runs depth-major, then iterations, then learning rate, all
    ascending; a strictly better validation accuracy is required to
    displace the incumbent, so ties resolve to the lowest depth, then the
    fewest iterations, then the lowest learning rate. The winner is refit
    on all of ``train``.
    """
    if not 0.0 < validation_fraction < 1.0:
        raise ConfigError(
            f"validation_fraction must be in (0, 1), got {validation_fraction}"
        )
    split_seed = int(np.random.SeedSequence([seed, 0]).generate_state(1)[0])
    pair = train_test_split(train, 1.0 - validation_fraction, seed=split_seed)
    report: list[GridResult] = []
    best: GridResult | None = None
    for depth in grid.depths:
        for iters in grid.iterations:
            for lr in grid.learning_rates:
                params = GbdtParams(
                    depth=depth, iterations=iters, learning_rate=lr, seed=seed
                )
                model = fit(pair.train, params)
                score = accuracy_on(model, pair.test)
                result = GridResult(params=params, accuracy=score)
                report.append(result)
                if best is None or score > best.accuracy:
                    best = result
    winner = fit(train, best.params)
    return best.params, winner, report
