"""Class rebalancing and outlier pruning.

Two stages, applied in this order: synthetic minority oversampling brings
each targeted class up to a configured count, then per-class isolation
forests drop the most anomalous fraction of every class (oversampling can
itself introduce outliers, so pruning runs second).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .dataio import Dataset
from .errors import ConfigError, DataError

_EULER_GAMMA = 0.5772156649
_KNN_CHUNK = 512


# ---------------------------------------------------------------------------
# SMOTE


@dataclass(frozen=True)
class SmoteConfig:
    """Oversampling targets: class_id -> desired final row count."""

    targets: dict[int, int]
    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ConfigError(f"k_neighbors must be >= 1, got {self.k_neighbors}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        for cid, target in self.targets.items():
            if target < 0:
                raise ConfigError(f"target for class {cid} must be non-negative")


def _k_nearest(x: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest same-set neighbors of every row (self excluded).

    Distance ties resolve to the lowest row index (stable argsort). Works in
    row chunks so the full pairwise distance matrix never materializes.
    """
    n = x.shape[0]
    sq = np.einsum("ij,ij->i", x, x)
    nearest = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, _KNN_CHUNK):
        stop = min(start + _KNN_CHUNK, n)
        block = x[start:stop]
        d = sq[start:stop, None] + sq[None, :] - 2.0 * (block @ x.T)
        np.maximum(d, 0.0, out=d)
        d[np.arange(stop - start), np.arange(start, stop)] = np.inf
        order = np.argsort(d, axis=1, kind="stable")
        nearest[start:stop] = order[:, :k]
    return nearest


def smote_resample(data: Dataset, cfg: SmoteConfig) -> Dataset:
    """Append synthetic rows until each targeted class reaches its target.

    Every synthetic row is x + u * (x_nn - x) for a random class row x, a
    random one of its k nearest same-class neighbors x_nn (k clamps to
    class_count - 1), and u uniform in [0, 1]. Original rows are kept
    verbatim and keep their order; synthetic rows append per class in
    ascending class id.
    """
    counts = np.bincount(data.labels, minlength=data.n_classes)
    for cid, target in cfg.targets.items():
        if not 0 <= cid < data.n_classes:
            raise DataError(f"target class {cid} outside 0..{data.n_classes - 1}")
        if target < counts[cid]:
            raise DataError(
                f"class {cid} target {target} below current count {counts[cid]}"
            )
        if counts[cid] < 2 and target > counts[cid]:
            raise DataError(f"class {cid} needs >= 2 rows to synthesize from")

    feats = [data.features]
    labs = [data.labels]
    for cid in sorted(cfg.targets):
        extra = cfg.targets[cid] - int(counts[cid])
        if extra == 0:
            continue
        rows = data.class_indices(cid)
        x = data.features[rows]
        k_eff = min(cfg.k_neighbors, len(rows) - 1)
        nearest = _k_nearest(x, k_eff)
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, cid]))
        base = rng.integers(0, len(rows), size=extra)
        pick = rng.integers(0, k_eff, size=extra)
        u = rng.random(extra)
        neighbor = nearest[base, pick]
        synth = x[base] + u[:, None] * (x[neighbor] - x[base])
        feats.append(synth)
        labs.append(np.full(extra, cid, dtype=np.int64))
    return Dataset(np.concatenate(feats), np.concatenate(labs), data.schema, data.label_map)


# ---------------------------------------------------------------------------
# Isolation forest


@dataclass(frozen=True)
class IsoLeaf:
    """Terminal node: number of training rows that reached it."""

    size: int


@dataclass(frozen=True)
class IsoSplit:
    """Internal node: rows with value < threshold go left, the rest right."""

    feature: int
    threshold: float
    left: "IsoNode"
    right: "IsoNode"


IsoNode = Union[IsoLeaf, IsoSplit]


@dataclass(frozen=True)
class IsolationTree:
    root: IsoNode

    def height(self) -> int:
        def walk(node):
            if isinstance(node, IsoLeaf):
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)


@dataclass(frozen=True)
class IsolationForest:
    trees: tuple[IsolationTree, ...]
    subsample_size: int
    n_trees: int
    normalizer: float  # c(subsample_size): mean unsuccessful-search depth
    n_features: int


def average_path_length(n: int) -> float:
    """c(n): expected isolation depth of a uniformly random point among n."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    harmonic = math.log(n - 1) + _EULER_GAMMA
    return 2.0 * harmonic - 2.0 * (n - 1) / n


def _grow(x: np.ndarray, rng: np.random.Generator, depth: int, limit: int) -> IsoNode:
    if len(x) <= 1 or depth >= limit:
        return IsoLeaf(size=len(x))
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    candidates = np.flatnonzero(lo < hi)
    if candidates.size == 0:  # all rows identical
        return IsoLeaf(size=len(x))
    feature = int(candidates[rng.integers(candidates.size)])
    f_lo, f_hi = float(lo[feature]), float(hi[feature])
    threshold = float(rng.uniform(f_lo, f_hi))
    if not f_lo < threshold < f_hi:
        threshold = float(np.nextafter(f_lo, f_hi))
        if not f_lo < threshold < f_hi:
            return IsoLeaf(size=len(x))  # no representable interior point
    mask = x[:, feature] < threshold
    return IsoSplit(
        feature=feature,
        threshold=threshold,
        left=_grow(x[mask], rng, depth + 1, limit),
        right=_grow(x[~mask], rng, depth + 1, limit),
    )


def fit_isolation_forest(
    data: Dataset,
    n_trees: int = 100,
    subsample_size: int = 256,
    seed: int = 0,
) -> IsolationForest:
    """Fit n_trees isolation trees on independent uniform subsamples.

    The subsample size clamps to the dataset size; trees never grow past
    ceil(log2 psi) levels. Each tree's random stream derives from
    (seed, tree_index), so fits are reproducible and trees could be built
    in parallel without changing the result.
    """
    if n_trees < 1:
        raise ConfigError(f"n_trees must be >= 1, got {n_trees}")
    if subsample_size < 2:
        raise ConfigError(f"subsample_size must be >= 2, got {subsample_size}")
    if data.n_rows < 2:
        raise DataError("isolation forest needs at least 2 rows")
    psi = min(subsample_size, data.n_rows)
    limit = math.ceil(math.log2(psi))
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng(np.random.SeedSequence([seed, t]))
        rows = rng.choice(data.n_rows, size=psi, replace=False)
        trees.append(IsolationTree(root=_grow(data.features[rows], rng, 0, limit)))
    return IsolationForest(
        trees=tuple(trees),
        subsample_size=psi,
        n_trees=n_trees,
        normalizer=average_path_length(psi),
        n_features=data.n_features,
    )


def _path_lengths(node: IsoNode, x: np.ndarray, idx: np.ndarray, depth: int, out: np.ndarray):
    if isinstance(node, IsoLeaf):
        out[idx] = depth + average_path_length(node.size)
        return
    mask = x[idx, node.feature] < node.threshold
    _path_lengths(node.left, x, idx[mask], depth + 1, out)
    _path_lengths(node.right, x, idx[~mask], depth + 1, out)


def anomaly_scores(forest: IsolationForest, x: np.ndarray) -> np.ndarray:
    """Score every row of x; higher means more isolated (more anomalous)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != forest.n_features:
        raise DataError(f"expected (n, {forest.n_features}) features, got {x.shape}")
    total = np.zeros(len(x), dtype=np.float64)
    idx = np.arange(len(x))
    depths = np.empty(len(x), dtype=np.float64)
    for tree in forest.trees:
        _path_lengths(tree.root, x, idx, 0, depths)
        total += depths
    mean_depth = total / len(forest.trees)
    return np.power(2.0, -mean_depth / forest.normalizer)


def anomaly_score(forest: IsolationForest, x: np.ndarray) -> float:
    """Score one feature vector: s = 2^(-E[h(x)] / c(psi)), in (0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError(f"expected a single feature vector, got shape {x.shape}")
    return float(anomaly_scores(forest, x[None, :])[0])


# ---------------------------------------------------------------------------
# Outlier removal


@dataclass
class RemovalReport:
    """Rows removed per class id."""

    removed: dict[int, int] = field(default_factory=dict)

    def lines(self) -> list[str]:
        return [f"class_{cid}_removed={n}" for cid, n in sorted(self.removed.items())]


def remove_outliers_with_report(
    data: Dataset,
    contamination: float,
    n_trees: int = 100,
    subsample_size: int = 256,
    seed: int = 0,
) -> tuple[Dataset, RemovalReport]:
    """Drop the floor(contamination * count) highest-scoring rows per class.

    Each class gets its own forest, so one class's geometry never decides
    another's outliers. Score ties resolve to the lowest row index; the
    surviving rows keep their original order.
    """
    if not 0.0 <= contamination < 1.0:
        raise ConfigError(f"contamination must be in [0, 1), got {contamination}")
    keep = np.ones(data.n_rows, dtype=bool)
    report = RemovalReport()
    for cid in range(data.n_classes):
        rows = data.class_indices(cid)
        n_remove = math.floor(contamination * len(rows))
        report.removed[cid] = n_remove
        if n_remove == 0:
            continue
        class_seed = int(np.random.SeedSequence([seed, cid]).generate_state(1)[0])
        forest = fit_isolation_forest(
            data.take(rows), n_trees=n_trees, subsample_size=subsample_size, seed=class_seed
        )
        scores = anomaly_scores(forest, data.features[rows])
        worst_first = np.lexsort((np.arange(len(rows)), -scores))
        keep[rows[worst_first[:n_remove]]] = False
    return data.take(np.flatnonzero(keep)), report


def remove_outliers(
    data: Dataset,
    contamination: float,
    n_trees: int = 100,
    subsample_size: int = 256,
    seed: int = 0,
) -> Dataset:
    """Per-class outlier pruning (see :func:`remove_outliers_with_report`)."""
    pruned, _ = remove_outliers_with_report(
        data, contamination, n_trees=n_trees, subsample_size=subsample_size, seed=seed
    )
    return pruned
