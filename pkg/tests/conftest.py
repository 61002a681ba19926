"""Shared fixtures: synthetic datasets shaped like real traffic captures."""

import numpy as np
import pytest

from fedids.dataio import TRAFFIC_LABELS, ColumnSchema, Dataset

# Per-class row counts matching a real-world capture of the kind the pipeline targets
# (heavily imbalanced: two dominant classes, one nearly-empty one).
CAPTURE_COUNTS = {
    "Benign": 22728,
    "Bot": 1966,
    "Brute Force": 2767,
    "DoS": 18984,
    "Infiltration": 36,
    "Port Scan": 7946,
    "Web Attack": 2180,
}


def make_blobs(counts, n_features=6, spread=1.0, seed=0, label_map=TRAFFIC_LABELS):
    """Gaussian blob per class, well separated (means 10 units apart)."""
    rng = np.random.default_rng(seed)
    feats, labs = [], []
    for cid in range(label_map.n_classes):
        n = counts[label_map.name_of(cid)] if isinstance(counts, dict) else counts[cid]
        center = np.zeros(n_features)
        center[cid % n_features] = 10.0 * (1 + cid // n_features)
        center += cid  # break symmetry between classes sharing an axis
        feats.append(rng.normal(center, spread, size=(n, n_features)))
        labs.append(np.full(n, cid, dtype=np.int64))
    order = rng.permutation(sum(len(l) for l in labs))
    features = np.concatenate(feats)[order]
    labels = np.concatenate(labs)[order]
    return Dataset(features, labels, ColumnSchema(), label_map)


@pytest.fixture(scope="session")
def capture_like_dataset():
    """56607-row imbalanced dataset with realistic per-class counts."""
    return make_blobs(CAPTURE_COUNTS, n_features=8, spread=2.0, seed=12345)


@pytest.fixture(scope="session")
def blob_dataset():
    """Balanced, easily separable 3500-row dataset (500 rows x 7 classes)."""
    return make_blobs([500] * 7, n_features=6, spread=1.0, seed=777)


@pytest.fixture(scope="session")
def small_blob_dataset():
    """Tiny separable dataset for fast model-fitting tests."""
    return make_blobs([40, 30, 35, 45, 25, 30, 35], n_features=4, spread=0.5, seed=99)
