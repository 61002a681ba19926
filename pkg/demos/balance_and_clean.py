#!/usr/bin/env python3
"""Walk a skewed synthetic capture through the balancing pipeline.

Oversample the rare classes up to round numbers, then prune the most
isolated rows per class, printing the class histogram at every stage.
"""

import numpy as np

from fedids import (
    ColumnSchema,
    Dataset,
    LabelMap,
    SmoteConfig,
    class_histogram,
    remove_outliers,
    smote_resample,
)

labels = LabelMap.from_names(["normal", "scan", "flood", "beacon"])
rng = np.random.default_rng(7)

# heavily skewed: one dominant class, three rare ones
counts = [4000, 120, 260, 45]
chunks, ys = [], []
for cid, n in enumerate(counts):
    center = rng.uniform(-6, 6, size=5)
    chunks.append(rng.normal(center, 1.0, size=(n, 5)))
    ys.append(np.full(n, cid))
data = Dataset(np.vstack(chunks), np.concatenate(ys), ColumnSchema(), labels)

print("raw capture:")
for name, n in class_histogram(data):
    print(f"  {name:8s} {n:6d}")

balanced = smote_resample(
    data,
    SmoteConfig(targets={1: 1500, 2: 1500, 3: 1500}, k_neighbors=5, seed=7),
)
print("\nafter oversampling the three rare classes to 1500:")
for name, n in class_histogram(balanced):
    print(f"  {name:8s} {n:6d}")

cleaned = remove_outliers(balanced, contamination=0.05, seed=7)
print("\nafter dropping the 5% most isolated rows of each class:")
for name, n in class_histogram(cleaned):
    print(f"  {name:8s} {n:6d}")

print(f"\n{balanced.n_rows - cleaned.n_rows} rows removed in total")
