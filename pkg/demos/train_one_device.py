#!/usr/bin/env python3
# Tune and train a single device's booster, watching the loss fall.

import numpy as np

from fedids import (
    ColumnSchema,
    Dataset,
    GridSpec,
    LabelMap,
    accuracy_on,
    confusion,
    grid_search,
    predict,
    summarize,
    train_test_split,
)
from fedids.gbdt import staged_logloss

rng = np.random.default_rng(42)
labels = LabelMap.from_names(["benign", "dos", "probe"])
xs, ys = [], []
for cid in range(3):
    center = rng.uniform(-4, 4, size=4)
    xs.append(rng.normal(center, 1.2, size=(400, 4)))
    ys.append(np.full(400, cid))
data = Dataset(np.vstack(xs), np.concatenate(ys), ColumnSchema(), labels)

pair = train_test_split(data, 0.8, seed=1)
grid = GridSpec(depths=(2, 3, 4), iterations=(20, 40), learning_rates=(0.25, 0.5))
params, model, trials = grid_search(pair.train, grid, seed=1)

print(f"searched {len(trials)} combinations, picked {params}")

losses = staged_logloss(model, pair.test)
for i in range(0, len(losses), 5):
    bar = "#" * int(losses[i] * 40)
    print(f"  iter {i:3d}  logloss {losses[i]:.4f}  {bar}")

print(f"\nheld-out accuracy: {accuracy_on(model, pair.test):.4f}")
scores = summarize(confusion(pair.test.labels, predict(model, pair.test.features), 3))
print(f"macro precision {scores.precision:.4f}, macro recall {scores.recall:.4f}, "
      f"kappa {scores.kappa:.4f}")
