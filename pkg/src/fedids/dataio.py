"""Loading, cleaning, partitioning and splitting of flow-record datasets.

CSV convention: comma separated, first row is the header, UTF-8, quoted
fields allowed, numeric fields may use scientific notation. The label
column is matched case-insensitively after trimming whitespace; it holds
class names that are resolved through a :class:`LabelMap`.

Cleaning drops (never imputes) rows with NaN, infinite or unparseable
feature values, then drops exact duplicates on (features, label). Both
drop counts are surfaced through :class:`LoadReport`.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ColumnSchema:
    """Names of the feature columns plus the label column.

    An empty ``feature_names`` tuple means "auto-select": every non-label
    column whose cells all parse as numbers becomes a feature, in header
    order.
    """

    feature_names: tuple[str, ...] = ()
    label_column: str = "Label"

    def __post_init__(self):
        if self.label_column.strip() == "":
            raise ConfigError("label_column must be non-empty")
        trimmed = tuple(n.strip() for n in self.feature_names)
        object.__setattr__(self, "feature_names", trimmed)
        if any(n == "" for n in trimmed):
            raise ConfigError("feature names must be non-empty")
        if len(set(trimmed)) != len(trimmed):
            raise ConfigError("duplicate feature names")
        if self.label_column.strip() in trimmed:
            raise ConfigError("label_column cannot also be a feature")


@dataclass(frozen=True)
class LabelMap:
    """Ordered mapping from class name to class id 0..K-1."""

    entries: tuple[tuple[str, int], ...]

    def __post_init__(self):
        ids = [cid for _, cid in self.entries]
        if sorted(ids) != list(range(len(self.entries))):
            raise ConfigError("class ids must be exactly 0..K-1 with no gaps")
        names = [name.strip().casefold() for name, _ in self.entries]
        if len(set(names)) != len(names):
            raise ConfigError("class names must be unique")

    @classmethod
    def from_names(cls, names) -> "LabelMap":
        return cls(tuple((name, i) for i, name in enumerate(names)))

    @property
    def n_classes(self) -> int:
        return len(self.entries)

    def names(self) -> list[str]:
        ordered = sorted(self.entries, key=lambda e: e[1])
        return [name for name, _ in ordered]

    def id_of(self, name: str) -> int:
        key = name.strip().casefold()
        for entry_name, cid in self.entries:
            if entry_name.strip().casefold() == key:
                return cid
        raise DataError(f"label value not in label map: {name!r}")

    def name_of(self, class_id: int) -> str:
        for entry_name, cid in self.entries:
            if cid == class_id:
                return entry_name
        raise DataError(f"unknown class id {class_id}")


#: Default 7-class traffic label map used throughout the pipeline.
TRAFFIC_LABELS = LabelMap.from_names(
    ["Benign", "Bot", "Brute Force", "DoS", "Infiltration", "Port Scan", "Web Attack"]
)


@dataclass(eq=False)
class Dataset:
    """Immutable feature matrix with integer class labels.

    ``features`` is N x D float64 with only finite values, ``labels`` is
    length N with every entry in 0..K-1. Arrays are copied and marked
    read-only so instances are safe to share across threads.
    """

    features: np.ndarray
    labels: np.ndarray
    schema: ColumnSchema
    label_map: LabelMap

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        labs = np.ascontiguousarray(self.labels, dtype=np.int64)
        if feats.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {feats.shape}")
        if labs.ndim != 1 or labs.shape[0] != feats.shape[0]:
            raise DataError("labels length must match feature rows")
        if feats.size and not np.all(np.isfinite(feats)):
            raise DataError("features contain NaN or infinite values")
        k = self.label_map.n_classes
        if labs.size and (labs.min() < 0 or labs.max() >= k):
            raise DataError(f"labels must lie in 0..{k - 1}")
        if self.schema.feature_names and len(self.schema.feature_names) != feats.shape[1]:
            raise DataError("schema feature count does not match feature columns")
        feats.setflags(write=False)
        labs.setflags(write=False)
        self.features = feats
        self.labels = labs

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.label_map.n_classes

    def feature_names(self) -> tuple[str, ...]:
        if self.schema.feature_names:
            return self.schema.feature_names
        return tuple(f"f{i}" for i in range(self.n_features))

    def take(self, indices) -> "Dataset":
        """New Dataset containing the given rows, in the given order."""
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.features[idx], self.labels[idx], self.schema, self.label_map)

    def class_indices(self, class_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == class_id)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.schema == other.schema
            and self.label_map == other.label_map
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class SplitPair:
    train: Dataset
    test: Dataset


@dataclass
class LoadReport:
    """Row accounting for one CSV load."""

    rows_read: int = 0
    rows_nan_dropped: int = 0
    rows_dup_dropped: int = 0
    notes: list[str] = field(default_factory=list)

    def lines(self) -> list[str]:
        return [
            f"rows_read={self.rows_read}",
            f"rows_nan_dropped={self.rows_nan_dropped}",
            f"rows_dup_dropped={self.rows_dup_dropped}",
        ]


def _parse_float_cells(cells) -> np.ndarray:
    """Correctly-rounded str-to-float64; blank or unparseable becomes NaN.

    Deliberately avoids pandas' fast-path converter, which can be off by
    one ulp and would break write/load round-trips.
    """
    values = np.asarray(cells, dtype=object)
    try:
        return values.astype(np.float64)
    except ValueError:
        pass
    out = np.empty(len(values), dtype=np.float64)
    for i, s in enumerate(values):
        try:
            out[i] = float(s)
        except ValueError:
            out[i] = np.nan
    return out


def _cell_is_numeric(s: str) -> bool:
    if s == "":
        return True  # missing value: the row drops, the column stays numeric
    try:
        float(s)
    except ValueError:
        return False
    return True


def _resolve_label_column(columns, label_column: str) -> str:
    wanted = label_column.strip().casefold()
    matches = [c for c in columns if str(c).strip().casefold() == wanted]
    if not matches:
        raise DataError(f"label column {label_column!r} not found in header")
    return matches[0]


def _resolve_feature_columns(df: pd.DataFrame, schema: ColumnSchema, label_col) -> list:
    by_trimmed = {str(c).strip(): c for c in df.columns}
    if schema.feature_names:
        missing = [n for n in schema.feature_names if n not in by_trimmed]
        if missing:
            raise DataError(f"feature columns missing from header: {missing}")
        return [by_trimmed[n] for n in schema.feature_names]
    # Auto-select: keep non-label columns where every cell is numeric or blank.
    selected = []
    for col in df.columns:
        if col == label_col:
            continue
        cells = df[col].str.strip()
        if all(_cell_is_numeric(s) for s in cells):
            selected.append(col)
    if not selected:
        raise DataError("no numeric feature columns found")
    return selected


def load_csv_with_report(
    path,
    schema: ColumnSchema = ColumnSchema(),
    label_map: LabelMap = TRAFFIC_LABELS,
) -> tuple[Dataset, LoadReport]:
    """Load and clean a CSV, returning the dataset and its row accounting."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    report = LoadReport(rows_read=len(df))

    label_col = _resolve_label_column(df.columns, schema.label_column)
    feature_cols = _resolve_feature_columns(df, schema, label_col)

    values = np.empty((len(df), len(feature_cols)), dtype=np.float64)
    for j, col in enumerate(feature_cols):
        values[:, j] = _parse_float_cells(df[col].str.strip())
    keep = np.all(np.isfinite(values), axis=1)
    report.rows_nan_dropped = int(len(df) - keep.sum())

    values = values[keep]
    raw_labels = df[label_col].str.strip().to_numpy()[keep]
    lookup = {name.strip().casefold(): cid for name, cid in label_map.entries}
    labels = np.empty(len(raw_labels), dtype=np.int64)
    for i, raw in enumerate(raw_labels):
        cid = lookup.get(str(raw).casefold())
        if cid is None:
            raise DataError(f"label value not in label map: {raw!r}")
        labels[i] = cid

    # Exact duplicates on (features, label); first occurrence wins.
    seen: set[bytes] = set()
    keep_idx = []
    for i in range(values.shape[0]):
        key = values[i].tobytes() + labels[i].tobytes()
        if key in seen:
            continue
        seen.add(key)
        keep_idx.append(i)
    report.rows_dup_dropped = values.shape[0] - len(keep_idx)
    values = values[keep_idx]
    labels = labels[keep_idx]

    if values.shape[0] == 0:
        raise DataError(f"no usable rows in {path}")

    resolved = ColumnSchema(
        feature_names=tuple(str(c).strip() for c in feature_cols),
        label_column=schema.label_column,
    )
    return Dataset(values, labels, resolved, label_map), report


def load_csv(
    path,
    schema: ColumnSchema = ColumnSchema(),
    label_map: LabelMap = TRAFFIC_LABELS,
) -> Dataset:
    """Load and clean a CSV (see :func:`load_csv_with_report`)."""
    data, report = load_csv_with_report(path, schema, label_map)
    logger.info("loaded %s: %s", path, " ".join(report.lines()))
    return data


def write_csv(data: Dataset, path) -> None:
    """Write a dataset back out with class names in the label column.

    Floats use Python repr (shortest round-trip form), so loading the file
    again reproduces the dataset bit for bit.
    """
    path = Path(path)
    names = data.feature_names()
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + [data.schema.label_column])
        for i in range(data.n_rows):
            row = [repr(float(v)) for v in data.features[i]]
            row.append(data.label_map.name_of(int(data.labels[i])))
            writer.writerow(row)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def partition(data: Dataset, n_parts: int, seed: int) -> list[Dataset]:
    """Stratified random partition into ``n_parts`` near-equal datasets.

    Within every class, row counts across parts differ by at most one.
    Left-over rows go to whichever parts currently hold the fewest rows
    (ties to the lowest part index), which keeps total part sizes within
    one row of each other as well. Classes with fewer rows than
    ``n_parts`` land in the lowest-index parts.
    """
    if n_parts < 2:
        raise ConfigError(f"n_parts must be >= 2, got {n_parts}")
    if data.n_rows < n_parts:
        raise DataError(f"cannot split {data.n_rows} rows into {n_parts} parts")
    rng = np.random.default_rng(seed)
    part_rows: list[list[np.ndarray]] = [[] for _ in range(n_parts)]
    totals = np.zeros(n_parts, dtype=np.int64)
    for cid in range(data.n_classes):
        idx = data.class_indices(cid)
        rng.shuffle(idx)
        cnt = idx.size
        sizes = np.full(n_parts, cnt // n_parts, dtype=np.int64)
        rem = cnt % n_parts
        if cnt < n_parts:
            extras = np.arange(rem)
        else:
            # Smallest-total parts first; stable sort keeps low indices on ties.
            extras = np.argsort(totals, kind="stable")[:rem]
        sizes[extras] += 1
        offset = 0
        for p in range(n_parts):
            part_rows[p].append(idx[offset : offset + sizes[p]])
            offset += sizes[p]
        totals += sizes
    parts = []
    for p in range(n_parts):
        rows = np.sort(np.concatenate(part_rows[p]))
        parts.append(data.take(rows))
    return parts


def train_test_split(data: Dataset, train_fraction: float, seed: int) -> SplitPair:
    """Stratified train/test split.

    The total train size is round-half-up(train_fraction * N), allocated
    per class by largest remainder so every class stays within one row of
    the requested fraction. A class with a single row always goes to the
    train side.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if data.n_rows == 0:
        raise DataError("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    counts = np.bincount(data.labels, minlength=data.n_classes)
    total_train = _round_half_up(train_fraction * data.n_rows)
    exact = train_fraction * counts
    train_counts = np.floor(exact).astype(np.int64)
    remainder = total_train - int(train_counts.sum())
    if remainder > 0:
        frac = exact - np.floor(exact)
        order = np.lexsort((np.arange(data.n_classes), -frac))
        for cid in list(order) * 2:  # second pass in case of saturated classes
            if remainder == 0:
                break
            if train_counts[cid] < counts[cid]:
                train_counts[cid] += 1
                remainder -= 1
    for cid in range(data.n_classes):
        if counts[cid] == 1 and train_counts[cid] == 0:
            train_counts[cid] = 1
            logger.warning(
                "class %r has a single row; forced into the train split",
                data.label_map.name_of(cid),
            )
    train_rows, test_rows = [], []
    for cid in range(data.n_classes):
        idx = data.class_indices(cid)
        rng.shuffle(idx)
        n_train = int(train_counts[cid])
        train_rows.append(idx[:n_train])
        test_rows.append(idx[n_train:])
    train_idx = np.sort(np.concatenate(train_rows))
    test_idx = np.sort(np.concatenate(test_rows))
    return SplitPair(train=data.take(train_idx), test=data.take(test_idx))


def class_histogram(data: Dataset) -> list[tuple[str, int]]:
    """Per-class row counts, ordered by class id."""
    counts = np.bincount(data.labels, minlength=data.n_classes)
    return [(data.label_map.name_of(cid), int(counts[cid])) for cid in range(data.n_classes)]


def concatenate(parts) -> Dataset:
    """Stack datasets that share a schema and label map."""
    parts = list(parts)
    if not parts:
        raise ConfigError("concatenate needs at least one dataset")
    first = parts[0]
    for p in parts[1:]:
        if p.schema != first.schema or p.label_map != first.label_map:
            raise DataError("datasets to concatenate must share schema and label map")
    feats = np.concatenate([p.features for p in parts], axis=0)
    labs = np.concatenate([p.labels for p in parts], axis=0)
    return Dataset(feats, labs, first.schema, first.label_map)
