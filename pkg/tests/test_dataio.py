"""Loading, cleaning, partitioning and splitting."""

import logging

import numpy as np
import pytest

from fedids.dataio import (
    TRAFFIC_LABELS,
    ColumnSchema,
    Dataset,
    LabelMap,
    class_histogram,
    concatenate,
    load_csv,
    load_csv_with_report,
    partition,
    train_test_split,
    write_csv,
)
from fedids.errors import ConfigError, DataError

from conftest import make_blobs


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


AB_MAP = LabelMap.from_names(["A", "B"])


def ab_dataset(n_a, n_b, seed=0):
    return make_blobs([n_a, n_b], n_features=3, seed=seed, label_map=AB_MAP)


class TestLabelMap:
    def test_default_map_order(self):
        assert TRAFFIC_LABELS.names() == [
            "Benign",
            "Bot",
            "Brute Force",
            "DoS",
            "Infiltration",
            "Port Scan",
            "Web Attack",
        ]
        assert TRAFFIC_LABELS.id_of("Benign") == 0
        assert TRAFFIC_LABELS.id_of("Web Attack") == 6

    def test_lookup_is_trimmed_and_case_insensitive(self):
        assert TRAFFIC_LABELS.id_of("  benign ") == 0
        assert TRAFFIC_LABELS.id_of("PORT SCAN") == 5

    def test_unknown_name_raises(self):
        with pytest.raises(DataError):
            TRAFFIC_LABELS.id_of("Heartbleed")

    def test_gapped_ids_rejected(self):
        with pytest.raises(ConfigError):
            LabelMap((("A", 0), ("B", 2)))

    def test_duplicate_names_rejected(self):
        with pytest.raises(ConfigError):
            LabelMap.from_names(["A", " a "])


class TestSchema:
    def test_duplicate_features_rejected(self):
        with pytest.raises(ConfigError):
            ColumnSchema(feature_names=("x", "x"))

    def test_label_cannot_be_feature(self):
        with pytest.raises(ConfigError):
            ColumnSchema(feature_names=("Label",))

    def test_names_are_trimmed(self):
        s = ColumnSchema(feature_names=(" a ", "b"))
        assert s.feature_names == ("a", "b")


class TestLoadCsv:
    def test_row_accounting(self, tmp_path):
        """NaN/inf/unparseable rows drop first, then exact duplicates."""
        f = tmp_path / "d.csv"
        write_lines(
            f,
            [
                "f1,f2,Label",
                "1.0,2.0,Benign",
                "3.5,4.5,DoS",
                "inf,1.0,Benign",
                "nan,2.0,Bot",
                "abc,2.0,Bot",
                "1.0,2.0,Benign",
                "5.0,6.0,Port Scan",
                "7.0,8.0,Web Attack",
                "9.0,10.0,Bot",
                "11.0,12.0,DoS",
            ],
        )
        schema = ColumnSchema(feature_names=("f1", "f2"))
        data, report = load_csv_with_report(f, schema)
        assert report.rows_read == 10
        assert report.rows_nan_dropped == 3
        assert report.rows_dup_dropped == 1
        assert data.n_rows == 6
        assert report.lines() == [
            "rows_read=10",
            "rows_nan_dropped=3",
            "rows_dup_dropped=1",
        ]

    def test_first_duplicate_occurrence_wins(self, tmp_path):
        f = tmp_path / "d.csv"
        write_lines(f, ["a,Label", "1.0,Benign", "2.0,DoS", "1.0,Benign", "1.0,DoS"])
        data = load_csv(f, ColumnSchema(feature_names=("a",)))
        # same features, different label: not a duplicate
        assert data.n_rows == 3
        assert list(data.labels) == [0, 3, 3]

    def test_label_column_found_case_insensitively(self, tmp_path):
        f = tmp_path / "d.csv"
        write_lines(f, ["a, LABEL ", "1.0,Benign"])
        data = load_csv(f, ColumnSchema(feature_names=("a",)))
        assert data.n_rows == 1
        assert data.labels[0] == 0

    def test_label_values_trimmed_and_case_insensitive(self, tmp_path):
        f = tmp_path / "d.csv"
        write_lines(f, ["a,Label", "1.0,  dos ", "2.0,BENIGN"])
        data = load_csv(f, ColumnSchema(feature_names=("a",)))
        assert list(data.labels) == [3, 0]

    def test_unknown_label_raises(self, tmp_path):
        f = tmp_path / "d.csv"
        write_lines(f, ["a,Label", "1.0,Heartbleed"])
        with pytest.raises(DataError, match="Heartbleed"):
            load_csv(f, ColumnSchema(feature_names=("a",)))

    def test_auto_select_skips_text_columns(self, tmp_path):
        f = tmp_path / "d.csv"
        write_lines(
            f,
            [
                "Flow ID, Dur ,Rate,Label",
                "A-1,3.0,1e2,Benign",
                "A-2,4.0,2e2,DoS",
            ],
        )
        data = load_csv(f)
        assert data.schema.feature_names == ("Dur", "Rate")
        assert data.features.tolist() == [[3.0, 100.0], [4.0, 200.0]]

    def test_auto_select_keeps_numeric_column_with_bad_cells(self, tmp_path):
        """inf/nan cells keep a column numeric; the rows drop instead."""
        f = tmp_path / "d.csv"
        write_lines(f, ["x,y,Label", "1.0,2.0,Benign", "Infinity,3.0,DoS", ",4.0,Bot"])
        data, report = load_csv_with_report(f)
        assert data.schema.feature_names == ("x", "y")
        assert report.rows_nan_dropped == 2
        assert data.n_rows == 1

    def test_missing_feature_column_raises(self, tmp_path):
        f = tmp_path / "d.csv"
        write_lines(f, ["a,Label", "1.0,Benign"])
        with pytest.raises(DataError, match="missing"):
            load_csv(f, ColumnSchema(feature_names=("a", "b")))

    def test_missing_label_column_raises(self, tmp_path):
        f = tmp_path / "d.csv"
        write_lines(f, ["a,b", "1.0,2.0"])
        with pytest.raises(DataError, match="label"):
            load_csv(f, ColumnSchema(feature_names=("a",)))

    def test_no_usable_rows_raises(self, tmp_path):
        f = tmp_path / "d.csv"
        write_lines(f, ["a,Label", "inf,Benign"])
        with pytest.raises(DataError, match="no usable rows"):
            load_csv(f, ColumnSchema(feature_names=("a",)))

    def test_missing_file_raises_oserror(self, tmp_path):
        with pytest.raises(OSError):
            load_csv(tmp_path / "absent.csv")

    def test_write_then_load_round_trips(self, tmp_path):
        rng = np.random.default_rng(5)
        feats = rng.normal(size=(50, 4)) * np.array([1e-7, 1.0, 1e9, 3.14159])
        labs = rng.integers(0, 7, size=50)
        schema = ColumnSchema(feature_names=("a", "b", "c", "d"))
        data = Dataset(feats, labs, schema, TRAFFIC_LABELS)
        f = tmp_path / "out.csv"
        write_csv(data, f)
        again = load_csv(f, schema)
        assert again == data


class TestDataset:
    def test_arrays_are_read_only(self, small_blob_dataset):
        with pytest.raises(ValueError):
            small_blob_dataset.features[0, 0] = 1.0
        with pytest.raises(ValueError):
            small_blob_dataset.labels[0] = 1

    def test_nonfinite_features_rejected(self):
        with pytest.raises(DataError):
            Dataset(np.array([[np.inf]]), np.array([0]), ColumnSchema(), TRAFFIC_LABELS)

    def test_out_of_range_label_rejected(self):
        with pytest.raises(DataError):
            Dataset(np.ones((1, 2)), np.array([7]), ColumnSchema(), TRAFFIC_LABELS)

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError):
            Dataset(np.ones((2, 2)), np.array([0]), ColumnSchema(), TRAFFIC_LABELS)

    def test_take_preserves_order(self, small_blob_dataset):
        sub = small_blob_dataset.take([5, 2, 9])
        assert sub.n_rows == 3
        assert np.array_equal(sub.features[0], small_blob_dataset.features[5])
        assert np.array_equal(sub.features[2], small_blob_dataset.features[9])

    def test_equality(self, small_blob_dataset):
        same = Dataset(
            small_blob_dataset.features.copy(),
            small_blob_dataset.labels.copy(),
            small_blob_dataset.schema,
            small_blob_dataset.label_map,
        )
        assert same == small_blob_dataset
        assert small_blob_dataset.take([0]) != small_blob_dataset.take([1])


def rows_as_set(data):
    return {
        data.features[i].tobytes() + data.labels[i].tobytes() for i in range(data.n_rows)
    }


class TestPartition:
    def test_two_class_exact_counts(self):
        """9 A-rows and 6 B-rows over 3 parts: every part gets 3 A, 2 B."""
        data = ab_dataset(9, 6)
        parts = partition(data, 3, seed=1)
        for part in parts:
            assert part.n_rows == 5
            assert class_histogram(part) == [("A", 3), ("B", 2)]

    def test_remainders_balance_totals(self):
        # A=4, B=4 over 3 parts: naive per-class assignment would give the
        # first part 2+2 rows; balanced assignment caps every part at 3.
        data = ab_dataset(4, 4)
        sizes = sorted(p.n_rows for p in partition(data, 3, seed=0))
        assert sizes == [2, 3, 3]

    def test_capture_partition_sizes(self, capture_like_dataset):
        parts = partition(capture_like_dataset, 3, seed=42)
        assert [p.n_rows for p in parts] == [18869, 18869, 18869]

    def test_per_class_counts_within_one(self, capture_like_dataset):
        parts = partition(capture_like_dataset, 3, seed=7)
        for cid in range(7):
            counts = [int(np.sum(p.labels == cid)) for p in parts]
            assert max(counts) - min(counts) <= 1
        totals = [p.n_rows for p in parts]
        assert max(totals) - min(totals) <= 1

    def test_parts_are_a_disjoint_cover(self):
        data = make_blobs([50, 40, 30, 20, 10, 5, 2], seed=3)
        parts = partition(data, 3, seed=11)
        union = set()
        total = 0
        for p in parts:
            s = rows_as_set(p)
            assert len(s) == p.n_rows
            assert not (union & s)
            union |= s
            total += p.n_rows
        assert total == data.n_rows
        assert union == rows_as_set(data)

    def test_tiny_class_goes_to_lowest_parts(self):
        data = make_blobs([9, 9, 9, 9, 9, 9, 2], seed=0)
        parts = partition(data, 3, seed=5)
        last = [int(np.sum(p.labels == 6)) for p in parts]
        assert sum(last) == 2
        assert last[2] == 0

    def test_deterministic_per_seed(self, small_blob_dataset):
        a = partition(small_blob_dataset, 3, seed=9)
        b = partition(small_blob_dataset, 3, seed=9)
        c = partition(small_blob_dataset, 3, seed=10)
        assert all(x == y for x, y in zip(a, b))
        assert any(x != y for x, y in zip(a, c))

    def test_bad_part_count_rejected(self, small_blob_dataset):
        with pytest.raises(ConfigError):
            partition(small_blob_dataset, 1, seed=0)

    def test_too_few_rows_rejected(self):
        data = ab_dataset(1, 1)
        with pytest.raises(DataError):
            partition(data, 3, seed=0)


class TestTrainTestSplit:
    def test_three_rows_half(self):
        """round-half-up puts 2 of 3 rows in train at fraction 0.5."""
        data = ab_dataset(2, 1)
        pair = train_test_split(data, 0.5, seed=0)
        assert pair.train.n_rows == 2
        assert pair.test.n_rows == 1

    def test_capture_eighty_twenty(self, capture_like_dataset):
        pair = train_test_split(capture_like_dataset, 0.8, seed=4)
        assert pair.train.n_rows == 45286  # round(0.8 * 56607)
        assert pair.test.n_rows == 56607 - 45286
        for cid in range(7):
            n_c = int(np.sum(capture_like_dataset.labels == cid))
            t_c = int(np.sum(pair.train.labels == cid))
            assert abs(t_c - 0.8 * n_c) <= 1

    def test_split_is_a_partition(self, small_blob_dataset):
        pair = train_test_split(small_blob_dataset, 0.8, seed=1)
        s_train, s_test = rows_as_set(pair.train), rows_as_set(pair.test)
        assert not (s_train & s_test)
        assert s_train | s_test == rows_as_set(small_blob_dataset)

    def test_single_row_class_lands_in_train(self, caplog):
        # 13*0.3 = 3.9: the six big classes' remainders outrank the single
        # row's 0.3, so only the forced rule can pull it into train.
        data = make_blobs([13, 13, 13, 13, 13, 13, 1], seed=2)
        with caplog.at_level(logging.WARNING, logger="fedids.dataio"):
            pair = train_test_split(data, 0.3, seed=0)
        assert int(np.sum(pair.train.labels == 6)) == 1
        assert int(np.sum(pair.test.labels == 6)) == 0
        assert any("single row" in r.getMessage() for r in caplog.records)

    def test_deterministic_per_seed(self, small_blob_dataset):
        a = train_test_split(small_blob_dataset, 0.8, seed=3)
        b = train_test_split(small_blob_dataset, 0.8, seed=3)
        c = train_test_split(small_blob_dataset, 0.8, seed=4)
        assert a.train == b.train and a.test == b.test
        assert a.train != c.train

    def test_bad_fraction_rejected(self, small_blob_dataset):
        for bad in (0.0, 1.0, -0.2, 1.7):
            with pytest.raises(ConfigError):
                train_test_split(small_blob_dataset, bad, seed=0)

    def test_randomized_fractions_respect_totals(self):
        rng = np.random.default_rng(8)
        for trial in range(25):
            counts = rng.integers(1, 40, size=7).tolist()
            data = make_blobs(counts, seed=int(rng.integers(1 << 30)))
            frac = float(rng.uniform(0.05, 0.95))
            pair = train_test_split(data, frac, seed=int(rng.integers(1 << 30)))
            n = data.n_rows
            want = int(np.floor(frac * n + 0.5))
            # single-row classes may push train above the rounded target
            singles = sum(1 for c in counts if c == 1)
            assert want <= pair.train.n_rows <= want + singles
            assert pair.train.n_rows + pair.test.n_rows == n


class TestHistogramAndConcat:
    def test_histogram_order_and_zeros(self):
        data = make_blobs([3, 0, 2, 0, 0, 0, 1], seed=0)
        assert class_histogram(data) == [
            ("Benign", 3),
            ("Bot", 0),
            ("Brute Force", 2),
            ("DoS", 0),
            ("Infiltration", 0),
            ("Port Scan", 0),
            ("Web Attack", 1),
        ]

    def test_histogram_sums_to_n(self, capture_like_dataset):
        hist = class_histogram(capture_like_dataset)
        assert sum(n for _, n in hist) == capture_like_dataset.n_rows

    def test_concatenate_round_trip(self, small_blob_dataset):
        parts = partition(small_blob_dataset, 3, seed=0)
        merged = concatenate(parts)
        assert merged.n_rows == small_blob_dataset.n_rows
        assert rows_as_set(merged) == rows_as_set(small_blob_dataset)

    def test_concatenate_rejects_mismatched_maps(self):
        a = ab_dataset(2, 2)
        b = make_blobs([2, 2], n_features=3, label_map=LabelMap.from_names(["A", "C"]))
        with pytest.raises(DataError):
            concatenate([a, b])
