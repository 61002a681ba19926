"""Confusion matrices and the four per-device scores."""

import numpy as np
import pytest

from fedids.errors import DataError
from fedids.metrics import (
    ConfusionMatrix,
    Scores,
    accuracy,
    cohen_kappa,
    confusion,
    format_percent,
    macro_precision,
    macro_recall,
    score_csv_row,
    score_lines,
    summarize,
)

# Hand-checked reference tallies for a three-device, 7-class traffic run.
# These are the golden fixtures: the reference per-device scores (accuracy,
# macro precision/recall, kappa) must be recoverable from these counts.
EDGE1_REFERENCE = np.array(
    [
        [2491, 90, 111, 80, 7, 4, 63],
        [4, 2616, 0, 0, 0, 0, 0],
        [28, 0, 2621, 2, 0, 0, 21],
        [26, 1, 5, 2416, 2, 0, 4],
        [12, 0, 0, 0, 1197, 0, 0],
        [3, 0, 0, 6, 0, 2737, 0],
        [37, 0, 134, 2, 0, 1, 2430],
    ]
)

EDGE2_REFERENCE = np.array(
    [
        [602, 23, 32, 17, 2, 0, 3],
        [0, 652, 0, 0, 0, 0, 0],
        [6, 0, 643, 0, 0, 0, 5],
        [6, 0, 3, 615, 0, 0, 4],
        [1, 0, 0, 0, 303, 0, 0],
        [1, 0, 0, 1, 0, 631, 0],
        [10, 0, 28, 1, 0, 0, 610],
    ]
)

SERVER_REFERENCE = np.array(
    [
        [631, 26, 18, 32, 4, 1, 10],
        [1, 629, 0, 0, 1, 0, 0],
        [16, 0, 623, 1, 0, 0, 2],
        [16, 0, 1, 596, 0, 0, 1],
        [5, 0, 0, 0, 299, 0, 0],
        [2, 0, 0, 2, 0, 643, 0],
        [17, 0, 21, 1, 0, 0, 610],
    ]
)


def identity_matrix(k=3, n=5):
    return ConfusionMatrix(np.eye(k, dtype=np.int64) * n)


class TestConfusion:
    def test_perfect_diagonal(self):
        m = confusion([0, 1, 2], [0, 1, 2], 3)
        assert np.array_equal(m.counts, np.eye(3, dtype=np.int64))

    def test_single_cell(self):
        m = confusion([0, 0], [1, 1], 2)
        assert m.counts[0, 1] == 2
        assert m.total == 2

    def test_matches_brute_force_tally(self):
        rng = np.random.default_rng(31)
        truth = rng.integers(0, 7, size=400)
        pred = rng.integers(0, 7, size=400)
        m = confusion(truth, pred, 7)
        for t in range(7):
            for p in range(7):
                assert m.counts[t, p] == int(np.sum((truth == t) & (pred == p)))

    def test_row_and_column_sums(self):
        rng = np.random.default_rng(7)
        truth = rng.integers(0, 5, size=300)
        pred = rng.integers(0, 5, size=300)
        m = confusion(truth, pred, 5)
        assert np.array_equal(m.counts.sum(axis=1), np.bincount(truth, minlength=5))
        assert np.array_equal(m.counts.sum(axis=0), np.bincount(pred, minlength=5))
        assert m.total == 300

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError):
            confusion([0, 1], [0], 2)

    def test_out_of_range_rejected(self):
        with pytest.raises(DataError):
            confusion([0, 2], [0, 0], 2)
        with pytest.raises(DataError):
            confusion([0, 0], [0, -1], 2)

    def test_matrix_validation(self):
        with pytest.raises(DataError):
            ConfusionMatrix(np.zeros((2, 3), dtype=np.int64))
        with pytest.raises(DataError):
            ConfusionMatrix(np.array([[1, -1], [0, 0]]))
        with pytest.raises(DataError):
            ConfusionMatrix(np.zeros((0, 0), dtype=np.int64))

    def test_counts_are_read_only(self):
        m = confusion([0], [0], 2)
        with pytest.raises(ValueError):
            m.counts[0, 0] = 9


class TestAccuracy:
    def test_identity_is_one(self):
        assert accuracy(identity_matrix()) == 1.0

    def test_edge2_reference(self):
        assert accuracy(EDGE2_REFERENCE) == 4056 / 4199
        assert format_percent(accuracy(EDGE2_REFERENCE)) == "96.594 %"

    def test_edge1_reference(self):
        assert accuracy(EDGE1_REFERENCE) == 16508 / 17151
        assert format_percent(accuracy(EDGE1_REFERENCE)) == "96.251 %"

    def test_server_reference(self):
        # The printed counts are authoritative: they yield 95.771 %, not the
        # 95.999 % figure sometimes quoted alongside this matrix.
        assert accuracy(SERVER_REFERENCE) == 4031 / 4209
        assert abs(accuracy(SERVER_REFERENCE) * 100 - 95.77) <= 0.005
        assert format_percent(accuracy(SERVER_REFERENCE)) == "95.771 %"

    def test_empty_matrix_rejected(self):
        with pytest.raises(DataError):
            accuracy(np.zeros((3, 3), dtype=np.int64))


class TestMacroAverages:
    def test_identity_is_one(self):
        assert macro_precision(identity_matrix()) == 1.0
        assert macro_recall(identity_matrix()) == 1.0

    def test_edge2_reference(self):
        assert abs(macro_precision(EDGE2_REFERENCE) - 0.9689) <= 0.0005
        assert abs(macro_recall(EDGE2_REFERENCE) - 0.9689) <= 0.0005
        # tight regression pins, derived by hand from the counts
        assert abs(macro_precision(EDGE2_REFERENCE) - 0.9689333863558206) < 1e-12
        assert abs(macro_recall(EDGE2_REFERENCE) - 0.9689337497238736) < 1e-12

    def test_edge1_reference(self):
        assert abs(macro_precision(EDGE1_REFERENCE) - 0.9654) <= 0.001
        assert abs(macro_recall(EDGE1_REFERENCE) - 0.9652) <= 0.001
        assert abs(macro_precision(EDGE1_REFERENCE) - 0.9652665712849254) < 1e-12
        assert abs(macro_recall(EDGE1_REFERENCE) - 0.9655916759900647) < 1e-12

    def test_server_reference(self):
        assert abs(macro_precision(SERVER_REFERENCE) - 0.9601851026885876) < 1e-12
        assert abs(macro_recall(SERVER_REFERENCE) - 0.9613083530971469) < 1e-12

    def test_never_predicted_class_contributes_zero(self):
        m = ConfusionMatrix(np.array([[5, 0], [5, 0]]))
        with pytest.warns(RuntimeWarning, match="no predicted"):
            assert macro_precision(m) == pytest.approx(0.25)
        assert macro_recall(m) == pytest.approx(0.5)

    def test_absent_truth_class_contributes_zero(self):
        m = ConfusionMatrix(np.array([[5, 5], [0, 0]]))
        with pytest.warns(RuntimeWarning, match="no ground-truth"):
            assert macro_recall(m) == pytest.approx(0.25)

    def test_empty_matrix_rejected(self):
        for fn in (macro_precision, macro_recall):
            with pytest.raises(DataError):
                fn(np.zeros((2, 2), dtype=np.int64))


class TestKappa:
    def test_identity_is_one(self):
        assert cohen_kappa(identity_matrix()) == 1.0

    def test_edge2_reference(self):
        assert abs(cohen_kappa(EDGE2_REFERENCE) - 0.9600) <= 0.0005
        assert abs(cohen_kappa(EDGE2_REFERENCE) - 0.9599982012890762) < 1e-12

    def test_edge1_reference(self):
        assert abs(cohen_kappa(EDGE1_REFERENCE) - 0.956) <= 0.001
        assert abs(cohen_kappa(EDGE1_REFERENCE) - 0.9559398869950733) < 1e-12

    def test_server_reference(self):
        assert abs(cohen_kappa(SERVER_REFERENCE) - 0.9503133427750109) < 1e-12

    def test_degenerate_single_cell(self):
        # every sample in one diagonal cell: p_e = 1 and agreement is perfect
        assert cohen_kappa(np.array([[7]])) == 1.0
        assert cohen_kappa(np.array([[0, 0], [0, 9]])) == 1.0

    def test_worst_case_is_negative(self):
        assert cohen_kappa(np.array([[0, 5], [5, 0]])) == pytest.approx(-1.0)

    def test_empty_matrix_rejected(self):
        with pytest.raises(DataError):
            cohen_kappa(np.zeros((2, 2), dtype=np.int64))


class TestProperties:
    def test_permuting_classes_leaves_scores_unchanged(self):
        rng = np.random.default_rng(55)
        for _ in range(20):
            k = int(rng.integers(2, 8))
            truth = rng.integers(0, k, size=200)
            pred = rng.integers(0, k, size=200)
            perm = rng.permutation(k)
            m = confusion(truth, pred, k)
            mp = confusion(perm[truth], perm[pred], k)
            inv = np.argsort(perm)
            assert np.array_equal(mp.counts[np.ix_(perm, perm)], m.counts)
            assert np.array_equal(m.counts[np.ix_(inv, inv)], mp.counts)
            assert accuracy(mp) == pytest.approx(accuracy(m))
            assert macro_precision(mp) == pytest.approx(macro_precision(m))
            assert macro_recall(mp) == pytest.approx(macro_recall(m))
            assert cohen_kappa(mp) == pytest.approx(cohen_kappa(m))

    def test_scores_bounded_and_kappa_below_accuracy(self):
        rng = np.random.default_rng(56)
        for _ in range(30):
            k = int(rng.integers(2, 8))
            truth = rng.integers(0, k, size=150)
            # skew predictions toward the truth so the matrix looks realistic
            pred = np.where(rng.random(150) < 0.7, truth, rng.integers(0, k, size=150))
            m = confusion(truth, pred, k)
            a = accuracy(m)
            assert 0.0 <= a <= 1.0
            assert 0.0 <= macro_precision(m) <= 1.0
            assert 0.0 <= macro_recall(m) <= 1.0
            assert cohen_kappa(m) <= a + 1e-12


class TestFormatting:
    def test_percent_rounds_half_up(self):
        # 0.015625 is exact in binary: 1.5625 % must round up to 1.563
        assert format_percent(0.015625) == "1.563 %"
        assert format_percent(0.015625, decimals=2) == "1.56 %"
        assert format_percent(1.0) == "100.000 %"
        assert format_percent(0.5) == "50.000 %"

    def test_summarize_collects_all_four(self):
        s = summarize(EDGE2_REFERENCE)
        assert s == Scores(
            accuracy=accuracy(EDGE2_REFERENCE),
            precision=macro_precision(EDGE2_REFERENCE),
            recall=macro_recall(EDGE2_REFERENCE),
            kappa=cohen_kappa(EDGE2_REFERENCE),
        )

    def test_score_lines_round_trip(self):
        s = summarize(EDGE1_REFERENCE)
        lines = score_lines(s)
        parsed = dict(line.split("=", 1) for line in lines)
        assert float(parsed["accuracy"]) == s.accuracy
        assert float(parsed["kappa"]) == s.kappa

    def test_csv_row_layout(self):
        s = summarize(EDGE2_REFERENCE)
        row = score_csv_row("edge2", 3, s)
        assert row[0] == "edge2"
        assert row[1] == "3"
        assert [float(v) for v in row[2:]] == [s.accuracy, s.precision, s.recall, s.kappa]
