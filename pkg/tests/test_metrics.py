"""Metrics: rank-based AUC against a brute-force pair oracle, confusion
metrics, and the overfit gap check."""

import numpy as np
import pytest

from fraudebm.errors import ValidationError
from fraudebm.metrics import overfit_gap, precision_recall_f1, roc_auc


def brute_force_auc(labels, scores):
    """O(n^2) pair enumeration: wins + half credit for ties."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


class TestRocAuc:
    def test_hand_case(self):
        assert roc_auc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]) == 0.75

    def test_perfect_separation(self):
        assert roc_auc([0, 0, 0, 1, 1], [0.1, 0.2, 0.3, 0.7, 0.9]) == 1.0

    def test_all_ties(self):
        assert roc_auc([0, 1, 0, 1], [0.5, 0.5, 0.5, 0.5]) == 0.5

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            n = int(rng.integers(4, 501))
            labels = rng.integers(0, 2, size=n)
            if labels.sum() in (0, n):
                labels[0], labels[1] = 0, 1
            # coarse score grid forces plenty of ties
            scores = rng.integers(0, 10, size=n) / 10.0
            assert roc_auc(labels, scores) == pytest.approx(
                brute_force_auc(labels, scores), abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 2, size=200)
        labels[:2] = [0, 1]
        scores = rng.normal(size=200)
        assert roc_auc(labels, scores) == roc_auc(labels, 2.0 * scores + 1.0)

    def test_score_negation_complement(self):
        rng = np.random.default_rng(4)
        labels = rng.integers(0, 2, size=150)
        labels[:2] = [0, 1]
        scores = rng.integers(0, 5, size=150).astype(float)
        total = roc_auc(labels, scores) + roc_auc(labels, -scores)
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(ValidationError):
            roc_auc([1, 1, 1], [0.1, 0.2, 0.3])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            roc_auc([0, 1], [0.1, 0.2, 0.3])


class TestPrecisionRecallF1:
    def test_confusion_oracle(self):
        # tp=3, fp=1, fn=1
        labels = [1, 1, 1, 1, 0, 0]
        preds = [1, 1, 1, 0, 1, 0]
        rep = precision_recall_f1(labels, preds)
        assert (rep.tp, rep.fp, rep.tn, rep.fn) == (3, 1, 1, 1)
        assert rep.precision == 0.75
        assert rep.recall == 0.75
        assert rep.f1 == 0.75

    def test_no_predicted_positives_flagged(self):
        rep = precision_recall_f1([0, 1, 1], [0, 0, 0])
        assert rep.precision == 0.0
        assert rep.undefined_precision
        assert not rep.undefined_recall

    def test_no_actual_positives_flagged(self):
        rep = precision_recall_f1([0, 0, 0], [0, 1, 0])
        assert rep.recall == 0.0
        assert rep.undefined_recall

    def test_perfect_predictions(self):
        rep = precision_recall_f1([0, 1, 0, 1], [0, 1, 0, 1])
        assert rep.precision == 1.0
        assert rep.recall == 1.0
        assert rep.f1 == 1.0

    def test_counts_sum_to_n(self):
        rng = np.random.default_rng(9)
        labels = rng.integers(0, 2, size=80)
        preds = rng.integers(0, 2, size=80)
        rep = precision_recall_f1(labels, preds)
        assert rep.tp + rep.fp + rep.tn + rep.fn == 80

    def test_f1_identity(self):
        rep = precision_recall_f1([1, 1, 0, 0], [1, 0, 1, 0])
        expected = 2 * rep.precision * rep.recall / (rep.precision + rep.recall)
        assert rep.f1 == pytest.approx(expected)


class TestOverfitGap:
    def test_published_means(self):
        rep = overfit_gap([0.99858], [0.98185], threshold=0.1)
        assert rep.gap == pytest.approx(0.01673, abs=1e-12)
        assert rep.verdict == "pass"

    def test_large_gap_fails(self):
        rep = overfit_gap([0.99], [0.80], threshold=0.1)
        assert rep.gap == pytest.approx(0.19)
        assert rep.verdict == "fail"

    def test_identical_lists_pass(self):
        rep = overfit_gap([0.9, 0.8], [0.9, 0.8])
        assert rep.gap == 0.0
        assert rep.verdict == "pass"

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            overfit_gap([], [0.5])
