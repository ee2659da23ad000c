"""The boosted additive model: binning, training, interactions,
explanations, and serialization."""

import json

import numpy as np
import pytest

from fraudebm import synth
from fraudebm.dataset import Dataset, stratified_kfold, subset_rows
from fraudebm.ebm import (
    EbmConfig,
    EbmModel,
    _boost_univariate,
    bin_index,
    build_bins,
    detect_interactions,
    load_model,
    save_model,
    train_ebm,
)
from fraudebm.errors import TrainingError, ValidationError
from fraudebm.metrics import roc_auc

XOR_CFG = dict(max_bins=8, learning_rate=0.05, max_rounds=400,
               interaction_grid=8, outer_bags=2, seed=0)


def holdout_auc(model, ds_test):
    return roc_auc(ds_test.y, model.predict_proba_matrix(ds_test.X))


def split(ds, seed=0):
    folds = stratified_kfold(ds, 4, seed=seed)
    return subset_rows(ds, folds.train_indices(0)), subset_rows(ds, folds.test_indices(0))


class TestConfig:
    def test_defaults_valid(self):
        cfg = EbmConfig()
        assert cfg.max_bins == 256
        assert cfg.learning_rate == 0.05
        assert cfg.max_rounds == 100
        assert cfg.interactions == 20

    @pytest.mark.parametrize("kwargs", [
        {"max_bins": 1}, {"learning_rate": 0.0}, {"max_rounds": 0},
        {"interactions": -1}, {"outer_bags": 0}, {"interaction_grid": 1},
    ])
    def test_invalid_bounds_rejected(self, kwargs):
        with pytest.raises(ValidationError):
            EbmConfig(**kwargs)


class TestBuildBins:
    def test_percentile_oracle(self):
        x = np.arange(1.0, 101.0)[:, None]
        cuts = build_bins(x, max_bins=4)[0]
        expected = np.percentile(x[:, 0], [25, 50, 75])
        assert np.allclose(cuts, expected)
        assert np.all(np.diff(cuts) > 0)

    def test_constant_feature_single_bin(self):
        cuts = build_bins(np.full((20, 1), 3.0), max_bins=8)[0]
        assert len(cuts) == 0

    def test_max_bins_two_median(self):
        x = np.arange(1.0, 12.0)[:, None]
        cuts = build_bins(x, max_bins=2)[0]
        assert len(cuts) == 1
        assert cuts[0] == np.median(x)

    def test_min_samples_bin_respected(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(60, 1))
        cuts = build_bins(x, max_bins=32, min_samples_bin=10)[0]
        idx = bin_index(x[:, 0], cuts)
        counts = np.bincount(idx, minlength=len(cuts) + 1)
        assert counts.min() >= 10

    def test_unseen_values_clamp_to_edges(self):
        cuts = np.array([0.0, 1.0])
        assert bin_index(np.array([-99.0]), cuts)[0] == 0
        assert bin_index(np.array([99.0]), cuts)[0] == 2


class TestTraining:
    def test_single_class_rejected(self):
        ds = Dataset(["a"], np.arange(10.0)[:, None], np.zeros(10, dtype=int))
        with pytest.raises(TrainingError) as exc:
            train_ebm(ds, EbmConfig(max_rounds=1))
        assert "single-class" in str(exc.value)

    def test_additivity_exact(self):
        ds = synth.monotone_informative(n=500, p=4, seed=1)
        model = train_ebm(ds, EbmConfig(max_bins=16, max_rounds=30,
                                        interactions=2, outer_bags=2, seed=0))
        for i in range(0, ds.n, 37):
            local = model.explain_local(ds.X[i])
            total = local["intercept"]
            for _, c in local["contributions"]:
                total += c
            assert local["logit"] == model.predict_logit(ds.X[i])
            assert total == local["logit"]

    def test_terms_centered(self):
        ds = synth.monotone_informative(n=600, p=4, seed=2)
        model = train_ebm(ds, EbmConfig(max_bins=16, max_rounds=30,
                                        interactions=2, outer_bags=2, seed=0))
        for j in range(ds.p):
            w = model.bin_weights[j]
            assert abs(np.sum(model.scores[j] * w) / w.sum()) < 1e-9
        for term in model.pairs:
            w = term.weights
            assert abs(np.sum(term.scores * w) / w.sum()) < 1e-9

    def test_training_loss_non_increasing(self):
        ds = synth.monotone_informative(n=400, p=3, seed=3)
        cuts = build_bins(ds.X, 16)
        bidx = np.column_stack([bin_index(ds.X[:, j], cuts[j]) for j in range(ds.p)])
        nbins = [len(c) + 1 for c in cuts]
        cfg = EbmConfig(max_bins=16, max_rounds=50, learning_rate=0.05)
        _, _, _, losses = _boost_univariate(
            bidx, nbins, ds.y.astype(float), np.ones(ds.n), cfg, track_loss=True)
        diffs = np.diff(losses)
        assert (diffs <= 1e-12).all()

    def test_determinism_byte_identical(self, tmp_path):
        ds = synth.monotone_informative(n=300, p=3, seed=4)
        cfg = EbmConfig(max_bins=8, max_rounds=10, interactions=1, seed=5)
        save_model(train_ebm(ds, cfg), tmp_path / "a.json")
        save_model(train_ebm(ds, cfg), tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_feature_order_invariance(self):
        ds = synth.monotone_informative(n=400, p=4, seed=6)
        perm = [2, 0, 3, 1]
        ds_perm = Dataset([ds.feature_names[i] for i in perm],
                          ds.X[:, perm], ds.y)
        cfg = EbmConfig(max_bins=16, max_rounds=25, interactions=2,
                        outer_bags=2, seed=0)
        a = train_ebm(ds, cfg).predict_logit_matrix(ds.X)
        b = train_ebm(ds_perm, cfg).predict_logit_matrix(ds_perm.X)
        assert np.abs(a - b).max() < 1e-9

    def test_base_rate_intercept(self):
        # with a tiny number of rounds the intercept remains the base-rate logit
        y = np.array([1] * 10 + [0] * 90)
        rng = np.random.default_rng(7)
        ds = Dataset(["a"], rng.normal(size=(100, 1)), y)
        model = train_ebm(ds, EbmConfig(max_bins=4, max_rounds=1,
                                        learning_rate=1e-9, interactions=0,
                                        outer_bags=1))
        assert model.intercept == pytest.approx(np.log(0.1 / 0.9), abs=1e-6)


class TestXor:
    def test_pair_term_separates_xor(self):
        ds = synth.xor_data(n=4000, seed=0)
        tr, te = split(ds)
        model = train_ebm(tr, EbmConfig(interactions=1, **XOR_CFG))
        assert holdout_auc(model, te) >= 0.99
        assert (model.pairs[0].i, model.pairs[0].j) == (0, 1)

    def test_univariate_model_cannot(self):
        ds = synth.xor_data(n=4000, seed=0)
        tr, te = split(ds)
        model = train_ebm(tr, EbmConfig(interactions=0, **XOR_CFG))
        assert holdout_auc(model, te) <= 0.6

    def test_pair_dominates_explanations(self):
        ds = synth.xor_data(n=2000, seed=1)
        model = train_ebm(ds, EbmConfig(interactions=1, **XOR_CFG))
        ranked = model.explain_global()
        assert " x " in ranked[0][0]
        rng = np.random.default_rng(2)
        for _ in range(20):
            row = rng.uniform(-1, 1, size=2)
            local = model.explain_local(row)
            top = max(local["contributions"], key=lambda t: abs(t[1]))
            assert " x " in top[0]


class TestDetectInteractions:
    def test_k_zero_empty(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(100, 3))
        cuts = build_bins(X, 4)
        out = detect_interactions(X, rng.normal(size=100), np.ones(100), cuts, 0)
        assert out == []

    def test_k_clamped_with_warning(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(100, 3))
        cuts = build_bins(X, 4)
        warnings = []
        out = detect_interactions(X, rng.normal(size=100), np.ones(100),
                                  cuts, 10, warn=warnings.append)
        assert len(out) == 3
        assert warnings and "clamped" in warnings[0]

    def test_xor_pair_scores_dominate_additive(self):
        rng = np.random.default_rng(2)
        n = 3000
        X = rng.uniform(-1, 1, size=(n, 2))
        y_xor = (X[:, 0] * X[:, 1] < 0).astype(float)
        y_add = 1.0 / (1.0 + np.exp(-(X[:, 0] + X[:, 1])))
        cuts = build_bins(X, 8)
        w = np.ones(n)

        def top_score(resid):
            nb = [len(c) + 1 for c in cuts]
            idx = np.column_stack([bin_index(X[:, j], cuts[j]) for j in range(2)])
            joint = idx[:, 0] * nb[1] + idx[:, 1]

            def rss(ix, k):
                num = np.bincount(ix, weights=w * resid, minlength=k)
                den = np.bincount(ix, weights=w, minlength=k)
                m = den > 0
                return np.sum(num[m] ** 2 / den[m])

            return (rss(joint, nb[0] * nb[1]) - rss(idx[:, 0], nb[0])
                    - rss(idx[:, 1], nb[1]))

        # residuals after removing each target's mean
        xor_gain = top_score(y_xor - y_xor.mean())
        add_gain = top_score(y_add - y_add.mean())
        assert xor_gain > 10 * max(add_gain, 1e-12)
        pairs = detect_interactions(X, y_xor - y_xor.mean(), w, cuts, 1)
        assert pairs == [(0, 1)]


class TestModelApi:
    def intercept_only(self, intercept):
        return EbmModel(feature_names=[], intercept=intercept, cuts=[],
                        scores=[], bin_weights=[], pairs=[],
                        config=EbmConfig())

    def test_intercept_only_proba(self):
        m = self.intercept_only(0.0)
        assert m.predict_proba(np.array([])) == 0.5
        m9 = self.intercept_only(float(np.log(9.0)))
        assert m9.predict_proba(np.array([])) == pytest.approx(0.9)

    def test_intercept_only_local_explanation(self):
        m = self.intercept_only(0.3)
        local = m.explain_local(np.array([]))
        assert local["contributions"] == []
        assert local["logit"] == 0.3

    def test_dimension_mismatch(self):
        ds = synth.monotone_informative(n=200, p=3, seed=8)
        model = train_ebm(ds, EbmConfig(max_bins=4, max_rounds=5, interactions=0))
        with pytest.raises(ValidationError):
            model.predict_logit(np.zeros(5))

    def test_single_nonzero_term_ranks_first(self):
        m = EbmModel(
            feature_names=["a", "b"], intercept=0.0,
            cuts=[np.array([0.0]), np.array([0.0])],
            scores=[np.array([0.0, 0.0]), np.array([-1.0, 1.0])],
            bin_weights=[np.array([5.0, 5.0]), np.array([5.0, 5.0])],
            pairs=[], config=EbmConfig())
        assert m.explain_global()[0][0] == "b"

    def test_doubling_scores_doubles_importance(self):
        ds = synth.monotone_informative(n=300, p=3, seed=9)
        model = train_ebm(ds, EbmConfig(max_bins=8, max_rounds=10, interactions=0))
        before = model.term_importances()[0][1]
        model.scores[0] = model.scores[0] * 2.0
        after = model.term_importances()[0][1]
        assert after == pytest.approx(2.0 * before)

    def test_top_k(self):
        ds = synth.monotone_informative(n=1500, p=5, n_informative=2, seed=10)
        model = train_ebm(ds, EbmConfig(max_bins=16, max_rounds=40, interactions=0))
        assert sorted(model.top_k_features(5)) == [0, 1, 2, 3, 4]
        assert set(model.top_k_features(2)) == {0, 1}
        assert model.top_k_features(1)[0] in (0, 1)
        with pytest.raises(ValidationError):
            model.top_k_features(0)
        with pytest.raises(ValidationError):
            model.top_k_features(6)


class TestSerialization:
    def make_model(self):
        ds = synth.monotone_informative(n=400, p=3, seed=11)
        return ds, train_ebm(ds, EbmConfig(max_bins=8, max_rounds=10,
                                           interactions=1, outer_bags=2))

    def test_round_trip_bit_identical_predictions(self, tmp_path):
        ds, model = self.make_model()
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        rng = np.random.default_rng(12)
        rows = rng.normal(size=(1000, 3))
        assert np.array_equal(model.predict_logit_matrix(rows),
                              back.predict_logit_matrix(rows))

    def test_truncated_file(self, tmp_path):
        ds, model = self.make_model()
        path = tmp_path / "model.json"
        save_model(model, path)
        path.write_bytes(path.read_bytes()[:100])
        with pytest.raises(ValidationError):
            load_model(path)

    def test_version_bump_rejected(self, tmp_path):
        ds, model = self.make_model()
        path = tmp_path / "model.json"
        save_model(model, path)
        doc = json.loads(path.read_text())
        doc["format_version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(ValidationError) as exc:
            load_model(path)
        assert "version" in str(exc.value)
