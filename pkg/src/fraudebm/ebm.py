"""Explainable boosting: additive model of binned per-feature shape
functions plus selected pairwise interaction grids, trained by
low-learning-rate cyclic boosting on the logistic loss.

Training visits every feature each round with updates computed from the
round-start residuals, so feature order cannot change the result. Pairwise
terms are detected after the univariate stage from residual fits on coarse
grids, then boosted for a quarter of the rounds. Bags (bootstrap resamples)
are averaged; every term is centered on the training distribution with the
displaced mass moved to the intercept.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import Dataset
from .errors import TrainingError, ValidationError

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class EbmConfig:
    max_bins: int = 256
    learning_rate: float = 0.05
    max_rounds: int = 100
    interactions: int = 20
    outer_bags: int = 8
    min_samples_bin: int = 1
    interaction_grid: int = 16
    class_weights: tuple[float, float] = (1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.max_bins < 2:
            raise ValidationError("max_bins must be >= 2")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")
        if self.max_rounds < 1:
            raise ValidationError("max_rounds must be >= 1")
        if self.interactions < 0:
            raise ValidationError("interactions must be >= 0")
        if self.outer_bags < 1:
            raise ValidationError("outer_bags must be >= 1")
        if self.min_samples_bin < 1:
            raise ValidationError("min_samples_bin must be >= 1")
        if self.interaction_grid < 2:
            raise ValidationError("interaction_grid must be >= 2")
        if min(self.class_weights) <= 0:
            raise ValidationError("class weights must be positive")


# ---------------------------------------------------------------------------
# Binning
# ---------------------------------------------------------------------------

def _merge_small_bins(col: np.ndarray, cuts: np.ndarray, min_samples_bin: int) -> np.ndarray:
    """Drop cuts until every bin holds at least min_samples_bin rows."""
    cuts = cuts.copy()
    while len(cuts) > 0:
        counts = np.bincount(np.searchsorted(cuts, col, side="right"),
                             minlength=len(cuts) + 1)
        small = np.flatnonzero(counts < min_samples_bin)
        if len(small) == 0:
            break
        b = int(small[0])
        # merge with the left neighbor (remove the cut on the bin's left
        # edge); the leftmost bin merges right instead
        cuts = np.delete(cuts, b - 1 if b > 0 else 0)
    return cuts


def build_bins(X: np.ndarray, max_bins: int, min_samples_bin: int = 1) -> list[np.ndarray]:
    """Per-feature ascending cut points from evenly spaced quantiles,
    deduplicated and merged so no training bin is underfilled. A constant
    feature yields zero cuts (a single bin)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 2:
        raise ValidationError("binning requires at least 2 rows")
    cuts_per_feature = []
    probs = np.arange(1, max_bins) / max_bins * 100.0
    for j in range(X.shape[1]):
        col = X[:, j]
        if col.min() == col.max():
            cuts_per_feature.append(np.empty(0))
            continue
        cuts = np.unique(np.percentile(col, probs))
        cuts = cuts[(cuts > col.min()) & (cuts <= col.max())]
        cuts_per_feature.append(_merge_small_bins(col, cuts, min_samples_bin))
    return cuts_per_feature


def bin_index(col: np.ndarray, cuts: np.ndarray) -> np.ndarray:
    """Half-open bins [c_k, c_{k+1}); out-of-range values clamp to edge bins."""
    return np.searchsorted(cuts, col, side="right")


def _bin_matrix(X: np.ndarray, cuts: list[np.ndarray]) -> np.ndarray:
    out = np.empty(X.shape, dtype=np.int64)
    for j, c in enumerate(cuts):
        out[:, j] = bin_index(X[:, j], c)
    return out


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

@dataclass
class PairTerm:
    """Additive score grid over a coarse bin pair (i < j)."""

    i: int
    j: int
    cuts_i: np.ndarray
    cuts_j: np.ndarray
    scores: np.ndarray  # (len(cuts_i)+1) x (len(cuts_j)+1)
    weights: np.ndarray  # training-distribution cell weights, same shape


@dataclass
class EbmModel:
    feature_names: list[str]
    intercept: float
    cuts: list[np.ndarray]
    scores: list[np.ndarray]  # per-feature per-bin additive log-odds
    bin_weights: list[np.ndarray]  # training-distribution bin weights
    pairs: list[PairTerm]
    config: EbmConfig

    @property
    def p(self) -> int:
        return len(self.feature_names)

    # -- prediction ---------------------------------------------------------

    def _check_row(self, row: np.ndarray) -> np.ndarray:
        row = np.asarray(row, dtype=np.float64)
        if row.shape != (self.p,):
            raise ValidationError(f"row must have length {self.p}")
        return row

    def _term_contributions(self, row: np.ndarray) -> list[tuple[str, float]]:
        contribs = []
        for j in range(self.p):
            b = int(bin_index(row[j : j + 1], self.cuts[j])[0])
            contribs.append((self.feature_names[j], float(self.scores[j][b])))
        for term in self.pairs:
            bi = int(bin_index(row[term.i : term.i + 1], term.cuts_i)[0])
            bj = int(bin_index(row[term.j : term.j + 1], term.cuts_j)[0])
            name = f"{self.feature_names[term.i]} x {self.feature_names[term.j]}"
            contribs.append((name, float(term.scores[bi, bj])))
        return contribs

    def predict_logit(self, row) -> float:
        """Additive score: intercept plus every term in fixed order."""
        row = self._check_row(row)
        logit = self.intercept
        for _, c in self._term_contributions(row):
            logit += c
        return logit

    def predict_proba(self, row) -> float:
        return float(1.0 / (1.0 + np.exp(-self.predict_logit(row))))

    def predict_class(self, row, threshold: float = 0.5) -> int:
        return int(self.predict_proba(row) >= threshold)

    def predict_logit_matrix(self, X: np.ndarray) -> np.ndarray:
        """Vectorized logits; same term accumulation order as predict_logit."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.p:
            raise ValidationError(f"matrix must have {self.p} columns")
        logit = np.full(X.shape[0], self.intercept)
        for j in range(self.p):
            logit += self.scores[j][bin_index(X[:, j], self.cuts[j])]
        for term in self.pairs:
            bi = bin_index(X[:, term.i], term.cuts_i)
            bj = bin_index(X[:, term.j], term.cuts_j)
            logit += term.scores[bi, bj]
        return logit

    def predict_proba_matrix(self, X: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.predict_logit_matrix(X)))

    # -- explanations -------------------------------------------------------

    def explain_local(self, row) -> dict:
        """Signed per-term contributions; their sum plus the intercept is
        the logit exactly. Negative values push toward class 0."""
        row = self._check_row(row)
        contribs = self._term_contributions(row)
        logit = self.intercept
        for _, c in contribs:
            logit += c
        proba = float(1.0 / (1.0 + np.exp(-logit)))
        return {
            "intercept": self.intercept,
            "contributions": contribs,
            "logit": logit,
            "proba": proba,
            "sign_semantics": "negative -> class 0, positive -> class 1",
        }

    def term_importances(self) -> list[tuple[str, float]]:
        """Training-weighted mean |score| per term (univariate and pairs)."""
        out = []
        for j in range(self.p):
            w = self.bin_weights[j]
            total = w.sum()
            imp = float(np.sum(np.abs(self.scores[j]) * w) / total) if total > 0 else 0.0
            out.append((self.feature_names[j], imp))
        for term in self.pairs:
            w = term.weights
            total = w.sum()
            imp = float(np.sum(np.abs(term.scores) * w) / total) if total > 0 else 0.0
            name = f"{self.feature_names[term.i]} x {self.feature_names[term.j]}"
            out.append((name, imp))
        return out

    def explain_global(self) -> list[tuple[str, float]]:
        """Term importances sorted descending; stable on ties."""
        imps = self.term_importances()
        return sorted(imps, key=lambda t: -t[1])

    def feature_importances(self, split_pairs: bool = False) -> np.ndarray:
        """Per-feature importance from univariate terms; optionally split
        each pair's importance 50/50 onto its two features."""
        imps = np.array([imp for _, imp in self.term_importances()[: self.p]])
        if split_pairs:
            for term, (_, imp) in zip(self.pairs, self.term_importances()[self.p :]):
                imps[term.i] += imp / 2.0
                imps[term.j] += imp / 2.0
        return imps

    def top_k_features(self, k: int, split_pairs: bool = False) -> list[int]:
        if not (1 <= k <= self.p):
            raise ValidationError(f"k must be in [1, {self.p}]")
        imps = self.feature_importances(split_pairs=split_pairs)
        order = np.lexsort((np.arange(self.p), -imps))  # ties -> lower id
        return [int(i) for i in order[:k]]

    # -- serialization ------------------------------------------------------

    def to_jsonable(self) -> dict:
        cfg = asdict(self.config)
        cfg["class_weights"] = list(cfg["class_weights"])
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "ebm",
            "feature_names": list(self.feature_names),
            "intercept": self.intercept,
            "cuts": [c.tolist() for c in self.cuts],
            "scores": [s.tolist() for s in self.scores],
            "bin_weights": [w.tolist() for w in self.bin_weights],
            "pairs": [
                {
                    "i": t.i,
                    "j": t.j,
                    "cuts_i": t.cuts_i.tolist(),
                    "cuts_j": t.cuts_j.tolist(),
                    "scores": t.scores.tolist(),
                    "weights": t.weights.tolist(),
                }
                for t in self.pairs
            ],
            "config": cfg,
        }

    @classmethod
    def from_jsonable(cls, doc: dict) -> "EbmModel":
        if doc.get("kind") != "ebm":
            raise ValidationError(f"not an EBM model file (kind={doc.get('kind')!r})")
        if doc.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValidationError(
                f"incompatible model format version {doc.get('format_version')!r}; "
                f"expected {MODEL_FORMAT_VERSION}"
            )
        cfg = dict(doc["config"])
        cfg["class_weights"] = tuple(cfg["class_weights"])
        pairs = [
            PairTerm(
                i=t["i"], j=t["j"],
                cuts_i=np.asarray(t["cuts_i"], dtype=np.float64),
                cuts_j=np.asarray(t["cuts_j"], dtype=np.float64),
                scores=np.asarray(t["scores"], dtype=np.float64),
                weights=np.asarray(t["weights"], dtype=np.float64),
            )
            for t in doc["pairs"]
        ]
        return cls(
            feature_names=list(doc["feature_names"]),
            intercept=float(doc["intercept"]),
            cuts=[np.asarray(c, dtype=np.float64) for c in doc["cuts"]],
            scores=[np.asarray(s, dtype=np.float64) for s in doc["scores"]],
            bin_weights=[np.asarray(w, dtype=np.float64) for w in doc["bin_weights"]],
            pairs=pairs,
            config=EbmConfig(**cfg),
        )


def save_model(model: EbmModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_jsonable(), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path) -> EbmModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed model file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"malformed model file {path}")
    return EbmModel.from_jsonable(doc)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def _boost_univariate(bin_idx, nbins, y, w, cfg, track_loss=False):
    """Cyclic boosting of per-bin scores. Each round computes residuals
    once and updates every feature from them, so column order is
    irrelevant up to float summation order."""
    n, p = bin_idx.shape
    wy = np.sum(w * y)
    wt = np.sum(w)
    base = min(max(wy / wt, 1e-12), 1 - 1e-12)
    intercept = float(np.log(base / (1.0 - base)))
    F = np.full(n, intercept)
    scores = [np.zeros(nb) for nb in nbins]
    losses = []
    for _ in range(cfg.max_rounds):
        prob = _sigmoid(F)
        if track_loss:
            eps = 1e-12
            losses.append(float(-np.sum(w * (y * np.log(prob + eps)
                                             + (1 - y) * np.log(1 - prob + eps))) / wt))
        resid = y - prob
        for j in range(p):
            num = np.bincount(bin_idx[:, j], weights=w * resid, minlength=nbins[j])
            den = np.bincount(bin_idx[:, j], weights=w, minlength=nbins[j])
            upd = cfg.learning_rate * np.where(den > 0, num / np.maximum(den, 1e-300), 0.0)
            scores[j] += upd
            F += upd[bin_idx[:, j]]
    return intercept, scores, F, losses


def _boost_pairs(pair_idx, pair_shapes, F0, y, w, cfg):
    """Boost 2-D grids on the flattened joint bins; same step rule as the
    univariate stage, for max_rounds // 4 rounds."""
    rounds = max(1, cfg.max_rounds // 4)
    F = F0.copy()
    grids = [np.zeros(ni * nj) for ni, nj in pair_shapes]
    for _ in range(rounds):
        resid = y - _sigmoid(F)
        for t, idx in enumerate(pair_idx):
            nb = len(grids[t])
            num = np.bincount(idx, weights=w * resid, minlength=nb)
            den = np.bincount(idx, weights=w, minlength=nb)
            upd = cfg.learning_rate * np.where(den > 0, num / np.maximum(den, 1e-300), 0.0)
            grids[t] += upd
            F += upd[idx]
    return grids


def _rss_reduction(idx: np.ndarray, nb: int, resid: np.ndarray, w: np.ndarray) -> float:
    """Residual sum-of-squares reduction of the best piecewise-constant
    weighted fit over the given bins: sum of (sum w r)^2 / sum w."""
    num = np.bincount(idx, weights=w * resid, minlength=nb)
    den = np.bincount(idx, weights=w, minlength=nb)
    mask = den > 0
    return float(np.sum(num[mask] ** 2 / den[mask]))


def detect_interactions(X, resid, w, coarse_cuts, k: int, warn=None) -> list[tuple[int, int]]:
    """Rank feature pairs by the RSS reduction of a joint grid fit to the
    working residuals, minus the reduction achievable by the two marginal
    fits. Ties break lexicographically by (i, j)."""
    p = X.shape[1]
    max_pairs = p * (p - 1) // 2
    if k > max_pairs:
        if warn is not None:
            warn(f"interactions clamped from {k} to {max_pairs}")
        k = max_pairs
    if k <= 0:
        return []
    coarse_idx = _bin_matrix(X, coarse_cuts)
    nb = [len(c) + 1 for c in coarse_cuts]
    marginal = [_rss_reduction(coarse_idx[:, j], nb[j], resid, w) for j in range(p)]
    scored = []
    for i in range(p):
        for j in range(i + 1, p):
            joint = coarse_idx[:, i] * nb[j] + coarse_idx[:, j]
            red = _rss_reduction(joint, nb[i] * nb[j], resid, w)
            scored.append((-(red - marginal[i] - marginal[j]), i, j))
    scored.sort()
    return [(i, j) for _, i, j in scored[:k]]


def train_ebm(ds: Dataset, cfg: EbmConfig) -> EbmModel:
    """Train the full model: bagged cyclic univariate boosting, interaction
    detection on the averaged model's residuals, bagged pair boosting,
    centering with mass moved to the intercept."""
    if ds.n_pos == 0 or ds.n_neg == 0:
        raise TrainingError("single-class labels: training requires both classes")
    X, y = ds.X, ds.y.astype(np.float64)
    n, p = X.shape
    cuts = build_bins(X, cfg.max_bins, cfg.min_samples_bin)
    nbins = [len(c) + 1 for c in cuts]
    bidx = _bin_matrix(X, cuts)
    w_class = np.where(ds.y == 1, cfg.class_weights[1], cfg.class_weights[0])

    bag_seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.outer_bags)
    bag_weights = []
    for b in range(cfg.outer_bags):
        if cfg.outer_bags == 1:
            bag_weights.append(w_class)
        else:
            rng = np.random.default_rng(bag_seeds[b])
            counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
            bag_weights.append(counts * w_class)

    # univariate stage, per bag
    bag_results = [
        _boost_univariate(bidx, nbins, y, bw, cfg) for bw in bag_weights
    ]
    intercept = float(np.mean([r[0] for r in bag_results]))
    scores = [
        np.mean([r[1][j] for r in bag_results], axis=0) for j in range(p)
    ]

    # interaction stage
    pairs: list[PairTerm] = []
    if cfg.interactions > 0 and p >= 2:
        coarse_cuts = build_bins(X, cfg.interaction_grid, cfg.min_samples_bin)
        F_avg = np.full(n, intercept)
        for j in range(p):
            F_avg += scores[j][bidx[:, j]]
        resid = y - _sigmoid(F_avg)
        selected = detect_interactions(X, resid, w_class, coarse_cuts, cfg.interactions)
        if selected:
            coarse_idx = _bin_matrix(X, coarse_cuts)
            nb = [len(c) + 1 for c in coarse_cuts]
            pair_shapes = [(nb[i], nb[j]) for i, j in selected]
            pair_idx = [coarse_idx[:, i] * nb[j] + coarse_idx[:, j] for i, j in selected]
            bag_grids = []
            for b in range(cfg.outer_bags):
                ib, sb = bag_results[b][0], bag_results[b][1]
                Fb = np.full(n, ib)
                for j in range(p):
                    Fb += sb[j][bidx[:, j]]
                bag_grids.append(
                    _boost_pairs(pair_idx, pair_shapes, Fb, y, bag_weights[b], cfg)
                )
            for t, (i, j) in enumerate(selected):
                grid = np.mean([g[t] for g in bag_grids], axis=0).reshape(pair_shapes[t])
                cell_w = np.bincount(
                    pair_idx[t], weights=w_class, minlength=nb[i] * nb[j]
                ).reshape(pair_shapes[t])
                pairs.append(PairTerm(i=i, j=j, cuts_i=coarse_cuts[i],
                                      cuts_j=coarse_cuts[j], scores=grid,
                                      weights=cell_w))

    # centering: move each term's training-weighted mean to the intercept
    bin_weights = [
        np.bincount(bidx[:, j], weights=w_class, minlength=nbins[j]) for j in range(p)
    ]
    for j in range(p):
        total = bin_weights[j].sum()
        mean = float(np.sum(scores[j] * bin_weights[j]) / total)
        scores[j] = scores[j] - mean
        intercept += mean
    for term in pairs:
        total = term.weights.sum()
        mean = float(np.sum(term.scores * term.weights) / total)
        term.scores = term.scores - mean
        intercept += mean

    return EbmModel(
        feature_names=list(ds.feature_names),
        intercept=intercept,
        cuts=cuts,
        scores=scores,
        bin_weights=bin_weights,
        pairs=pairs,
        config=cfg,
    )
