"""Comparison models: logistic regression, CART decision tree, bagged
random forest, and gradient-boosted trees (in-repo stand-in for a
third-party boosted-tree library).

All models are deterministic under fixed seeds and emit probabilities in
[0, 1]. Trees share one builder: weighted squared-error impurity, which on
binary labels selects the same split as class-weighted Gini (the two
criteria differ by a constant factor of 2). Split thresholds are midpoints
between consecutive distinct sorted values; ties break lexicographically
by (feature, threshold).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import TrainingError, ValidationError


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def _require_both_classes(ds: Dataset):
    if ds.n_pos == 0 or ds.n_neg == 0:
        raise TrainingError("single-class labels: training requires both classes")


# ---------------------------------------------------------------------------
# Logistic regression
# ---------------------------------------------------------------------------

@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    l2: float
    class_weights: tuple[float, float]
    converged: bool
    grad_max_norm: float
    iterations: int

    def predict_proba_matrix(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(X @ self.weights + self.bias)

    def to_jsonable(self) -> dict:
        return {
            "kind": "logreg",
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "l2": self.l2,
            "class_weights": list(self.class_weights),
            "converged": self.converged,
            "grad_max_norm": self.grad_max_norm,
            "iterations": self.iterations,
        }

    @classmethod
    def from_jsonable(cls, doc: dict) -> "LinearModel":
        return cls(
            weights=np.asarray(doc["weights"], dtype=np.float64),
            bias=float(doc["bias"]),
            l2=float(doc["l2"]),
            class_weights=tuple(doc["class_weights"]),
            converged=bool(doc["converged"]),
            grad_max_norm=float(doc["grad_max_norm"]),
            iterations=int(doc["iterations"]),
        )


def train_logreg(ds: Dataset, l2: float = 1.0,
                 class_weights: tuple[float, float] = (1.0, 1.0),
                 tol: float = 1e-6, max_iter: int = 1000) -> LinearModel:
    """Minimize the class-weighted mean logistic loss plus l2/2 * ||w||^2
    (bias unpenalized) by full-batch gradient descent with Armijo
    backtracking. Converged when the gradient max-norm drops below tol."""
    if l2 < 0:
        raise ValidationError("l2 penalty must be non-negative")
    if min(class_weights) <= 0:
        raise ValidationError("class weights must be positive")
    _require_both_classes(ds)
    X, y = ds.X, ds.y.astype(np.float64)
    n, p = X.shape
    sw = np.where(ds.y == 1, class_weights[1], class_weights[0])
    sw = sw / sw.sum()

    def loss_grad(w, b):
        z = X @ w + b
        prob = _sigmoid(z)
        eps = 1e-12
        loss = -np.sum(sw * (y * np.log(prob + eps) + (1 - y) * np.log(1 - prob + eps)))
        loss += l2 / 2.0 * np.dot(w, w)
        r = sw * (prob - y)
        gw = X.T @ r + l2 * w
        gb = r.sum()
        return loss, gw, gb

    w = np.zeros(p)
    b = 0.0
    loss, gw, gb = loss_grad(w, b)
    step = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        gmax = max(np.abs(gw).max(initial=0.0), abs(gb))
        if gmax < tol:
            break
        # Armijo backtracking from the last accepted step (allowed to grow)
        step = min(step * 2.0, 1e6)
        gnorm2 = np.dot(gw, gw) + gb * gb
        while True:
            w_new = w - step * gw
            b_new = b - step * gb
            loss_new, gw_new, gb_new = loss_grad(w_new, b_new)
            if loss_new <= loss - 1e-4 * step * gnorm2 or step < 1e-16:
                break
            step /= 2.0
        w, b, loss, gw, gb = w_new, b_new, loss_new, gw_new, gb_new
    gmax = max(np.abs(gw).max(initial=0.0), abs(gb))
    return LinearModel(
        weights=w, bias=float(b), l2=l2, class_weights=tuple(class_weights),
        converged=gmax < tol, grad_max_norm=float(gmax), iterations=it,
    )


# ---------------------------------------------------------------------------
# Trees
# ---------------------------------------------------------------------------

@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0  # leaf: weighted mean target

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_jsonable(self) -> dict:
        if self.is_leaf:
            return {"value": self.value}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_jsonable(),
            "right": self.right.to_jsonable(),
        }

    @classmethod
    def from_jsonable(cls, doc: dict) -> "TreeNode":
        if "value" in doc:
            return cls(value=float(doc["value"]))
        return cls(
            feature=int(doc["feature"]),
            threshold=float(doc["threshold"]),
            left=cls.from_jsonable(doc["left"]),
            right=cls.from_jsonable(doc["right"]),
        )


def _best_split(X, target, w, idx, feature_ids, min_samples_leaf):
    """Best weighted squared-error split over the candidate features.

    Returns (gain, feature, threshold) or None. Gain is the reduction in
    sum_w (t - mean)^2; strict improvement with ascending (feature,
    threshold) scan gives the lexicographic tie rule.
    """
    t = target[idx]
    ww = w[idx]
    W = ww.sum()
    S = np.dot(ww, t)
    best = None
    for f in feature_ids:
        v = X[idx, f]
        order = np.argsort(v)
        vs = v[order]
        ws = ww[order]
        ts = t[order]
        cw = np.cumsum(ws)
        cwt = np.cumsum(ws * ts)
        # split after position i is valid when vs[i] < vs[i+1]
        distinct = np.flatnonzero(vs[:-1] < vs[1:])
        if len(distinct) == 0:
            continue
        k = len(idx)
        counts = distinct + 1
        ok = (counts >= min_samples_leaf) & (k - counts >= min_samples_leaf)
        distinct = distinct[ok]
        if len(distinct) == 0:
            continue
        wl = cw[distinct]
        sl = cwt[distinct]
        wr = W - wl
        sr = S - sl
        gain = sl * sl / wl + sr * sr / wr - S * S / W
        gi = int(np.argmax(gain))
        if gain[gi] > 1e-12 and (best is None or gain[gi] > best[0]):
            pos = distinct[gi]
            thr = (vs[pos] + vs[pos + 1]) / 2.0
            best = (float(gain[gi]), f, thr)
    return best


def _grow_tree(X, target, w, idx, depth, max_depth, min_samples_split,
               min_samples_leaf, rng=None, max_features=None) -> TreeNode:
    node = TreeNode()
    t = target[idx]
    ww = w[idx]
    node.value = float(np.dot(ww, t) / ww.sum())
    if depth >= max_depth or len(idx) < min_samples_split or t.min() == t.max():
        return node
    p = X.shape[1]
    if max_features is not None and max_features < p:
        feature_ids = np.sort(rng.choice(p, size=max_features, replace=False))
    else:
        feature_ids = np.arange(p)
    best = _best_split(X, target, w, idx, feature_ids, min_samples_leaf)
    if best is None:
        return node
    _, f, thr = best
    mask = X[idx, f] <= thr
    node.feature = f
    node.threshold = thr
    node.left = _grow_tree(X, target, w, idx[mask], depth + 1, max_depth,
                           min_samples_split, min_samples_leaf, rng, max_features)
    node.right = _grow_tree(X, target, w, idx[~mask], depth + 1, max_depth,
                            min_samples_split, min_samples_leaf, rng, max_features)
    return node


def _tree_predict(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if nd.is_leaf:
            out[idx] = nd.value
            continue
        mask = X[idx, nd.feature] <= nd.threshold
        stack.append((nd.left, idx[mask]))
        stack.append((nd.right, idx[~mask]))
    return out


@dataclass
class TreeModel:
    root: TreeNode
    max_depth: int
    min_samples_split: int
    min_samples_leaf: int
    class_weights: tuple[float, float]

    def predict_proba_matrix(self, X: np.ndarray) -> np.ndarray:
        return _tree_predict(self.root, np.asarray(X, dtype=np.float64))

    def to_jsonable(self) -> dict:
        return {
            "kind": "tree",
            "root": self.root.to_jsonable(),
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "class_weights": list(self.class_weights),
        }

    @classmethod
    def from_jsonable(cls, doc: dict) -> "TreeModel":
        return cls(
            root=TreeNode.from_jsonable(doc["root"]),
            max_depth=int(doc["max_depth"]),
            min_samples_split=int(doc["min_samples_split"]),
            min_samples_leaf=int(doc["min_samples_leaf"]),
            class_weights=tuple(doc["class_weights"]),
        )


def train_tree(ds: Dataset, max_depth: int = 5, min_samples_split: int = 50,
               min_samples_leaf: int = 20,
               class_weights: tuple[float, float] = (1.0, 1.0)) -> TreeModel:
    """Greedy CART with class-weighted Gini (via the equivalent weighted
    squared-error criterion). Leaves predict the weighted positive rate."""
    _require_both_classes(ds)
    w = np.where(ds.y == 1, class_weights[1], class_weights[0]).astype(np.float64)
    root = _grow_tree(ds.X, ds.y.astype(np.float64), w, np.arange(ds.n), 0,
                      max_depth, max(2, min_samples_split), min_samples_leaf)
    return TreeModel(root=root, max_depth=max_depth,
                     min_samples_split=min_samples_split,
                     min_samples_leaf=min_samples_leaf,
                     class_weights=tuple(class_weights))


@dataclass
class ForestModel:
    trees: list[TreeModel]
    seed: int
    max_features_rule: str = "sqrt"

    def predict_proba_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.mean([t.predict_proba_matrix(X) for t in self.trees], axis=0)

    def to_jsonable(self) -> dict:
        return {
            "kind": "forest",
            "seed": self.seed,
            "max_features_rule": self.max_features_rule,
            "trees": [t.to_jsonable() for t in self.trees],
        }

    @classmethod
    def from_jsonable(cls, doc: dict) -> "ForestModel":
        return cls(
            trees=[TreeModel.from_jsonable(t) for t in doc["trees"]],
            seed=int(doc["seed"]),
            max_features_rule=doc.get("max_features_rule", "sqrt"),
        )


def train_forest(ds: Dataset, n_estimators: int = 200, max_depth: int = 10,
                 min_samples_leaf: int = 1, seed: int = 0,
                 class_weights: tuple[float, float] = (1.0, 1.0)) -> ForestModel:
    """Bagged trees with ceil(sqrt(p)) candidate features per split;
    prediction is the mean of tree probabilities."""
    _require_both_classes(ds)
    max_features = int(np.ceil(np.sqrt(ds.p)))
    w = np.where(ds.y == 1, class_weights[1], class_weights[0]).astype(np.float64)
    y = ds.y.astype(np.float64)
    trees = []
    seeds = np.random.SeedSequence(seed).spawn(n_estimators)
    for s in seeds:
        rng = np.random.default_rng(s)
        idx = rng.integers(0, ds.n, size=ds.n)
        root = _grow_tree(ds.X, y, w, np.sort(idx), 0, max_depth, 2,
                          min_samples_leaf, rng=rng, max_features=max_features)
        trees.append(TreeModel(root=root, max_depth=max_depth,
                               min_samples_split=2,
                               min_samples_leaf=min_samples_leaf,
                               class_weights=tuple(class_weights)))
    return ForestModel(trees=trees, seed=seed)


@dataclass
class GbtModel:
    trees: list[TreeNode]
    base_logit: float
    learning_rate: float
    scale_pos_weight: float
    max_depth: int

    def predict_logit_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        F = np.full(X.shape[0], self.base_logit)
        for tree in self.trees:
            F += self.learning_rate * _tree_predict(tree, X)
        return F

    def predict_proba_matrix(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.predict_logit_matrix(X))

    def to_jsonable(self) -> dict:
        return {
            "kind": "gbt",
            "base_logit": self.base_logit,
            "learning_rate": self.learning_rate,
            "scale_pos_weight": self.scale_pos_weight,
            "max_depth": self.max_depth,
            "trees": [t.to_jsonable() for t in self.trees],
        }

    @classmethod
    def from_jsonable(cls, doc: dict) -> "GbtModel":
        return cls(
            trees=[TreeNode.from_jsonable(t) for t in doc["trees"]],
            base_logit=float(doc["base_logit"]),
            learning_rate=float(doc["learning_rate"]),
            scale_pos_weight=float(doc["scale_pos_weight"]),
            max_depth=int(doc["max_depth"]),
        )


def train_gbt(ds: Dataset, learning_rate: float = 0.1, max_depth: int = 3,
              n_rounds: int = 100, scale_pos_weight: float = 1.0,
              min_samples_leaf: int = 1, track_loss: bool = False):
    """Stagewise first-order boosting: regression trees fit to weighted
    logistic residuals, positive-class weight multiplied by
    scale_pos_weight. Returns (model, per-round losses if tracked)."""
    _require_both_classes(ds)
    X, y = ds.X, ds.y.astype(np.float64)
    w = np.where(ds.y == 1, scale_pos_weight, 1.0).astype(np.float64)
    wt = w.sum()
    base = min(max(np.dot(w, y) / wt, 1e-12), 1 - 1e-12)
    base_logit = float(np.log(base / (1 - base)))
    F = np.full(ds.n, base_logit)
    trees: list[TreeNode] = []
    losses = []
    idx_all = np.arange(ds.n)
    for _ in range(n_rounds):
        prob = _sigmoid(F)
        if track_loss:
            eps = 1e-12
            losses.append(float(-np.dot(w, y * np.log(prob + eps)
                                        + (1 - y) * np.log(1 - prob + eps)) / wt))
        resid = y - prob
        tree = _grow_tree(X, resid, w, idx_all, 0, max_depth, 2, min_samples_leaf)
        trees.append(tree)
        F += learning_rate * _tree_predict(tree, X)
    if track_loss:
        prob = _sigmoid(F)
        eps = 1e-12
        losses.append(float(-np.dot(w, y * np.log(prob + eps)
                                    + (1 - y) * np.log(1 - prob + eps)) / wt))
    model = GbtModel(trees=trees, base_logit=base_logit,
                     learning_rate=learning_rate,
                     scale_pos_weight=scale_pos_weight, max_depth=max_depth)
    return (model, losses) if track_loss else model
