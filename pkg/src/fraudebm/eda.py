"""Correlation and multicollinearity diagnostics.

Pearson, Spearman, Kendall tau-b, Chatterjee's xi, and variance inflation
factors with bootstrap standard errors and percentile confidence intervals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .dataset import Dataset
from .errors import ValidationError
from .metrics import _average_ranks

METHODS = ("pearson", "spearman", "kendall", "chatterjee")


@dataclass
class CorrelationMatrix:
    method: str
    feature_names: list[str]
    values: np.ndarray  # p x p; row -> column orientation for chatterjee


@dataclass
class VifTable:
    feature_names: list[str]
    vif: np.ndarray
    standard_error: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    bootstrap_b: int
    seed: int
    infinite: np.ndarray  # bool flags for exactly collinear columns


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    sx = x.std()
    sy = y.std()
    if sx == 0 or sy == 0:
        raise ValidationError("pearson correlation undefined: zero variance input")
    cov = ((x - x.mean()) * (y - y.mean())).mean()
    return float(cov / (sx * sy))


def corr_coefficient(x, y, method: str) -> float:
    """Pairwise correlation. pearson is covariance over the std product,
    spearman is pearson on average ranks, kendall is tie-corrected tau-b."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValidationError("inputs must be equal-length vectors of length >= 2")
    if method == "pearson":
        return _pearson(x, y)
    if method == "spearman":
        return _pearson(_average_ranks(x), _average_ranks(y))
    if method == "kendall":
        tau = sps.kendalltau(x, y, variant="b").statistic
        return float(tau)
    raise ValidationError(f"unknown method {method!r}")


def chatterjee_xi(x, y, seed: int = 0) -> float:
    """Chatterjee's rank dependence coefficient xi(x -> y).

    Rows are sorted by x with ties broken by a seeded uniform permutation.
    With r_i = #{j: y_j <= y_i} along that order and l_i = #{j: y_j >= y_i},
    the no-ties form is 1 - 3*sum|dr| / (n^2 - 1) and the ties form is
    1 - n*sum|dr| / (2*sum l_i*(n - l_i)). Constant y returns 0 by the
    independence convention.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if x.shape != y.shape or n < 2:
        raise ValidationError("inputs must be equal-length vectors of length >= 2")
    rng = np.random.default_rng(seed)
    order = np.lexsort((rng.random(n), x))
    y_ord = y[order]
    y_sorted = np.sort(y)
    r = np.searchsorted(y_sorted, y_ord, side="right")
    jumps = np.abs(np.diff(r)).sum()
    if len(np.unique(y)) == n:  # no ties in y
        return float(1.0 - 3.0 * jumps / (n * n - 1.0))
    l = n - np.searchsorted(y_sorted, y_ord, side="left")
    denom = 2.0 * np.sum(l * (n - l))
    if denom == 0:  # constant y
        return 0.0
    return float(1.0 - n * jumps / denom)


def correlation_matrix(ds: Dataset, method: str, seed: int = 0) -> CorrelationMatrix:
    """All pairwise correlations. Symmetric methods fill both triangles from
    one computation; chatterjee is computed in both orientations with the
    diagonal set to 1 for non-constant columns."""
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}")
    if ds.p < 2:
        raise ValidationError("correlation matrix requires at least 2 features")
    p = ds.p
    values = np.eye(p)
    if method == "chatterjee":
        for i in range(p):
            if len(np.unique(ds.X[:, i])) < 2:
                values[i, i] = 0.0
            for j in range(p):
                if i != j:
                    values[i, j] = chatterjee_xi(
                        ds.X[:, i], ds.X[:, j], seed=_pair_seed(seed, i, j)
                    )
    else:
        for i in range(p):
            for j in range(i + 1, p):
                c = corr_coefficient(ds.X[:, i], ds.X[:, j], method)
                values[i, j] = c
                values[j, i] = c
    return CorrelationMatrix(method=method, feature_names=list(ds.feature_names), values=values)


def _pair_seed(seed: int, i: int, j: int) -> int:
    return hash((int(seed), int(i), int(j))) & 0x7FFFFFFF


def _vif_values(X: np.ndarray) -> np.ndarray:
    """VIF_i = 1 / (1 - R_i^2) with R_i^2 from a numerically stable
    least-squares regression of column i on all others plus an intercept.
    Exactly collinear columns come back as +inf."""
    n, p = X.shape
    vifs = np.empty(p)
    for i in range(p):
        target = X[:, i]
        others = np.delete(X, i, axis=1)
        design = np.column_stack([np.ones(n), others])
        coef, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
        resid = target - design @ coef
        sst = np.sum((target - target.mean()) ** 2)
        if sst == 0:
            vifs[i] = np.inf
            continue
        r2 = 1.0 - np.sum(resid**2) / sst
        if r2 >= 1.0 - 1e-12:
            vifs[i] = np.inf
        else:
            vifs[i] = 1.0 / (1.0 - r2)
    return vifs


def vif_table(ds: Dataset, bootstrap_b: int = 100, seed: int = 0,
              include_label: bool = False) -> VifTable:
    """Variance inflation factors with bootstrap SE and 95% percentile CI.

    ``include_label`` appends the label as an extra column (published VIF
    tables for this problem include it)."""
    if ds.p < 2:
        raise ValidationError("VIF requires at least 2 features")
    names = list(ds.feature_names)
    X = ds.X
    if include_label:
        X = np.column_stack([X, ds.y.astype(np.float64)])
        names = names + ["Class"]
    n, p = X.shape
    if n <= p:
        raise ValidationError("VIF requires more rows than columns")
    point = _vif_values(X)
    rng = np.random.default_rng(seed)
    reps = np.empty((bootstrap_b, p))
    for b in range(bootstrap_b):
        rows = rng.integers(0, n, size=n)
        reps[b] = _vif_values(X[rows])
    infinite = ~np.isfinite(point)
    with np.errstate(invalid="ignore"):
        se = reps.std(axis=0, ddof=1)
        lo = np.percentile(reps, 2.5, axis=0)
        hi = np.percentile(reps, 97.5, axis=0)
    # the point estimate is kept inside its interval
    lo = np.minimum(lo, point)
    hi = np.maximum(hi, point)
    se[infinite] = np.inf
    lo[infinite] = np.inf
    hi[infinite] = np.inf
    return VifTable(
        feature_names=names, vif=point, standard_error=se,
        ci_lower=lo, ci_upper=hi, bootstrap_b=bootstrap_b, seed=seed,
        infinite=infinite,
    )
