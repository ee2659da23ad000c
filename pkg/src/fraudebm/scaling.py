"""Data transformers and ordered scaler sequences.

Five transformer kinds plus a no-op, identified by integer codes:
0=no-op, 1=minmax, 2=standard, 3=quantile, 4=robust, 5=power(Yeo-Johnson).
A ScalerSequence is an ordered pipeline of exactly five slots where code 0
means "do nothing" at that position.

Conventions fixed for reproducibility (recorded in serialized output):
percentiles use linear interpolation between order statistics; standard
deviation uses the population (divide-by-n) form; constant columns pass
through every transformer unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import ValidationError

CODE_NONE = 0
CODE_MINMAX = 1
CODE_STANDARD = 2
CODE_QUANTILE = 3
CODE_ROBUST = 4
CODE_POWER = 5

CODE_NAMES = {
    CODE_NONE: "none",
    CODE_MINMAX: "minmax",
    CODE_STANDARD: "standard",
    CODE_QUANTILE: "quantile",
    CODE_ROBUST: "robust",
    CODE_POWER: "power",
}

_CDF_CLIP = 1e-7  # CDF clamp before the inverse-normal map


@dataclass(frozen=True)
class ScalerKind:
    """A transformer kind (by code) together with its parameters."""

    code: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.code not in CODE_NAMES:
            raise ValidationError(f"unknown scaler code {self.code}")
        p = self.params
        if self.code == CODE_MINMAX:
            low, high = p.get("feature_range", (0.0, 1.0))
            if not low < high:
                raise ValidationError("minmax feature_range requires low < high")
        elif self.code == CODE_QUANTILE:
            nq = p.get("n_quantiles", 1000)
            if nq <= 1:
                raise ValidationError("n_quantiles must exceed 1")
            if p.get("output_distribution", "uniform") not in ("uniform", "normal"):
                raise ValidationError("output_distribution must be uniform or normal")
        elif self.code == CODE_ROBUST:
            q_low, q_high = p.get("quantile_range", (25.0, 75.0))
            if not (0 <= q_low < q_high <= 100):
                raise ValidationError("robust quantile_range must satisfy 0 <= low < high <= 100")
        elif self.code == CODE_POWER:
            if p.get("method", "yeo-johnson") != "yeo-johnson":
                raise ValidationError("only the yeo-johnson power method is supported")

    @property
    def name(self) -> str:
        return CODE_NAMES[self.code]


def no_op() -> ScalerKind:
    return ScalerKind(CODE_NONE)


def minmax(feature_range=(0.0, 1.0)) -> ScalerKind:
    return ScalerKind(CODE_MINMAX, {"feature_range": tuple(feature_range)})


def standard(with_mean: bool = True, with_std: bool = True) -> ScalerKind:
    return ScalerKind(CODE_STANDARD, {"with_mean": with_mean, "with_std": with_std})


def quantile(n_quantiles: int = 1000, output_distribution: str = "uniform") -> ScalerKind:
    return ScalerKind(
        CODE_QUANTILE,
        {"n_quantiles": int(n_quantiles), "output_distribution": output_distribution},
    )


def robust(quantile_range=(25.0, 75.0)) -> ScalerKind:
    return ScalerKind(CODE_ROBUST, {"quantile_range": tuple(quantile_range)})


def power() -> ScalerKind:
    return ScalerKind(CODE_POWER, {"method": "yeo-johnson"})


#: Parameterization used when a sequence is built from bare codes
#: (e.g. orthogonal-array rows).
DEFAULT_KINDS = {
    CODE_NONE: no_op(),
    CODE_MINMAX: minmax(),
    CODE_STANDARD: standard(),
    CODE_QUANTILE: quantile(1000, "normal"),
    CODE_ROBUST: robust(),
    CODE_POWER: power(),
}

SEQUENCE_LENGTH = 5


@dataclass(frozen=True)
class ScalerSequence:
    """Ordered pipeline of exactly five slots; no non-zero code repeats."""

    slots: tuple[ScalerKind, ...]

    def __post_init__(self):
        if len(self.slots) != SEQUENCE_LENGTH:
            raise ValidationError(f"sequence must have exactly {SEQUENCE_LENGTH} slots")
        codes = [s.code for s in self.slots if s.code != CODE_NONE]
        if len(set(codes)) != len(codes):
            raise ValidationError("a non-zero scaler code appears twice in the sequence")

    @property
    def codes(self) -> list[int]:
        return [s.code for s in self.slots]

    @classmethod
    def from_codes(cls, codes) -> "ScalerSequence":
        return cls(tuple(DEFAULT_KINDS[int(c)] for c in codes))


def identity_sequence() -> ScalerSequence:
    return ScalerSequence.from_codes([0] * SEQUENCE_LENGTH)


# ---------------------------------------------------------------------------
# Yeo-Johnson
# ---------------------------------------------------------------------------

def yeo_johnson(x: np.ndarray, lam: float) -> np.ndarray:
    """Elementwise Yeo-Johnson transform. lam=1 is the exact identity."""
    if lam == 1.0:
        return x.copy()
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    if abs(lam) < 1e-12:
        out[pos] = np.log1p(x[pos])
    else:
        out[pos] = (np.power(x[pos] + 1.0, lam) - 1.0) / lam
    neg = ~pos
    if abs(lam - 2.0) < 1e-12:
        out[neg] = -np.log1p(-x[neg])
    else:
        out[neg] = -(np.power(1.0 - x[neg], 2.0 - lam) - 1.0) / (2.0 - lam)
    return out


def yeo_johnson_loglik(x: np.ndarray, lam: float) -> float:
    """Profile log-likelihood of the Gaussianized transform at lam."""
    psi = yeo_johnson(x, lam)
    var = psi.var()
    if not np.isfinite(var) or var <= 0:
        return -np.inf
    n = len(x)
    return float(-n / 2.0 * np.log(var) + (lam - 1.0) * np.sum(np.sign(x) * np.log1p(np.abs(x))))


_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def fit_yeo_johnson_lambda(x: np.ndarray, lo: float = -5.0, hi: float = 5.0,
                           tol: float = 1e-6) -> float:
    """Golden-section maximization of the profile log-likelihood on [lo, hi]."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = yeo_johnson_loglik(x, c)
    fd = yeo_johnson_loglik(x, d)
    while (b - a) > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = yeo_johnson_loglik(x, c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = yeo_johnson_loglik(x, d)
    return float((a + b) / 2.0)


# ---------------------------------------------------------------------------
# Fit / apply
# ---------------------------------------------------------------------------

@dataclass
class FittedScaler:
    """Per-feature fitted statistics for one transformer."""

    kind: ScalerKind
    n_features: int
    constant: np.ndarray  # bool mask; constant columns pass through
    stats: dict

    def to_jsonable(self) -> dict:
        out = {
            "code": self.kind.code,
            "params": _jsonable_params(self.kind.params),
            "n_features": self.n_features,
            "constant": self.constant.tolist(),
            "stats": {},
        }
        for key, val in self.stats.items():
            out["stats"][key] = np.asarray(val).tolist()
        return out

    @classmethod
    def from_jsonable(cls, doc: dict) -> "FittedScaler":
        kind = ScalerKind(doc["code"], _params_from_jsonable(doc["code"], doc["params"]))
        stats = {k: np.asarray(v, dtype=np.float64) for k, v in doc["stats"].items()}
        return cls(
            kind=kind,
            n_features=doc["n_features"],
            constant=np.asarray(doc["constant"], dtype=bool),
            stats=stats,
        )


def _jsonable_params(params: dict) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in params.items()}


def _params_from_jsonable(code: int, params: dict) -> dict:
    out = dict(params)
    for key in ("feature_range", "quantile_range"):
        if key in out:
            out[key] = tuple(out[key])
    return out


def fit_scaler(kind: ScalerKind, X: np.ndarray) -> FittedScaler:
    """Fit one transformer; statistics are per-feature and deterministic."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("X must be a non-empty 2-D matrix")
    n, p = X.shape
    constant = X.min(axis=0) == X.max(axis=0)
    stats: dict = {}
    code = kind.code
    if code == CODE_NONE:
        pass
    elif code == CODE_MINMAX:
        stats["data_min"] = X.min(axis=0)
        stats["data_max"] = X.max(axis=0)
    elif code == CODE_STANDARD:
        stats["mean"] = X.mean(axis=0)
        stats["std"] = X.std(axis=0)  # population convention
    elif code == CODE_QUANTILE:
        nq = min(kind.params["n_quantiles"], n)
        probs = np.linspace(0.0, 1.0, nq)
        stats["probs"] = probs
        stats["references"] = np.percentile(X, probs * 100.0, axis=0)
        stats["n_quantiles_effective"] = np.array([nq], dtype=np.float64)
    elif code == CODE_ROBUST:
        q_low, q_high = kind.params["quantile_range"]
        stats["center"] = np.median(X, axis=0)
        lo = np.percentile(X, q_low, axis=0)
        hi = np.percentile(X, q_high, axis=0)
        stats["scale"] = hi - lo
    elif code == CODE_POWER:
        lambdas = np.empty(p)
        for j in range(p):
            lambdas[j] = 1.0 if constant[j] else fit_yeo_johnson_lambda(X[:, j])
        stats["lambdas"] = lambdas
    bad = [k for k, v in stats.items() if not np.isfinite(np.asarray(v)).all()]
    if bad:
        raise ValidationError(f"non-finite fitted statistics: {bad}")
    return FittedScaler(kind=kind, n_features=p, constant=constant, stats=stats)


def apply_scaler(fitted: FittedScaler, X: np.ndarray) -> np.ndarray:
    """Apply a fitted transformer column by column."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != fitted.n_features:
        raise ValidationError(
            f"column count {X.shape[1] if X.ndim == 2 else '?'} does not match "
            f"fit ({fitted.n_features})"
        )
    code = fitted.kind.code
    out = X.copy()
    active = ~fitted.constant
    if code == CODE_NONE or not active.any():
        return out
    s = fitted.stats
    if code == CODE_MINMAX:
        low, high = fitted.kind.params["feature_range"]
        dmin, dmax = s["data_min"], s["data_max"]
        span = np.where(active, dmax - dmin, 1.0)
        scaled = low + (X - dmin) * (high - low) / span
        out[:, active] = scaled[:, active]
    elif code == CODE_STANDARD:
        mean = s["mean"] if fitted.kind.params.get("with_mean", True) else 0.0
        if fitted.kind.params.get("with_std", True):
            std = np.where(active & (s["std"] > 0), s["std"], 1.0)
        else:
            std = 1.0
        scaled = (X - mean) / std
        out[:, active] = scaled[:, active]
    elif code == CODE_QUANTILE:
        probs = s["probs"]
        refs = s["references"]
        normal = fitted.kind.params.get("output_distribution", "uniform") == "normal"
        for j in np.flatnonzero(active):
            cdf = np.interp(X[:, j], refs[:, j], probs)
            if normal:
                cdf = np.clip(cdf, _CDF_CLIP, 1.0 - _CDF_CLIP)
                out[:, j] = ndtri(cdf)
            else:
                out[:, j] = cdf
    elif code == CODE_ROBUST:
        scale = np.where(active & (s["scale"] > 0), s["scale"], 1.0)
        scaled = (X - s["center"]) / scale
        out[:, active] = scaled[:, active]
    elif code == CODE_POWER:
        for j in np.flatnonzero(active):
            out[:, j] = yeo_johnson(X[:, j], float(s["lambdas"][j]))
    return out


@dataclass
class FittedSequence:
    """Chained fitted transformers: slot i was fitted on the output of
    slots 0..i-1. No-op slots hold None."""

    codes: list[int]
    stages: list[FittedScaler | None]

    def to_jsonable(self) -> dict:
        return {
            "codes": list(self.codes),
            "std_convention": "population",
            "percentile_rule": "linear",
            "stages": [st.to_jsonable() if st is not None else None for st in self.stages],
        }

    @classmethod
    def from_jsonable(cls, doc: dict) -> "FittedSequence":
        stages = [
            FittedScaler.from_jsonable(st) if st is not None else None
            for st in doc["stages"]
        ]
        return cls(codes=list(doc["codes"]), stages=stages)


def fit_sequence(seq: ScalerSequence, X: np.ndarray) -> FittedSequence:
    Xc = np.asarray(X, dtype=np.float64).copy()
    stages: list[FittedScaler | None] = []
    for kind in seq.slots:
        if kind.code == CODE_NONE:
            stages.append(None)
            continue
        fs = fit_scaler(kind, Xc)
        Xc = apply_scaler(fs, Xc)
        stages.append(fs)
    return FittedSequence(codes=seq.codes, stages=stages)


def apply_sequence(fs: FittedSequence, X: np.ndarray) -> np.ndarray:
    out = np.asarray(X, dtype=np.float64).copy()
    for stage in fs.stages:
        if stage is not None:
            out = apply_scaler(stage, out)
    return out
