"""Orthogonal-array experiment design, execution, and signal-to-noise
main-effects analysis.

Arrays are generated by modular linear forms over prime fields: L9 and L25
come from two-symbol rows (a, b) with columns a, b, a+b, a+2b, ... (mod
levels); L27 comes from three-symbol rows over Z3 with one column per
pairwise-independent linear form.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .dataset import Dataset, StratifiedFolds, stratified_kfold, subset_rows
from .errors import ValidationError
from .scaling import CODE_NONE, SEQUENCE_LENGTH, ScalerSequence


@dataclass(frozen=True)
class OrthogonalArray:
    name: str
    rows: np.ndarray  # experiments x factors, 1-based level indices
    levels: int

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_factors(self) -> int:
        return self.rows.shape[1]

    def check_balance(self) -> bool:
        """Each level appears rows/levels times in every column."""
        want = self.n_rows // self.levels
        for c in range(self.n_factors):
            counts = np.bincount(self.rows[:, c], minlength=self.levels + 1)[1:]
            if not (counts == want).all():
                return False
        return True

    def check_orthogonality(self) -> bool:
        """Every ordered level pair appears rows/levels^2 times for every
        column pair."""
        want = self.n_rows // (self.levels**2)
        for c1 in range(self.n_factors):
            for c2 in range(c1 + 1, self.n_factors):
                joint = (self.rows[:, c1] - 1) * self.levels + (self.rows[:, c2] - 1)
                counts = np.bincount(joint, minlength=self.levels**2)
                if not (counts == want).all():
                    return False
        return True


def _is_prime(m: int) -> bool:
    return m >= 2 and all(m % d for d in range(2, int(m**0.5) + 1))


def build_oa(levels: int, factors: int) -> OrthogonalArray:
    """Orthogonal array for `factors` columns at a prime number of levels.

    factors <= levels + 1 gives levels^2 rows (L9, L25); for 3 levels and
    up to 13 factors a 27-row array from Z3^3 linear forms is used.
    """
    if not _is_prime(levels):
        raise ValidationError(f"unsupported level count {levels}: must be prime")
    if factors < 1:
        raise ValidationError("factors must be >= 1")
    if factors <= levels + 1:
        rows = np.empty((levels**2, factors), dtype=np.int64)
        r = 0
        for a in range(levels):
            for b in range(levels):
                for c in range(factors):
                    if c == 0:
                        rows[r, c] = a
                    elif c == 1:
                        rows[r, c] = b
                    else:
                        rows[r, c] = (a + (c - 1) * b) % levels
                r += 1
        name = f"L{levels**2}"
        return OrthogonalArray(name=name, rows=rows + 1, levels=levels)
    if levels == 3 and factors <= 13:
        # one column per linear form with first non-zero coefficient 1
        forms = []
        for coeffs in product(range(3), repeat=3):
            nz = [c for c in coeffs if c != 0]
            if nz and nz[0] == 1:
                forms.append(coeffs)
        forms = forms[:factors]
        points = list(product(range(3), repeat=3))
        rows = np.array(
            [[sum(f[k] * pt[k] for k in range(3)) % 3 for f in forms] for pt in points],
            dtype=np.int64,
        )
        return OrthogonalArray(name="L27", rows=rows + 1, levels=3)
    raise ValidationError(
        f"unsupported combination: {factors} factors at {levels} levels"
    )


def build_named_oa(name: str, factors: int) -> OrthogonalArray:
    """Standard arrays by name: L9 (3 levels), L25 (5 levels), L27 (3
    levels, 27 rows)."""
    name = name.upper()
    if name == "L9":
        if factors > 4:
            raise ValidationError("L9 supports at most 4 factors")
        return build_oa(3, factors)
    if name == "L25":
        if factors > 6:
            raise ValidationError("L25 supports at most 6 factors")
        return build_oa(5, factors)
    if name == "L27":
        if factors > 13:
            raise ValidationError("L27 supports at most 13 factors")
        if factors <= 4:
            # force the 27-row construction even when L9 would fit
            oa = build_oa(3, 5)
            return OrthogonalArray(name="L27", rows=oa.rows[:, :factors], levels=3)
        return build_oa(3, factors)
    raise ValidationError(f"unknown orthogonal array {name!r}")


def row_to_scaler_sequence(row) -> ScalerSequence:
    """Map an OA row (levels 1..5) to a pipeline: position k's level picks
    the scaler for slot k; a level already seen is replaced by 0."""
    row = list(row)
    if len(row) != SEQUENCE_LENGTH:
        raise ValidationError(f"row must have {SEQUENCE_LENGTH} positions")
    seen = set()
    codes = []
    for level in row:
        level = int(level)
        if not 1 <= level <= 5:
            raise ValidationError("levels must be in [1, 5]")
        if level in seen:
            codes.append(CODE_NONE)
        else:
            seen.add(level)
            codes.append(level)
    return ScalerSequence.from_codes(codes)


def sn_ratio(values, mode: str = "larger_is_better") -> float:
    """Larger-the-better signal-to-noise ratio in dB:
    -10*log10(mean(1/v^2))."""
    if mode != "larger_is_better":
        raise ValidationError(f"unsupported S/N mode {mode!r}")
    v = np.asarray(list(values), dtype=np.float64)
    if len(v) == 0 or (v <= 0).any():
        raise ValidationError("S/N requires a non-empty list of positive values")
    return float(-10.0 * np.log10(np.mean(1.0 / v**2)))


@dataclass
class ExperimentResult:
    row_index: int
    levels: list[int]
    config: object
    fold_scores: list[float] | None
    mean: float | None
    sn: float | None
    failed: bool = False
    reason: str = ""

    def to_jsonable(self) -> dict:
        return {
            "row_index": self.row_index,
            "levels": self.levels,
            "config": _config_jsonable(self.config),
            "fold_scores": self.fold_scores,
            "mean": self.mean,
            "sn": self.sn,
            "failed": self.failed,
            "reason": self.reason,
        }


def _config_jsonable(config):
    if isinstance(config, ScalerSequence):
        return {"scaler_codes": config.codes}
    if isinstance(config, dict):
        return config
    return repr(config)


@dataclass
class MainEffects:
    factor_level_sn: np.ndarray  # factors x levels mean S/N
    best_levels: list[int]  # 1-based
    ties: list[bool]
    best_row_index: int

    def to_jsonable(self) -> dict:
        return {
            "factor_level_sn": self.factor_level_sn.tolist(),
            "best_levels": self.best_levels,
            "ties": self.ties,
            "best_row_index": self.best_row_index,
        }


def run_experiment(ds: Dataset, oa: OrthogonalArray, config_mapper, trainer,
                   k_folds: int = 5, seed: int = 0,
                   folds: StratifiedFolds | None = None) -> list[ExperimentResult]:
    """Evaluate every OA row with cross-validation.

    ``config_mapper(row) -> config``; ``trainer(train_ds, val_ds, config,
    seed) -> float score`` must fit any preprocessing on the training fold
    only. Per-row seeds derive from (seed, row index) so row execution
    order is irrelevant. A failing row is recorded, not fatal.
    """
    if folds is None:
        folds = stratified_kfold(ds, k_folds, seed)
    results = []
    for r in range(oa.n_rows):
        levels = [int(v) for v in oa.rows[r]]
        try:
            config = config_mapper(oa.rows[r])
            scores = []
            for f in range(folds.k):
                train_ds = subset_rows(ds, folds.train_indices(f))
                val_ds = subset_rows(ds, folds.test_indices(f))
                row_seed = int(
                    np.random.SeedSequence(entropy=seed, spawn_key=(r,)).generate_state(1)[0]
                )
                scores.append(float(trainer(train_ds, val_ds, config, row_seed)))
            results.append(ExperimentResult(
                row_index=r, levels=levels, config=config,
                fold_scores=scores, mean=float(np.mean(scores)),
                sn=sn_ratio(scores),
            ))
        except Exception as exc:  # row failure isolated by contract
            results.append(ExperimentResult(
                row_index=r, levels=levels, config=None,
                fold_scores=None, mean=None, sn=None,
                failed=True, reason=f"{type(exc).__name__}: {exc}",
            ))
    return results


def main_effects_select(results: list[ExperimentResult],
                        oa: OrthogonalArray) -> MainEffects:
    """Mean S/N per (factor, level); best level per factor is the argmax
    with ties going to the lowest level index. Also reports the best
    observed row by mean score (the adoption rule)."""
    ok = [r for r in results if not r.failed]
    if not ok:
        raise ValidationError("all experiment rows failed")
    table = np.zeros((oa.n_factors, oa.levels))
    counts = np.zeros((oa.n_factors, oa.levels))
    for r in ok:
        for f in range(oa.n_factors):
            lvl = r.levels[f] - 1
            table[f, lvl] += r.sn
            counts[f, lvl] += 1
    with np.errstate(invalid="ignore"):
        table = np.where(counts > 0, table / np.maximum(counts, 1), -np.inf)
    best_levels = []
    ties = []
    for f in range(oa.n_factors):
        best = int(np.argmax(table[f]))  # argmax returns the lowest index on ties
        best_levels.append(best + 1)
        ties.append(int((table[f] == table[f, best]).sum()) > 1)
    best_row = min(ok, key=lambda r: (-r.mean, r.row_index)).row_index
    return MainEffects(factor_level_sn=table, best_levels=best_levels,
                       ties=ties, best_row_index=best_row)
