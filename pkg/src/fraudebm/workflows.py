"""Experiment workflows behind the CLI verbs.

Every workflow takes plain inputs, returns a JSON-serializable report, and
optionally writes deterministic JSON/CSV files (sorted keys, no
timestamps), so identical inputs reproduce byte-identical outputs.
"""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

import numpy as np

from . import baselines, eda, scaling, taguchi
from .dataset import Dataset, select_features, stratified_kfold, subset_rows
from .ebm import EbmConfig, load_model, save_model, train_ebm
from .errors import TrainingError, ValidationError
from .metrics import overfit_gap, precision_recall_f1, roc_auc

TOOL_VERSION = "0.1.0"

MODEL_NAMES = ("ebm", "logreg", "tree", "forest", "gbt")


# ---------------------------------------------------------------------------
# Report I/O
# ---------------------------------------------------------------------------

def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def default_hparam_levels() -> dict:
    with resources.files("fraudebm.data").joinpath("hparam_levels.json").open() as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Model registry
# ---------------------------------------------------------------------------

def _normalize_params(name: str, params: dict, seed: int) -> dict:
    out = dict(params)
    cw_pos = out.pop("class_weight_pos", None)
    if cw_pos is not None:
        out["class_weights"] = (1.0, float(cw_pos))
    if "class_weights" in out:
        out["class_weights"] = tuple(out["class_weights"])
    if name in ("ebm", "forest"):
        out["seed"] = seed
    return out


def train_model(name: str, ds: Dataset, params: dict, seed: int):
    """Train one model by registry name; returns an object exposing
    predict_proba_matrix."""
    if name not in MODEL_NAMES:
        raise ValidationError(f"unknown model {name!r}; choose from {MODEL_NAMES}")
    kw = _normalize_params(name, params, seed)
    if name == "ebm":
        return train_ebm(ds, EbmConfig(**kw))
    if name == "logreg":
        kw.pop("seed", None)
        kw["max_iter"] = int(kw.get("max_iter", 1000))
        return baselines.train_logreg(ds, **kw)
    if name == "tree":
        return baselines.train_tree(ds, **{k: (int(v) if k != "class_weights" else v)
                                           for k, v in kw.items()})
    if name == "forest":
        return baselines.train_forest(ds, **kw)
    return baselines.train_gbt(ds, **kw)


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------

def cv_evaluate(ds: Dataset, k_folds: int, seed: int, fit_fn,
                threshold: float = 0.5, folds=None) -> dict:
    """K-fold evaluation. ``fit_fn(train_ds, seed) -> (model, transform)``
    where ``transform(X) -> X'`` applies any preprocessing fitted on the
    training fold only. Pooled confusion counts; AUC averaged over folds."""
    if folds is None:
        folds = stratified_kfold(ds, k_folds, seed)
    fold_aucs, train_aucs = [], []
    pooled_labels, pooled_preds = [], []
    for f in range(folds.k):
        tr = subset_rows(ds, folds.train_indices(f))
        va = subset_rows(ds, folds.test_indices(f))
        model, transform = fit_fn(tr, seed)
        val_scores = model.predict_proba_matrix(transform(va.X))
        train_scores = model.predict_proba_matrix(transform(tr.X))
        fold_aucs.append(roc_auc(va.y, val_scores))
        train_aucs.append(roc_auc(tr.y, train_scores))
        pooled_labels.append(va.y)
        pooled_preds.append((val_scores >= threshold).astype(int))
    report = precision_recall_f1(
        np.concatenate(pooled_labels), np.concatenate(pooled_preds),
        threshold=threshold,
    )
    report.roc_auc = float(np.mean(fold_aucs))
    return {
        "metrics": report.to_dict(),
        "fold_aucs": fold_aucs,
        "train_aucs": train_aucs,
        "k_folds": folds.k,
        "cv_seed": folds.seed,
        "fold_assignment_checksum": int(np.sum(folds.assignment * np.arange(len(folds.assignment)))),
    }


def _plain_fit_fn(name: str, params: dict, scaler_codes=None):
    def fit(train_ds: Dataset, seed: int):
        if scaler_codes is not None:
            seq = scaling.ScalerSequence.from_codes(scaler_codes)
            fitted = scaling.fit_sequence(seq, train_ds.X)
            scaled = Dataset(train_ds.feature_names,
                             scaling.apply_sequence(fitted, train_ds.X), train_ds.y)
            model = train_model(name, scaled, params, seed)
            return model, lambda X: scaling.apply_sequence(fitted, X)
        model = train_model(name, train_ds, params, seed)
        return model, lambda X: X
    return fit


# ---------------------------------------------------------------------------
# Workflows
# ---------------------------------------------------------------------------

def cmd_eda(ds: Dataset, methods=eda.METHODS, out_dir=None, seed: int = 0,
            bootstrap_b: int = 100, include_label: bool = False) -> dict:
    """Correlation matrices (CSV+JSON per method) and the VIF table."""
    report = {"methods": list(methods), "seed": seed, "files": []}
    matrices = {}
    for method in methods:
        cm = eda.correlation_matrix(ds, method, seed=seed)
        matrices[method] = {
            "method": method,
            "feature_names": cm.feature_names,
            "values": cm.values.tolist(),
        }
        if out_dir is not None:
            base = Path(out_dir) / f"correlation_{method}"
            write_json(f"{base}.json", matrices[method])
            write_csv(f"{base}.csv", [""] + cm.feature_names,
                      [[name] + [repr(v) for v in row]
                       for name, row in zip(cm.feature_names, cm.values.tolist())])
            report["files"] += [f"{base}.json", f"{base}.csv"]
    vt = eda.vif_table(ds, bootstrap_b=bootstrap_b, seed=seed,
                       include_label=include_label)
    vif_doc = {
        "feature_names": vt.feature_names,
        "vif": vt.vif.tolist(),
        "standard_error": vt.standard_error.tolist(),
        "ci_lower": vt.ci_lower.tolist(),
        "ci_upper": vt.ci_upper.tolist(),
        "bootstrap_b": vt.bootstrap_b,
        "ci_method": "percentile 95%",
        "seed": vt.seed,
        "infinite": vt.infinite.tolist(),
    }
    if out_dir is not None:
        base = Path(out_dir) / "vif"
        write_json(f"{base}.json", vif_doc)
        write_csv(f"{base}.csv",
                  ["Feature", "VIF", "Standard_Error", "CI_Lower", "CI_Upper"],
                  [[n, repr(v), repr(s), repr(lo), repr(hi)]
                   for n, v, s, lo, hi in zip(vt.feature_names, vt.vif.tolist(),
                                              vt.standard_error.tolist(),
                                              vt.ci_lower.tolist(),
                                              vt.ci_upper.tolist())])
        report["files"] += [f"{base}.json", f"{base}.csv"]
    report["correlations"] = matrices
    report["vif"] = vif_doc
    return report


def cmd_tune_scalers(ds: Dataset, model: str = "ebm", model_params: dict | None = None,
                     oa_name: str = "L25", k_folds: int = 5, seed: int = 0,
                     out_dir=None) -> dict:
    """L25 search over scaler orderings; adopts the highest-mean-AUC row."""
    params = model_params or {}
    oa = taguchi.build_named_oa(oa_name, scaling.SEQUENCE_LENGTH)

    def trainer(train_ds, val_ds, seq, row_seed):
        fitted = scaling.fit_sequence(seq, train_ds.X)
        scaled = Dataset(train_ds.feature_names,
                         scaling.apply_sequence(fitted, train_ds.X), train_ds.y)
        m = train_model(model, scaled, params, row_seed)
        return roc_auc(val_ds.y, m.predict_proba_matrix(
            scaling.apply_sequence(fitted, val_ds.X)))

    results = taguchi.run_experiment(ds, oa, taguchi.row_to_scaler_sequence,
                                     trainer, k_folds=k_folds, seed=seed)
    effects = taguchi.main_effects_select(results, oa)
    best = results[effects.best_row_index]
    report = {
        "oa": oa.name,
        "model": model,
        "model_params": params,
        "k_folds": k_folds,
        "seed": seed,
        "dedup_rule": "repeated level replaced by code 0 (no-op), left to right",
        "results": [r.to_jsonable() for r in results],
        "main_effects": effects.to_jsonable(),
        "best_sequence": best.config.codes,
        "best_mean_auc": best.mean,
    }
    if out_dir is not None:
        write_json(Path(out_dir) / "tune_scalers.json", report)
        write_json(Path(out_dir) / "best_scaler_sequence.json",
                   {"codes": best.config.codes})
        write_csv(Path(out_dir) / "tune_scalers.csv",
                  ["row", "levels", "scaler_codes", "mean_auc", "sn_db", "failed"],
                  [[r.row_index, " ".join(map(str, r.levels)),
                    " ".join(map(str, r.config.codes)) if r.config else "",
                    "" if r.mean is None else repr(r.mean),
                    "" if r.sn is None else repr(r.sn), r.failed]
                   for r in results])
    return report


def map_hparam_row(factors: list[str], levels: dict, row) -> dict:
    return {f: levels[f][int(row[i]) - 1] for i, f in enumerate(factors)}


def cmd_tune_hparams(ds: Dataset, model: str = "ebm", levels: dict | None = None,
                     oa_name: str = "L9", k_folds: int = 5, seed: int = 0,
                     base_params: dict | None = None, scaler_codes=None,
                     out_dir=None, training_counter: list | None = None) -> dict:
    """Orthogonal-array hyperparameter search (L9 or L27)."""
    if levels is None:
        levels = default_hparam_levels()[model]
    factors = list(levels.keys())
    if oa_name.upper() == "L9" and len(factors) > 4:
        factors = factors[:4]
    oa = taguchi.build_named_oa(oa_name, len(factors))
    base = base_params or {}

    def mapper(row):
        cfg = dict(base)
        cfg.update(map_hparam_row(factors, levels, row))
        return cfg

    def trainer(train_ds, val_ds, cfg, row_seed):
        if training_counter is not None:
            training_counter.append(1)
        if scaler_codes is not None:
            seq = scaling.ScalerSequence.from_codes(scaler_codes)
            fitted = scaling.fit_sequence(seq, train_ds.X)
            train_ds = Dataset(train_ds.feature_names,
                               scaling.apply_sequence(fitted, train_ds.X), train_ds.y)
            m = train_model(model, train_ds, cfg, row_seed)
            return roc_auc(val_ds.y, m.predict_proba_matrix(
                scaling.apply_sequence(fitted, val_ds.X)))
        m = train_model(model, train_ds, cfg, row_seed)
        return roc_auc(val_ds.y, m.predict_proba_matrix(val_ds.X))

    results = taguchi.run_experiment(ds, oa, mapper, trainer,
                                     k_folds=k_folds, seed=seed)
    effects = taguchi.main_effects_select(results, oa)
    best = results[effects.best_row_index]
    report = {
        "oa": oa.name,
        "model": model,
        "factors": factors,
        "levels": {f: levels[f] for f in factors},
        "k_folds": k_folds,
        "seed": seed,
        "n_configurations": oa.n_rows,
        "results": [r.to_jsonable() for r in results],
        "main_effects": effects.to_jsonable(),
        "best_params": best.config,
        "best_mean_auc": best.mean,
    }
    if out_dir is not None:
        write_json(Path(out_dir) / "tune_hparams.json", report)
        write_csv(Path(out_dir) / "tune_hparams.csv",
                  ["row", "model"] + factors + ["mean_auc", "sn_db", "failed"],
                  [[r.row_index, model]
                   + [r.config[f] if r.config else "" for f in factors]
                   + ["" if r.mean is None else repr(r.mean),
                      "" if r.sn is None else repr(r.sn), r.failed]
                   for r in results])
    return report


def cmd_train(ds: Dataset, params: dict | None = None, scaler_codes=None,
              seed: int = 0, model_path=None, out_dir=None) -> dict:
    """Train the boosting model on the full dataset and save it."""
    params = dict(params or {})
    params["seed"] = seed
    fitted_doc = None
    train_X = ds.X
    if scaler_codes is not None:
        seq = scaling.ScalerSequence.from_codes(scaler_codes)
        fitted = scaling.fit_sequence(seq, ds.X)
        train_X = scaling.apply_sequence(fitted, ds.X)
        fitted_doc = fitted.to_jsonable()
    cw = params.pop("class_weight_pos", None)
    if cw is not None:
        params["class_weights"] = (1.0, float(cw))
    model = train_ebm(Dataset(ds.feature_names, train_X, ds.y), EbmConfig(**params))
    report = {"model": "ebm", "seed": seed, "scaler_codes": scaler_codes,
              "n_pairs": len(model.pairs)}
    if model_path is not None:
        save_model(model, model_path)
        report["model_path"] = str(model_path)
    if out_dir is not None and fitted_doc is not None:
        write_json(Path(out_dir) / "fitted_scalers.json", fitted_doc)
    if out_dir is not None:
        write_json(Path(out_dir) / "train.json", report)
    return report


def cmd_feature_sweep(ds: Dataset, k_min: int = 3, k_max: int = 30,
                      params: dict | None = None, k_folds: int = 5,
                      seed: int = 0, threshold: float = 0.5,
                      out_dir=None) -> dict:
    """Train a full-feature model, rank features, then retrain per top-k
    under CV. Chosen k is the smallest k attaining the maximum ROC-AUC."""
    if k_max > ds.p:
        raise ValidationError(f"k_max={k_max} exceeds feature count {ds.p}")
    if not 1 <= k_min <= k_max:
        raise ValidationError("require 1 <= k_min <= k_max")
    params = params or {}
    full_model = train_model("ebm", ds, params, seed)
    ranking = full_model.top_k_features(ds.p)
    rows = []
    for k in range(k_min, k_max + 1):
        sub = select_features(ds, ranking[:k])
        res = cv_evaluate(sub, k_folds, seed, _plain_fit_fn("ebm", params),
                          threshold=threshold)
        rows.append({"k": k, "feature_ids": ranking[:k], **res["metrics"]})
    aucs = [r["roc_auc"] for r in rows]
    best_auc = max(aucs)
    chosen_k = rows[int(np.argmax(np.asarray(aucs) == best_auc))]["k"]
    report = {
        "k_min": k_min, "k_max": k_max, "k_folds": k_folds, "seed": seed,
        "threshold": threshold, "feature_ranking": ranking,
        "rows": rows, "chosen_k": chosen_k, "best_auc": best_auc,
    }
    if out_dir is not None:
        write_json(Path(out_dir) / "feature_sweep.json", report)
        write_csv(Path(out_dir) / "feature_sweep.csv",
                  ["k", "Precision", "Recall", "ROC_AUC", "F1"],
                  [[r["k"], repr(r["precision"]), repr(r["recall"]),
                    repr(r["roc_auc"]), repr(r["f1"])] for r in rows])
    return report


def cmd_compare(ds: Dataset, feature_ids=None, models: dict | None = None,
                k_folds: int = 5, seed: int = 0, threshold: float = 0.5,
                out_dir=None) -> dict:
    """Train every requested model on the identical feature subset and the
    identical fold assignment; one metrics row per model."""
    if models is None:
        models = {name: {} for name in MODEL_NAMES}
    sub = select_features(ds, list(feature_ids)) if feature_ids is not None else ds
    folds = stratified_kfold(sub, k_folds, seed)
    rows = []
    for name in models:
        try:
            res = cv_evaluate(sub, k_folds, seed,
                              _plain_fit_fn(name, models[name]),
                              threshold=threshold, folds=folds)
            rows.append({"model": name, "params": models[name],
                         "failed": False, **res["metrics"],
                         "fold_aucs": res["fold_aucs"]})
        except (TrainingError, ValidationError) as exc:
            rows.append({"model": name, "params": models[name],
                         "failed": True, "reason": str(exc)})
    report = {
        "feature_ids": list(feature_ids) if feature_ids is not None else None,
        "k_folds": k_folds, "seed": seed, "threshold": threshold,
        "fold_assignment": folds.assignment.tolist(),
        "rows": rows,
    }
    if out_dir is not None:
        write_json(Path(out_dir) / "compare.json", report)
        write_csv(Path(out_dir) / "compare.csv",
                  ["Model", "Precision", "Recall", "ROC_AUC", "F1"],
                  [[r["model"],
                    *(("", "", "", "") if r["failed"] else
                      (repr(r["precision"]), repr(r["recall"]),
                       repr(r["roc_auc"]), repr(r["f1"])))]
                   for r in rows])
    return report


def cmd_check_overfit(ds: Dataset, model: str = "ebm", params: dict | None = None,
                      k_folds: int = 5, seed: int = 0, threshold: float = 0.1,
                      out_dir=None) -> dict:
    """CV with train scores retained; gap = mean(train) - mean(test)."""
    res = cv_evaluate(ds, k_folds, seed, _plain_fit_fn(model, params or {}))
    rep = overfit_gap(res["train_aucs"], res["fold_aucs"], threshold=threshold)
    report = {
        "model": model, "params": params or {}, "k_folds": k_folds,
        "seed": seed, "metric": "roc_auc",
        "train_scores": res["train_aucs"], "test_scores": res["fold_aucs"],
        **rep.to_dict(),
    }
    if out_dir is not None:
        write_json(Path(out_dir) / "check_overfit.json", report)
    return report


def cmd_explain(model_path, mode: str = "global", row: np.ndarray | None = None,
                out_dir=None) -> dict:
    """Export global term importances or a local contribution breakdown."""
    model = load_model(model_path)
    if mode == "global":
        ranked = model.explain_global()
        report = {"mode": "global",
                  "terms": [{"term": t, "importance": v} for t, v in ranked]}
        if out_dir is not None:
            write_json(Path(out_dir) / "explain_global.json", report)
            write_csv(Path(out_dir) / "explain_global.csv",
                      ["term", "importance"],
                      [[t, repr(v)] for t, v in ranked])
        return report
    if mode == "local":
        if row is None:
            raise ValidationError("local explanation requires a row")
        local = model.explain_local(np.asarray(row, dtype=np.float64))
        ordered = sorted(local["contributions"], key=lambda t: -abs(t[1]))
        report = {
            "mode": "local",
            "intercept": local["intercept"],
            "logit": local["logit"],
            "proba": local["proba"],
            "sign_semantics": local["sign_semantics"],
            "contributions": [{"term": t, "contribution": v} for t, v in ordered],
        }
        if out_dir is not None:
            write_json(Path(out_dir) / "explain_local.json", report)
            write_csv(Path(out_dir) / "explain_local.csv",
                      ["term", "contribution"],
                      [[t, repr(v)] for t, v in ordered])
        return report
    raise ValidationError(f"unknown explain mode {mode!r}")
