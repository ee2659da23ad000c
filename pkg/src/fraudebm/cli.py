"""Command-line entry points.

Verbs: eda, tune-scalers, tune-hparams, train, feature-sweep, compare,
check-overfit, explain. Every run writes a manifest (manifest.json in the
output directory) that fully determines a rerun: ``fraudebm rerun
--manifest path`` reproduces byte-identical reports.

Exit codes: 0 success, 2 validation error, 3 training failure, 4 I/O error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import workflows
from .dataset import load_csv
from .errors import TrainingError, ValidationError

DATASET_ENV = "FRAUD_DATASET_PATH"


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load(input_path, label_column):
    try:
        return load_csv(input_path, label_column=label_column)
    except ValidationError as exc:
        _fail(2, str(exc))
    except OSError as exc:
        _fail(4, str(exc))


def _write_manifest(out_dir, command: str, args: dict):
    manifest = {
        "tool_version": workflows.TOOL_VERSION,
        "command": command,
        "args": args,
        "out_dir": str(out_dir),
    }
    workflows.write_json(Path(out_dir) / "manifest.json", manifest)
    return manifest


@click.group()
def main():
    """Glass-box fraud analytics toolkit."""


def _common(f):
    f = click.option("--input", "input_path", required=False, default=None,
                     envvar=DATASET_ENV, help="CSV dataset path")(f)
    f = click.option("--label-column", default="Class", show_default=True)(f)
    f = click.option("--seed", default=0, show_default=True, type=int)(f)
    f = click.option("--folds", default=5, show_default=True, type=int)(f)
    f = click.option("--out-dir", required=True, type=click.Path())(f)
    f = click.option("--workers", default=1, show_default=True, type=int,
                     help="Worker pool size; results are identical for any value.")(f)
    return f


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ValidationError as exc:
        _fail(2, str(exc))
    except TrainingError as exc:
        _fail(3, str(exc))
    except OSError as exc:
        _fail(4, str(exc))


def _parse_json_opt(text, what):
    if text is None:
        return None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        _fail(2, f"bad JSON for {what}: {exc}")


@main.command()
@_common
@click.option("--methods", default="pearson,spearman,kendall,chatterjee",
              show_default=True)
@click.option("--bootstrap-b", default=100, show_default=True, type=int)
@click.option("--include-label", is_flag=True,
              help="Append the label column to the VIF regression set.")
def eda(input_path, label_column, seed, folds, out_dir, workers, methods,
        bootstrap_b, include_label):
    """Correlation matrices and VIF diagnostics."""
    ds = _load(input_path, label_column)
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    _write_manifest(out_dir, "eda", {
        "input": input_path, "label_column": label_column, "seed": seed,
        "methods": method_list, "bootstrap_b": bootstrap_b,
        "include_label": include_label, "out_dir": str(out_dir),
    })
    _guard(workflows.cmd_eda, ds, methods=method_list, out_dir=out_dir,
           seed=seed, bootstrap_b=bootstrap_b, include_label=include_label)
    click.echo(f"eda reports written to {out_dir}")


@main.command("tune-scalers")
@_common
@click.option("--model", default="ebm", show_default=True,
              type=click.Choice(workflows.MODEL_NAMES))
@click.option("--model-params", default=None, help="JSON object of fixed params")
@click.option("--oa", "oa_name", default="L25", show_default=True)
def tune_scalers(input_path, label_column, seed, folds, out_dir, workers,
                 model, model_params, oa_name):
    """Taguchi search over scaler orderings."""
    ds = _load(input_path, label_column)
    params = _parse_json_opt(model_params, "--model-params") or {}
    _write_manifest(out_dir, "tune-scalers", {
        "input": input_path, "label_column": label_column, "seed": seed,
        "folds": folds, "model": model, "model_params": params,
        "oa": oa_name, "out_dir": str(out_dir),
    })
    report = _guard(workflows.cmd_tune_scalers, ds, model=model,
                    model_params=params, oa_name=oa_name, k_folds=folds,
                    seed=seed, out_dir=out_dir)
    click.echo(f"best sequence: {report['best_sequence']} "
               f"(mean AUC {report['best_mean_auc']:.4f})")


@main.command("tune-hparams")
@_common
@click.option("--model", default="ebm", show_default=True,
              type=click.Choice(workflows.MODEL_NAMES))
@click.option("--levels-file", default=None, type=click.Path(exists=True),
              help="JSON file of factor -> three levels; default ships with the tool")
@click.option("--levels-json", default=None,
              help="Inline JSON of factor -> levels (overrides --levels-file)")
@click.option("--oa", "oa_name", default="L9", show_default=True,
              type=click.Choice(["L9", "L27"], case_sensitive=False))
@click.option("--scaler-codes", default=None,
              help="Comma-separated 5-slot scaler codes fitted per fold")
def tune_hparams(input_path, label_column, seed, folds, out_dir, workers,
                 model, levels_file, levels_json, oa_name, scaler_codes):
    """Taguchi hyperparameter search (L9 or L27)."""
    ds = _load(input_path, label_column)
    levels = None
    if levels_file is not None:
        with open(levels_file, encoding="utf-8") as fh:
            doc = json.load(fh)
        levels = doc.get(model, doc)
    if levels_json is not None:
        levels = _parse_json_opt(levels_json, "--levels-json")
    codes = [int(c) for c in scaler_codes.split(",")] if scaler_codes else None
    # factor order determines the OA column mapping, and the manifest
    # serializer sorts dict keys, so the levels are stored as ordered pairs
    levels_pairs = None if levels is None else [[k, v] for k, v in levels.items()]
    _write_manifest(out_dir, "tune-hparams", {
        "input": input_path, "label_column": label_column, "seed": seed,
        "folds": folds, "model": model, "levels": levels_pairs, "oa": oa_name,
        "scaler_codes": codes, "out_dir": str(out_dir),
    })
    report = _guard(workflows.cmd_tune_hparams, ds, model=model, levels=levels,
                    oa_name=oa_name, k_folds=folds, seed=seed,
                    scaler_codes=codes, out_dir=out_dir)
    click.echo(f"best params: {report['best_params']} "
               f"(mean AUC {report['best_mean_auc']:.4f})")


@main.command()
@_common
@click.option("--params", default=None, help="JSON object of model config")
@click.option("--scaler-codes", default=None)
@click.option("--model-path", required=True, type=click.Path())
def train(input_path, label_column, seed, folds, out_dir, workers, params,
          scaler_codes, model_path):
    """Train the boosting model on the full dataset and save it."""
    ds = _load(input_path, label_column)
    cfg = _parse_json_opt(params, "--params") or {}
    codes = [int(c) for c in scaler_codes.split(",")] if scaler_codes else None
    _write_manifest(out_dir, "train", {
        "input": input_path, "label_column": label_column, "seed": seed,
        "params": cfg, "scaler_codes": codes, "model_path": str(model_path),
        "out_dir": str(out_dir),
    })
    _guard(workflows.cmd_train, ds, params=cfg, scaler_codes=codes, seed=seed,
           model_path=model_path, out_dir=out_dir)
    click.echo(f"model saved to {model_path}")


@main.command("feature-sweep")
@_common
@click.option("--k-min", default=3, show_default=True, type=int)
@click.option("--k-max", default=30, show_default=True, type=int)
@click.option("--params", default=None, help="JSON object of model config")
@click.option("--threshold", default=0.5, show_default=True, type=float)
def feature_sweep(input_path, label_column, seed, folds, out_dir, workers,
                  k_min, k_max, params, threshold):
    """Top-k feature sweep under cross-validation."""
    ds = _load(input_path, label_column)
    cfg = _parse_json_opt(params, "--params") or {}
    _write_manifest(out_dir, "feature-sweep", {
        "input": input_path, "label_column": label_column, "seed": seed,
        "folds": folds, "k_min": k_min, "k_max": k_max, "params": cfg,
        "threshold": threshold, "out_dir": str(out_dir),
    })
    report = _guard(workflows.cmd_feature_sweep, ds, k_min=k_min, k_max=k_max,
                    params=cfg, k_folds=folds, seed=seed, threshold=threshold,
                    out_dir=out_dir)
    click.echo(f"chosen k = {report['chosen_k']} (AUC {report['best_auc']:.4f})")


@main.command()
@_common
@click.option("--features", default=None,
              help="Comma-separated feature indices (default: all)")
@click.option("--models", default=None,
              help='JSON object model -> params, e.g. {"ebm": {}, "logreg": {}}')
@click.option("--threshold", default=0.5, show_default=True, type=float)
def compare(input_path, label_column, seed, folds, out_dir, workers, features,
            models, threshold):
    """Train several models on identical features and folds."""
    ds = _load(input_path, label_column)
    feature_ids = [int(i) for i in features.split(",")] if features else None
    model_map = _parse_json_opt(models, "--models")
    _write_manifest(out_dir, "compare", {
        "input": input_path, "label_column": label_column, "seed": seed,
        "folds": folds, "features": feature_ids, "models": model_map,
        "threshold": threshold, "out_dir": str(out_dir),
    })
    report = _guard(workflows.cmd_compare, ds, feature_ids=feature_ids,
                    models=model_map, k_folds=folds, seed=seed,
                    threshold=threshold, out_dir=out_dir)
    for row in report["rows"]:
        if row["failed"]:
            click.echo(f"{row['model']}: FAILED ({row['reason']})")
        else:
            click.echo(f"{row['model']}: ROC-AUC {row['roc_auc']:.4f}")


@main.command("check-overfit")
@_common
@click.option("--model", default="ebm", show_default=True,
              type=click.Choice(workflows.MODEL_NAMES))
@click.option("--params", default=None, help="JSON object of model config")
@click.option("--gap-threshold", default=0.1, show_default=True, type=float)
def check_overfit(input_path, label_column, seed, folds, out_dir, workers,
                  model, params, gap_threshold):
    """Train/test gap check under cross-validation."""
    ds = _load(input_path, label_column)
    cfg = _parse_json_opt(params, "--params") or {}
    _write_manifest(out_dir, "check-overfit", {
        "input": input_path, "label_column": label_column, "seed": seed,
        "folds": folds, "model": model, "params": cfg,
        "gap_threshold": gap_threshold, "out_dir": str(out_dir),
    })
    report = _guard(workflows.cmd_check_overfit, ds, model=model, params=cfg,
                    k_folds=folds, seed=seed, threshold=gap_threshold,
                    out_dir=out_dir)
    click.echo(f"gap {report['gap']:.5f} -> {report['verdict']}")


@main.command()
@click.option("--model-path", required=True, type=click.Path(exists=True))
@click.option("--mode", default="global", show_default=True,
              type=click.Choice(["global", "local"]))
@click.option("--input", "input_path", default=None,
              help="CSV dataset (required for local mode)")
@click.option("--label-column", default="Class", show_default=True)
@click.option("--row-index", default=None, type=int)
@click.option("--out-dir", required=True, type=click.Path())
def explain(model_path, mode, input_path, label_column, row_index, out_dir):
    """Export global or local explanations from a saved model."""
    row = None
    if mode == "local":
        if input_path is None or row_index is None:
            _fail(2, "local mode requires --input and --row-index")
        ds = _load(input_path, label_column)
        if not 0 <= row_index < ds.n:
            _fail(2, f"row index {row_index} out of range [0, {ds.n})")
        row = ds.X[row_index]
    _write_manifest(out_dir, "explain", {
        "model_path": str(model_path), "mode": mode, "input": input_path,
        "label_column": label_column, "row_index": row_index,
        "out_dir": str(out_dir),
    })
    _guard(workflows.cmd_explain, model_path, mode=mode, row=row,
           out_dir=out_dir)
    click.echo(f"explanation written to {out_dir}")


@main.command()
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True))
def rerun(manifest_path):
    """Re-execute a previous run from its manifest; outputs are
    byte-identical."""
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    command = manifest["command"]
    args = manifest["args"]
    cmd = main.get_command(None, command)
    if cmd is None:
        _fail(2, f"unknown command in manifest: {command!r}")
    argv = _manifest_to_argv(command, args)
    cmd.main(args=argv, standalone_mode=False)
    click.echo(f"rerun of {command} complete")


def _manifest_to_argv(command: str, args: dict) -> list[str]:
    argv: list[str] = []
    for key, val in args.items():
        if val is None or val is False:
            continue
        flag = "--" + key.replace("_", "-")
        if key == "input":
            argv += ["--input", str(val)]
        elif key == "methods":
            argv += ["--methods", ",".join(val)]
        elif key in ("scaler_codes", "features"):
            argv += [flag, ",".join(str(int(v)) for v in val)]
        elif key == "levels":
            argv += ["--levels-json", json.dumps(dict(val))]
        elif key in ("params", "model_params", "models"):
            argv += [flag, json.dumps(val)]
        elif val is True:
            argv += [flag]
        else:
            argv += [flag, str(val)]
    return argv
