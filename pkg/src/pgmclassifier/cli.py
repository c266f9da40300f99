"""Command-line interface: splits, gridsearch, train, predict, evaluate, compare.

Exit codes: 0 on success, 1 for usage or configuration errors, 2 for data
or consistency errors (malformed files, fingerprint mismatches, schema
violations, infeasible requests). Commands with any randomness require an
explicit --seed; there is no hidden entropy, so identical inputs always
produce identical output files. The PGM_WORKERS environment variable caps
grid-search parallelism (default: machine CPU count); results do not
depend on it.
"""

from __future__ import annotations

import csv
import functools
import math
import os
import sys
from pathlib import Path

import click
import numpy as np

from .dataio import (
    REPORT_FORMAT,
    Dataset,
    check_splits,
    evaluation_csv_rows,
    evaluation_report_dict,
    features_for_model,
    load_dataset,
    load_model,
    protocol_csv_rows,
    protocol_report_dict,
    read_json,
    read_splits,
    save_model,
    write_json,
    write_long_csv,
    write_predictions_csv,
    write_splits,
)
from .encoding import ENCODINGS, NORMALIZERS, EncodingConfig
from .errors import ClassSetMismatch, DatasetFormatError, PgmError, SchemaMismatch
from .metrics import metric_difference, report_from_predictions, win_loss
from .pgm import PgmConfig, fit_pgm, predict_batch
from .selection import (
    DEFAULT_ALPHAS,
    DEFAULT_COPIES,
    ProtocolConfig,
    make_grid,
    run_protocol,
    stratified_holdout,
)

# The exit-code contract reserves 1 for usage errors; click defaults to 2.
click.UsageError.exit_code = 1

_ENGINES = ("auto", "dense", "gram")
_PRIORS = ("uniform", "empirical")


def _data_errors(func):
    """Translate library data/consistency errors into exit code 2."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except PgmError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _require_labels(dataset: Dataset, path: str) -> None:
    if dataset.classes is None:
        raise DatasetFormatError(f"{path}: no label column {dataset.label_column!r}")


def _require_trainable(dataset: Dataset, path: str) -> None:
    _require_labels(dataset, path)
    if dataset.n_classes < 2:
        raise DatasetFormatError(
            f"{path}: training needs at least 2 distinct labels, "
            f"got {dataset.n_classes}"
        )


def _positive_index(positive_class: str | None, classes) -> int | None:
    if positive_class is None:
        return None
    if len(classes) != 2:
        raise click.UsageError(
            f"--positive-class applies to 2-class data, got {len(classes)} classes"
        )
    if positive_class not in classes:
        raise click.UsageError(
            f"unknown positive class {positive_class!r}, expected one of {list(classes)}"
        )
    return classes.index(positive_class)


def _workers_from_env() -> int | None:
    raw = os.environ.get("PGM_WORKERS")
    if raw is None:
        return None
    try:
        workers = int(raw)
        if workers < 1:
            raise ValueError
    except ValueError:
        raise click.UsageError(f"PGM_WORKERS must be a positive integer, got {raw!r}")
    return workers


def _parse_grid(raw: str | None):
    """Parse 'encodings=a,b;alphas=...;copies=...' into a grid; None = default."""
    dims = {
        "encodings": list(ENCODINGS),
        "alphas": list(DEFAULT_ALPHAS),
        "copies": list(DEFAULT_COPIES),
    }
    if raw is not None:
        for part in raw.split(";"):
            part = part.strip()
            if not part:
                continue
            key, sep, values = part.partition("=")
            key = key.strip()
            if not sep or key not in dims:
                raise click.UsageError(
                    f"bad grid dimension {part!r}: expected "
                    "'encodings=...;alphas=...;copies=...'"
                )
            items = [v.strip() for v in values.split(",") if v.strip()]
            if not items:
                raise click.UsageError(f"grid dimension {key!r} is empty")
            try:
                if key == "encodings":
                    unknown = [v for v in items if v not in ENCODINGS]
                    if unknown:
                        raise ValueError(f"unknown encoding {unknown[0]!r}")
                    dims[key] = items
                elif key == "alphas":
                    alphas = [float(v) for v in items]
                    bad = [a for a in alphas if not math.isfinite(a) or a <= 0]
                    if bad:
                        raise ValueError(f"alpha must be a positive number, got {bad[0]!r}")
                    dims[key] = alphas
                else:
                    copies = [int(v) for v in items]
                    bad = [n for n in copies if n < 1]
                    if bad:
                        raise ValueError(f"copies must be at least 1, got {bad[0]!r}")
                    dims[key] = copies
            except ValueError as exc:
                raise click.UsageError(f"bad grid dimension {key!r}: {exc}")
    return dims["encodings"], dims["alphas"], dims["copies"]


def _check_fraction(ctx, param, value):
    if not 0.0 < value < 1.0:
        raise click.BadParameter("must lie strictly between 0 and 1")
    return value


def _check_positive(ctx, param, value):
    if value is not None and value < 1:
        raise click.BadParameter("must be at least 1")
    return value


@click.group()
def main():
    """Pretty-good-measurement classifier and experiment harness."""


@main.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--label-column", default="label", show_default=True)
@click.option(
    "--test-fraction",
    type=float,
    default=0.2,
    show_default=True,
    callback=_check_fraction,
)
@click.option(
    "--repetitions", type=int, default=30, show_default=True, callback=_check_positive
)
@click.option("--seed", type=int, required=True, help="Master seed; mandatory.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_data_errors
def splits(dataset, label_column, test_fraction, repetitions, seed, out):
    """Draw repeated stratified train/test splits and write a split file."""
    data = load_dataset(dataset, label_column)
    _require_trainable(data, dataset)
    plans = stratified_holdout(data.label_indices, test_fraction, repetitions, seed)
    write_splits(
        out,
        plans,
        fingerprint=data.fingerprint,
        test_fraction=test_fraction,
        seed=seed,
    )
    click.echo(f"dataset: {data.n_samples} rows, {data.n_classes} classes")
    test_labels = data.label_indices[plans[0].test_indices]
    for i, name in enumerate(data.classes):
        total = int((data.label_indices == i).sum())
        in_test = int((test_labels == i).sum())
        click.echo(f"class {name}: {total} samples, {in_test} in each test set")
    click.echo(f"wrote {len(plans)} repetitions to {out}")


@main.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.argument("splits_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--label-column", default="label", show_default=True)
@click.option("--grid", "grid_string", default=None, help="e.g. 'encodings=amplitude;alphas=0.5,1;copies=1,5'")
@click.option("--k", type=int, default=5, show_default=True)
@click.option("--cv-reps", type=int, default=10, show_default=True, callback=_check_positive)
@click.option("--priors", type=click.Choice(_PRIORS), default="uniform", show_default=True)
@click.option("--normalizer", type=click.Choice(NORMALIZERS), default="zscore", show_default=True)
@click.option("--engine", type=click.Choice(_ENGINES), default="auto", show_default=True)
@click.option("--positive-class", default=None)
@click.option("--seed", type=int, required=True, help="Master seed; mandatory.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--out-csv", type=click.Path(dir_okay=False), default=None)
@_data_errors
def gridsearch(
    dataset,
    splits_file,
    label_column,
    grid_string,
    k,
    cv_reps,
    priors,
    normalizer,
    engine,
    positive_class,
    seed,
    out,
    out_csv,
):
    """Run the full protocol: per-split grid search, evaluation, selection."""
    data = load_dataset(dataset, label_column)
    _require_trainable(data, dataset)
    splits_data = read_splits(splits_file)
    check_splits(splits_data, data)
    encodings, alphas, copies = _parse_grid(grid_string)
    grid = make_grid(encodings, alphas, copies, prior_mode=priors)
    positive = _positive_index(positive_class, data.classes)
    config = ProtocolConfig(
        seed=seed,
        grid=grid,
        k=k,
        cv_repetitions=cv_reps,
        normalizer=normalizer,
        engine=engine,
        positive_class=positive,
        workers=_workers_from_env(),
    )
    result = run_protocol(
        data.features, data.label_indices, data.n_classes, splits_data.plans, config
    )
    report = protocol_report_dict(
        result,
        data.classes,
        dataset_fingerprint=data.fingerprint,
        seed=seed,
        positive_name=positive_class,
    )
    write_json(out, report)
    if out_csv is not None:
        write_long_csv(out_csv, protocol_csv_rows(result, data.classes))
    chosen = result.selection.chosen
    wins = result.selection.frequency[result.selection.chosen_index]
    click.echo(
        f"chosen configuration: encoding={chosen.encoding} alpha={chosen.alpha:g} "
        f"copies={chosen.copies} (won {wins}/{len(result.records)} splits)"
    )
    mean = result.test_aggregate.mean
    std = result.test_aggregate.std
    for metric in ("accuracy", "macro_accuracy", "macro_auc"):
        if mean.get(metric) is not None:
            click.echo(f"test {metric}: {mean[metric]:.4f} +/- {std[metric]:.4f}")
    click.echo(f"wrote report to {out}")


@main.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--label-column", default="label", show_default=True)
@click.option("--encoding", type=click.Choice(ENCODINGS), default="stereographic", show_default=True)
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--copies", type=int, default=1, show_default=True, callback=_check_positive)
@click.option("--normalizer", type=click.Choice(NORMALIZERS), default="zscore", show_default=True)
@click.option("--priors", type=click.Choice(_PRIORS), default="uniform", show_default=True)
@click.option("--engine", type=click.Choice(_ENGINES), default="auto", show_default=True)
@click.option("--out-model", type=click.Path(dir_okay=False), required=True)
@_data_errors
def train(dataset, label_column, encoding, alpha, copies, normalizer, priors, engine, out_model):
    """Fit a classifier on a labeled dataset and persist it."""
    if alpha <= 0:
        raise click.BadParameter("--alpha must be positive")
    data = load_dataset(dataset, label_column)
    _require_trainable(data, dataset)
    config = PgmConfig(
        encoding=EncodingConfig(encoding=encoding, alpha=alpha, normalizer=normalizer),
        copies=copies,
        prior_mode=priors,
        engine=engine,
    )
    model = fit_pgm(data.features, data.label_indices, data.n_classes, config)
    save_model(out_model, model, data.classes, data.feature_names)
    click.echo(
        f"trained {model.engine} model on {data.n_samples} samples "
        f"({data.n_classes} classes, {len(data.feature_names)} features)"
    )
    click.echo(f"wrote model to {out_model}")


@main.command()
@click.argument("model_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--label-column", default="label", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_data_errors
def predict(model_file, dataset, label_column, out):
    """Classify every dataset row; write labels and per-class scores."""
    loaded = load_model(model_file)
    data = load_dataset(dataset, label_column)
    features = features_for_model(data, loaded.feature_columns)
    predicted, scores = predict_batch(loaded.model, features)
    names = [loaded.classes[i] for i in predicted]
    write_predictions_csv(out, names, scores, loaded.classes)
    click.echo(f"wrote {len(names)} predictions to {out}")


@main.command()
@click.argument("model_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--label-column", default="label", show_default=True)
@click.option("--positive-class", default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--out-csv", type=click.Path(dir_okay=False), default=None)
@_data_errors
def evaluate(model_file, dataset, label_column, positive_class, out, out_csv):
    """Score a labeled dataset with a saved model and report all metrics."""
    loaded = load_model(model_file)
    data = load_dataset(dataset, label_column)
    _require_labels(data, dataset)
    class_index = {name: i for i, name in enumerate(loaded.classes)}
    unknown = sorted(set(data.labels) - set(loaded.classes))
    if unknown:
        raise ClassSetMismatch(
            f"dataset label {unknown[0]!r} is not among model classes {list(loaded.classes)}"
        )
    positive = _positive_index(positive_class, loaded.classes)
    true = np.array([class_index[name] for name in data.labels], dtype=np.int64)
    features = features_for_model(data, loaded.feature_columns)
    predicted, scores = predict_batch(loaded.model, features)
    report = report_from_predictions(
        true, predicted, scores, len(loaded.classes), positive
    )
    model_echo = {
        "engine": loaded.model.engine,
        "encoding": loaded.model.encoding.encoding,
        "alpha": loaded.model.encoding.alpha,
        "normalizer": loaded.model.encoding.normalizer,
        "copies": loaded.model.copies,
    }
    write_json(
        out,
        evaluation_report_dict(
            report,
            loaded.classes,
            dataset_fingerprint=data.fingerprint,
            model_echo=model_echo,
            positive_name=positive_class,
        ),
    )
    if out_csv is not None:
        write_long_csv(out_csv, evaluation_csv_rows(report, loaded.classes))
    click.echo(f"evaluated {report.n_samples} samples")
    click.echo(f"accuracy: {report.accuracy:.4f}")
    click.echo(f"macro accuracy: {report.macro_accuracy:.4f}")
    if report.macro_auc is not None:
        click.echo(f"macro AUC: {report.macro_auc:.4f}")
    click.echo(f"wrote report to {out}")


def _load_evaluation(path) -> dict:
    obj = read_json(path, REPORT_FORMAT)
    if obj.get("kind") != "evaluate":
        raise SchemaMismatch(f"{path}: expected an evaluation report, got {obj.get('kind')!r}")
    return obj


@main.command()
@click.argument("report_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("report_b", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_data_errors
def compare(report_a, report_b, out):
    """Emit the win-loss matrix and metric differences of two evaluations."""
    obj_a = _load_evaluation(report_a)
    obj_b = _load_evaluation(report_b)
    name_a = Path(report_a).stem
    name_b = Path(report_b).stem
    if name_a == name_b:
        name_a, name_b = f"{name_a}_a", f"{name_b}_b"
    auc_by_model = {
        name: {
            cls: entry["auc"]
            for cls, entry in obj["metrics"]["per_class"].items()
        }
        for name, obj in ((name_a, obj_a), (name_b, obj_b))
    }
    wl = win_loss(auc_by_model)
    diff = metric_difference(obj_a["flat"], obj_b["flat"])
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["table", "row", "column", "value"])
        for a in range(len(wl.names)):
            for b in range(len(wl.names)):
                if a != b:
                    writer.writerow(
                        ["win_loss", wl.names[a], wl.names[b], repr(float(wl.matrix[a, b]))]
                    )
        for metric, value in diff.items():
            writer.writerow(
                ["difference", metric, "", "" if value is None else repr(float(value))]
            )
    win_ab = wl.matrix[0, 1]
    win_ba = wl.matrix[1, 0]
    click.echo(f"{name_a} beats {name_b} on {win_ab:.0%} of classes; reverse {win_ba:.0%}")
    click.echo(f"wrote comparison to {out}")


if __name__ == "__main__":
    main()
