"""File formats: dataset CSV ingestion, split/model/report persistence.

Datasets are plain CSV with a header row, one string-valued label column,
and float feature columns. Splits, models and reports are JSON documents
with a format tag; all floating-point numbers are serialized as decimal
text with full round-trip precision, so saving and reloading a model
reproduces scores bit for bit and rerunning a protocol reproduces report
files byte for byte. Dataset bytes are fingerprinted (newlines normalized
to LF, then SHA-256) and the hash is embedded in split files so a split
plan cannot silently be applied to a different dataset.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .encoding import EncodingConfig, NormalizerParams
from .errors import (
    DatasetFormatError,
    FingerprintMismatch,
    SchemaMismatch,
)
from .metrics import MetricReport
from .pgm import DensePgmModel, GramPgmModel, Priors
from .selection import GridPoint, ProtocolResult, SplitPlan

FINGERPRINT_ALGORITHM = "sha256/lf-newlines"
SPLITS_FORMAT = "pgm-splits/1"
MODEL_FORMAT = "pgm-model/1"
REPORT_FORMAT = "pgm-report/1"


def canonical_bytes(raw: bytes) -> bytes:
    """Normalize CRLF and lone CR line endings to LF."""
    return raw.replace(b"\r\n", b"\n").replace(b"\r", b"\n")


def fingerprint_bytes(raw: bytes) -> dict:
    """Content hash of canonicalized bytes, tagged with the algorithm name."""
    digest = hashlib.sha256(canonical_bytes(raw)).hexdigest()
    return {"algorithm": FINGERPRINT_ALGORITHM, "value": digest}


def fingerprint_file(path) -> dict:
    with open(path, "rb") as fh:
        return fingerprint_bytes(fh.read())


@dataclass(frozen=True, eq=False)
class Dataset:
    """Parsed dataset: float feature matrix plus optional string labels.

    ``classes`` holds the distinct label names in sorted order and
    ``label_indices`` each row's position in that list; both are None for
    unlabeled data. The fingerprint ties derived artifacts to these bytes.
    """

    feature_names: tuple
    features: np.ndarray
    label_column: str | None
    labels: tuple | None
    classes: tuple | None
    label_indices: np.ndarray | None
    fingerprint: dict

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_classes(self) -> int:
        if self.classes is None:
            raise DatasetFormatError("dataset has no label column")
        return len(self.classes)


def load_dataset(path, label_column: str = "label") -> Dataset:
    """Read a CSV dataset, strictly validating shape and numeric content.

    The header is mandatory and column names must be unique. Every non-label
    cell must parse as a finite float; empty cells and malformed numbers are
    rejected with a row/column diagnostic (rows counted from 1, excluding
    the header). The label column is optional so prediction inputs may omit
    it; when present, labels are arbitrary nonempty strings.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = canonical_bytes(raw).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DatasetFormatError(f"{path}: not valid UTF-8 ({exc})") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not any(rows[0]):
        raise DatasetFormatError(f"{path}: missing header row")
    header = rows[0]
    if len(set(header)) != len(header):
        dup = sorted({name for name in header if header.count(name) > 1})
        raise DatasetFormatError(f"{path}: duplicate column name {dup[0]!r}")
    has_labels = label_column in header
    label_pos = header.index(label_column) if has_labels else -1
    feature_names = tuple(name for i, name in enumerate(header) if i != label_pos)
    features = []
    labels: list = []
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise DatasetFormatError(
                f"{path}: row {r} has {len(row)} fields, expected {len(header)}"
            )
        values = []
        for i, cell in enumerate(row):
            if i == label_pos:
                if cell == "":
                    raise DatasetFormatError(
                        f"{path}: row {r} column {header[i]!r}: missing label"
                    )
                labels.append(cell)
                continue
            try:
                value = float(cell)
            except ValueError:
                value = math.nan
            if cell == "" or not math.isfinite(value):
                raise DatasetFormatError(
                    f"{path}: row {r} column {header[i]!r}: "
                    f"expected a finite number, got {cell!r}"
                )
            values.append(value)
        features.append(values)
    matrix = np.array(features, dtype=float).reshape(len(features), len(feature_names))
    if has_labels:
        classes = tuple(sorted(set(labels)))
        index = {name: i for i, name in enumerate(classes)}
        label_indices = np.array([index[name] for name in labels], dtype=np.int64)
    else:
        classes = None
        label_indices = None
    return Dataset(
        feature_names=feature_names,
        features=matrix,
        label_column=label_column if has_labels else None,
        labels=tuple(labels) if has_labels else None,
        classes=classes,
        label_indices=label_indices,
        fingerprint=fingerprint_bytes(raw),
    )


def features_for_model(dataset: Dataset, feature_columns) -> np.ndarray:
    """Select and order dataset columns to match a model's training schema.

    The dataset must contain exactly the model's feature columns (any label
    column aside); missing or unexpected columns name the offender.
    """
    feature_columns = tuple(feature_columns)
    have = set(dataset.feature_names)
    want = set(feature_columns)
    missing = sorted(want - have)
    if missing:
        raise SchemaMismatch(f"dataset lacks feature column {missing[0]!r}")
    extra = sorted(have - want)
    if extra:
        raise SchemaMismatch(f"dataset has unexpected column {extra[0]!r}")
    order = [dataset.feature_names.index(name) for name in feature_columns]
    return dataset.features[:, order]


def write_json(path, obj) -> None:
    """Serialize to pretty-printed JSON with a trailing newline."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False)
        fh.write("\n")


def read_json(path, expected_format: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(obj, dict) or obj.get("format") != expected_format:
        raise SchemaMismatch(
            f"{path}: expected format {expected_format!r}, got {obj.get('format')!r}"
        )
    return obj


@dataclass(frozen=True)
class SplitsData:
    """Deserialized split file: plans plus provenance."""

    fingerprint: dict
    seed: int
    test_fraction: float
    plans: tuple


def write_splits(path, plans, *, fingerprint: dict, test_fraction: float, seed: int) -> None:
    obj = {
        "format": SPLITS_FORMAT,
        "fingerprint": fingerprint,
        "seed": int(seed),
        "test_fraction": float(test_fraction),
        "repetitions": [
            {
                "repetition": int(plan.repetition_id),
                "seed": int(plan.seed),
                "train": [int(i) for i in plan.train_indices],
                "test": [int(i) for i in plan.test_indices],
            }
            for plan in plans
        ],
    }
    write_json(path, obj)


def read_splits(path) -> SplitsData:
    obj = read_json(path, SPLITS_FORMAT)
    try:
        plans = tuple(
            SplitPlan(
                repetition_id=int(rep["repetition"]),
                train_indices=np.array(rep["train"], dtype=np.int64),
                test_indices=np.array(rep["test"], dtype=np.int64),
                seed=int(rep["seed"]),
            )
            for rep in obj["repetitions"]
        )
        data = SplitsData(
            fingerprint=dict(obj["fingerprint"]),
            seed=int(obj["seed"]),
            test_fraction=float(obj["test_fraction"]),
            plans=plans,
        )
    except (KeyError, TypeError) as exc:
        raise SchemaMismatch(f"{path}: malformed split file ({exc!r})") from None
    if not data.plans:
        raise SchemaMismatch(f"{path}: split file contains no repetitions")
    return data


def check_splits(splits: SplitsData, dataset: Dataset) -> None:
    """Verify the split file belongs to the dataset and indexes it validly."""
    if splits.fingerprint != dataset.fingerprint:
        raise FingerprintMismatch(
            "split file fingerprint does not match the dataset "
            f"({splits.fingerprint.get('value', '?')[:12]} vs "
            f"{dataset.fingerprint['value'][:12]})"
        )
    m = dataset.n_samples
    for plan in splits.plans:
        combined = np.concatenate([plan.train_indices, plan.test_indices])
        if combined.size != m or not np.array_equal(np.sort(combined), np.arange(m)):
            raise SchemaMismatch(
                f"repetition {plan.repetition_id}: train/test indices are not a "
                f"disjoint exhaustive partition of {m} rows"
            )


def _encoding_dict(config: EncodingConfig) -> dict:
    return {
        "encoding": config.encoding,
        "alpha": float(config.alpha),
        "normalizer": config.normalizer,
    }


def _normalizer_dict(params: NormalizerParams) -> dict:
    return {
        "kind": params.kind,
        "location": np.asarray(params.location, dtype=float).tolist(),
        "scale": np.asarray(params.scale, dtype=float).tolist(),
    }


def save_model(path, model, classes, feature_columns) -> None:
    """Persist a fitted model with its pipeline and label dictionary."""
    if model.encoding is None or model.normalizer is None:
        raise SchemaMismatch("only models fitted with a feature pipeline can be saved")
    obj = {
        "format": MODEL_FORMAT,
        "engine": model.engine,
        "encoding": _encoding_dict(model.encoding),
        "normalizer": _normalizer_dict(model.normalizer),
        "priors": {
            "mode": model.priors.mode,
            "values": np.asarray(model.priors.values, dtype=float).tolist(),
        },
        "copies": int(model.copies),
        "classes": list(classes),
        "feature_columns": list(feature_columns),
    }
    if isinstance(model, DensePgmModel):
        obj["payload"] = {
            "dim": int(model.dim),
            "povm": model.povm.tolist(),
        }
    elif isinstance(model, GramPgmModel):
        obj["payload"] = {
            "train_states": model.train_states.tolist(),
            "labels": model.labels.tolist(),
            "weights": model.weights.tolist(),
            "M": model.M.tolist(),
            "P": model.P.tolist(),
        }
    else:
        raise SchemaMismatch(f"cannot persist model of type {type(model).__name__}")
    write_json(path, obj)


@dataclass(frozen=True)
class LoadedModel:
    """A reloaded model plus the label dictionary and column schema."""

    model: object
    classes: tuple
    feature_columns: tuple


def load_model(path) -> LoadedModel:
    obj = read_json(path, MODEL_FORMAT)
    try:
        encoding = EncodingConfig(**obj["encoding"])
        norm = obj["normalizer"]
        normalizer = NormalizerParams(
            kind=norm["kind"],
            location=np.array(norm["location"], dtype=float),
            scale=np.array(norm["scale"], dtype=float),
        )
        priors = Priors(
            mode=obj["priors"]["mode"],
            values=np.array(obj["priors"]["values"], dtype=float),
        )
        copies = int(obj["copies"])
        classes = tuple(obj["classes"])
        feature_columns = tuple(obj["feature_columns"])
        payload = obj["payload"]
        engine = obj["engine"]
        if engine == "dense":
            model = DensePgmModel(
                povm=np.array(payload["povm"], dtype=float),
                priors=priors,
                copies=copies,
                dim=int(payload["dim"]),
                encoding=encoding,
                normalizer=normalizer,
            )
        elif engine == "gram":
            model = GramPgmModel(
                train_states=np.array(payload["train_states"], dtype=float),
                labels=np.array(payload["labels"], dtype=np.int64),
                weights=np.array(payload["weights"], dtype=float),
                n_classes=len(classes),
                priors=priors,
                copies=copies,
                M=np.array(payload["M"], dtype=float),
                P=np.array(payload["P"], dtype=float),
                encoding=encoding,
                normalizer=normalizer,
            )
        else:
            raise SchemaMismatch(f"{path}: unknown engine tag {engine!r}")
    except (KeyError, TypeError) as exc:
        raise SchemaMismatch(f"{path}: malformed model file ({exc!r})") from None
    if len(classes) != model.n_classes:
        raise SchemaMismatch(
            f"{path}: {len(classes)} class names for {model.n_classes} model classes"
        )
    return LoadedModel(model=model, classes=classes, feature_columns=feature_columns)


def _metric_and_class(key: str, classes) -> tuple:
    for i, name in enumerate(classes):
        suffix = f"_class_{i}"
        if key.endswith(suffix):
            return key[: -len(suffix)], str(name)
    return key, ""


def flat_with_names(report: MetricReport, classes) -> dict:
    """Flatten a report using class names instead of indices in the keys."""
    out = {}
    for key, value in report.flat().items():
        metric, cls = _metric_and_class(key, classes)
        out[f"{metric}_class_{cls}" if cls else metric] = value
    return out


def report_dict(report: MetricReport, classes, positive_name: str | None) -> dict:
    """Nested JSON form of a metric report with named classes."""
    per_class = {}
    for i, name in enumerate(classes):
        rates = report.per_class[i]
        per_class[str(name)] = {
            "auc": report.per_class_auc[i],
            "precision": rates.precision,
            "recall": rates.recall,
            "specificity": rates.specificity,
            "f1": rates.f1,
        }
    binary = None
    if report.binary is not None:
        binary = {
            "positive_class": positive_name,
            "precision": report.binary.precision,
            "recall": report.binary.recall,
            "specificity": report.binary.specificity,
            "f1": report.binary.f1,
        }
    degenerate = []
    for flag in report.degenerate:
        metric, cls = _metric_and_class(flag, classes)
        degenerate.append(f"{metric}_class_{cls}" if cls else metric)
    return {
        "n_samples": report.n_samples,
        "accuracy": report.accuracy,
        "macro_accuracy": report.macro_accuracy,
        "macro_auc": report.macro_auc,
        "per_class": per_class,
        "binary": binary,
        "degenerate": degenerate,
    }


def _grid_point_dict(point: GridPoint) -> dict:
    return {
        "encoding": point.encoding,
        "alpha": float(point.alpha),
        "copies": int(point.copies),
        "prior_mode": point.prior_mode,
    }


def evaluation_report_dict(
    report: MetricReport,
    classes,
    *,
    dataset_fingerprint: dict,
    model_echo: dict,
    positive_name: str | None,
) -> dict:
    return {
        "format": REPORT_FORMAT,
        "kind": "evaluate",
        "dataset_fingerprint": dataset_fingerprint,
        "model": model_echo,
        "classes": list(map(str, classes)),
        "positive_class": positive_name,
        "metrics": report_dict(report, classes, positive_name),
        "flat": flat_with_names(report, classes),
    }


def protocol_report_dict(
    result: ProtocolResult,
    classes,
    *,
    dataset_fingerprint: dict,
    seed: int,
    positive_name: str | None,
) -> dict:
    """Nested JSON form of a full protocol run, config echo included."""
    config = result.config
    selection = result.selection

    def named(flat: dict) -> dict:
        out = {}
        for key, value in flat.items():
            metric, cls = _metric_and_class(key, classes)
            out[f"{metric}_class_{cls}" if cls else metric] = value
        return out

    return {
        "format": REPORT_FORMAT,
        "kind": "protocol",
        "dataset_fingerprint": dataset_fingerprint,
        "seed": int(seed),
        "config": {
            "k": config.k,
            "cv_repetitions": config.cv_repetitions,
            "normalizer": config.normalizer,
            "engine": config.engine,
            "positive_class": positive_name,
            "grid": [_grid_point_dict(p) for p in result.grid],
        },
        "classes": list(map(str, classes)),
        "selection": {
            "winners_by_split": list(selection.winner_indices),
            "frequency": {str(k): v for k, v in sorted(selection.frequency.items())},
            "tied_after_frequency": list(selection.tied_after_frequency),
            "mean_test_auc": {
                str(k): v for k, v in sorted(selection.mean_test_auc.items())
            },
            "tied_after_auc": list(selection.tied_after_auc),
            "chosen_index": selection.chosen_index,
            "chosen": _grid_point_dict(selection.chosen),
        },
        "splits": [
            {
                "repetition": rec.repetition_id,
                "winner_index": rec.winner_index,
                "winner": _grid_point_dict(rec.winner),
                "cv_objective": rec.cv_objective,
                "cv_metrics": named(rec.cv_metrics),
                "test_metrics": report_dict(rec.test_report, classes, positive_name),
            }
            for rec in result.records
        ],
        "aggregate": {
            "test": {
                "mean": named(result.test_aggregate.mean),
                "std": named(result.test_aggregate.std),
                "count": named(result.test_aggregate.count),
            },
            "cv": {
                "mean": named(result.cv_aggregate.mean),
                "std": named(result.cv_aggregate.std),
                "count": named(result.cv_aggregate.count),
            },
        },
    }


def _csv_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_long_csv(path, rows) -> None:
    """Write (split, metric, class, value) rows with a fixed header."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["split", "metric", "class", "value"])
        for split, metric, cls, value in rows:
            writer.writerow([split, metric, cls, _csv_value(value)])


def evaluation_csv_rows(report: MetricReport, classes):
    """Long-format rows for a single evaluation (split column = 'all')."""
    rows = []
    for key, value in report.flat().items():
        metric, cls = _metric_and_class(key, classes)
        rows.append(("all", metric, cls, value))
    return rows


def protocol_csv_rows(result: ProtocolResult, classes):
    """Long-format rows: per-split test metrics, then mean/std aggregates."""
    rows = []
    for rec in result.records:
        for key, value in rec.test_report.flat().items():
            metric, cls = _metric_and_class(key, classes)
            rows.append((str(rec.repetition_id), metric, cls, value))
        for key, value in rec.cv_metrics.items():
            metric, cls = _metric_and_class(key, classes)
            rows.append((str(rec.repetition_id), f"cv_{metric}", cls, value))
    for stat, table in (("mean", result.test_aggregate.mean), ("std", result.test_aggregate.std)):
        for key, value in table.items():
            metric, cls = _metric_and_class(key, classes)
            rows.append((stat, metric, cls, value))
    for stat, table in (("mean", result.cv_aggregate.mean), ("std", result.cv_aggregate.std)):
        for key, value in table.items():
            metric, cls = _metric_and_class(key, classes)
            rows.append((stat, f"cv_{metric}", cls, value))
    return rows


def write_predictions_csv(path, predicted_names, scores, classes) -> None:
    """Write per-row predictions: row index, label, one score column per class."""
    scores = np.asarray(scores, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row", "predicted"] + [f"score_{name}" for name in classes])
        for i, name in enumerate(predicted_names):
            writer.writerow([i, name] + [repr(float(v)) for v in scores[i]])
