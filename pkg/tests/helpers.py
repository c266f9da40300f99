"""Shared test utilities: random instances, synthetic datasets, CSV writing."""

from __future__ import annotations

import numpy as np

from pgmclassifier import LabeledStateSet


def random_unit_states(rng, m, d):
    v = rng.normal(size=(m, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_labeled_states(rng, n_classes, d, m):
    """Random unit states with labels guaranteed to cover every class."""
    labels = np.concatenate(
        [np.arange(n_classes), rng.integers(0, n_classes, m - n_classes)]
    ).astype(np.int64)
    return LabeledStateSet(
        states=random_unit_states(rng, m, d), labels=labels, n_classes=n_classes
    )


def random_instances(seed, count):
    """Instance family: l in 2..5, d in 2..6, n in 1..3, m in 5..40."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n_classes = int(rng.integers(2, 6))
        d = int(rng.integers(2, 7))
        n = int(rng.integers(1, 4))
        m = int(rng.integers(max(5, n_classes), 41))
        out.append((random_labeled_states(rng, n_classes, d, m), n, rng))
    return out


def blob_features(side, per_class, d=2, seed=20240814):
    """Three Gaussian blobs (unit sigma) at pairwise distance ``side``."""
    rng = np.random.default_rng(seed)
    centers = np.zeros((3, d))
    centers[1, 0] = side
    centers[2, 0] = side / 2
    centers[2, 1] = side * np.sqrt(3) / 2
    features = np.vstack([rng.normal(c, 1.0, (per_class, d)) for c in centers])
    labels = np.repeat(np.arange(3), per_class).astype(np.int64)
    return features, labels


def write_dataset_csv(path, features, label_names=None, feature_names=None, label_column="label"):
    features = np.asarray(features, dtype=float)
    d = features.shape[1]
    if feature_names is None:
        feature_names = [f"f{i}" for i in range(d)]
    header = list(feature_names) + ([label_column] if label_names is not None else [])
    lines = [",".join(header)]
    for i in range(features.shape[0]):
        cells = [repr(float(v)) for v in features[i]]
        if label_names is not None:
            cells.append(str(label_names[i]))
        lines.append(",".join(cells))
    path = str(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
