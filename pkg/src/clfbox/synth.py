"""Deterministic synthetic experiment generator for performance testing.

Produces a manifest + CSV pair in the loader's format. Per-classifier
accuracy is controllable: classifier i is correct on each instance with its
target probability, otherwise predicts a uniformly random wrong label.
Identical (sizes, seed) always yield byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import SchemaViolation


def default_accuracies(m: int) -> list[float]:
    if m == 1:
        return [0.75]
    return [round(0.55 + 0.4 * i / (m - 1), 4) for i in range(m)]


def generate(
    out_dir: str | Path,
    n: int,
    m: int,
    l: int,  # noqa: E741 - conventional symbol for label count
    n_features: int = 4,
    seed: int = 0,
    accuracies: list[float] | None = None,
    train_fraction: float = 0.75,
) -> Path:
    """Write manifest.json + data.csv under out_dir; returns the manifest path."""
    if n < 1 or m < 1 or n_features < 0:
        raise SchemaViolation("n and m must be >= 1, features >= 0", "synth")
    if l < 2:
        raise SchemaViolation("need at least 2 labels", "synth")
    if accuracies is None:
        accuracies = default_accuracies(m)
    if len(accuracies) != m:
        raise SchemaViolation(f"expected {m} accuracies, got {len(accuracies)}", "accuracies")
    if any(not 0.0 <= a <= 1.0 for a in accuracies):
        raise SchemaViolation("accuracies must be within [0, 1]", "accuracies")

    rng = np.random.default_rng(seed)
    labels = [f"L{i:02d}" for i in range(l)]
    classifiers = [f"clf{i:02d}" for i in range(m)]

    actual = rng.integers(0, l, size=n)
    split = np.where(rng.random(n) < train_fraction, "train", "test")

    frame = pd.DataFrame(
        {
            "id": [f"i{i}" for i in range(n)],
            "split": split,
            "actual": [labels[a] for a in actual],
        }
    )

    features = []
    for f in range(n_features):
        if f % 2 == 0:
            name = f"num{f:02d}"
            features.append({"name": name, "kind": "continuous"})
            # mildly class-correlated so histograms are not flat
            values = actual * (0.25 + 0.05 * f) + rng.normal(0.0, 1.0, size=n)
            frame[name] = np.round(values, 6)
        else:
            name = f"cat{f:02d}"
            n_cats = 3 + (f % 4)
            cats = [f"{name}_v{c}" for c in range(n_cats)]
            features.append({"name": name, "kind": "categorical", "categories": cats})
            frame[name] = [cats[c] for c in rng.integers(0, n_cats, size=n)]

    for name, accuracy in zip(classifiers, accuracies):
        correct = rng.random(n) < accuracy
        offsets = rng.integers(1, l, size=n)  # uniform over the l-1 wrong labels
        predicted = np.where(correct, actual, (actual + offsets) % l)
        frame[name] = [labels[p] for p in predicted]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "data.csv"
    frame.to_csv(csv_path, index=False, float_format="%.6f")

    manifest = {
        "labels": labels,
        "features": features,
        "classifiers": classifiers,
        "data": "data.csv",
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path
