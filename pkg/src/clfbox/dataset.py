"""Columnar experiment dataset: loading, validation, scopes.

A dataset is the immutable record of one classifier experiment: instances
with features, a true label per instance, a train/test split, and one
prediction column per classifier. Labels, categories and classifier names
are interned to dense integer ids at load; the whole engine computes on ids
and packed bitmaps, names reappear only at the API boundary.

Manifest format (JSON):

    {
      "labels": ["A", "B", ...],
      "features": [{"name": ..., "kind": "continuous"|"categorical",
                    "categories": [...]?, "missing_allowed": bool?}, ...],
      "classifiers": ["c1", ...],
      "gold_standard": "c1"?,               # optional
      "data": {column arrays}  |  "relative/path.csv"
    }

CSV data has the header ``id,split,actual,<features...>,<classifiers...>``
(``actual`` may be omitted when ``gold_standard`` is set). Empty cells are
missing values; split cells are exactly ``train`` or ``test``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from threading import Lock
from typing import Sequence

import numpy as np
import pandas as pd

from . import _kernels as K
from .bitset import InstanceSet
from .errors import (
    DuplicateInstanceId,
    LabelOutOfVocabulary,
    LengthMismatch,
    MissingFile,
    SchemaViolation,
    UnknownClassifier,
    UnknownFeature,
    UnknownLabel,
)

SCOPES = ("train", "test", "all")
MISSING = -1  # interned code for a missing categorical/label value


class LabelVocabulary:
    """Ordered label names with dense ids 0..l-1."""

    def __init__(self, labels: Sequence[str]):
        labels = tuple(str(x) for x in labels)
        if len(labels) < 2:
            raise SchemaViolation("at least 2 labels required", "labels")
        if len(set(labels)) != len(labels):
            raise SchemaViolation("duplicate label names", "labels")
        self.labels = labels
        self._ids = {name: i for i, name in enumerate(labels)}

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelVocabulary) and self.labels == other.labels

    def index(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise UnknownLabel(f"unknown label {name!r}") from None

    def name(self, label_id: int) -> str:
        return self.labels[label_id]


@dataclass(frozen=True)
class FeatureSchema:
    name: str
    kind: str  # "continuous" | "categorical"
    categories: tuple[str, ...] | None = None
    missing_allowed: bool = True

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise SchemaViolation(f"bad feature kind {self.kind!r}", f"features[{self.name}].kind")
        if self.kind == "categorical":
            if not self.categories:
                raise SchemaViolation(
                    "categorical feature needs at least one category",
                    f"features[{self.name}].categories",
                )
        elif self.categories is not None:
            raise SchemaViolation(
                "continuous feature must not list categories",
                f"features[{self.name}].categories",
            )

    def category_index(self, category: str) -> int:
        if self.kind != "categorical" or category not in self.categories:
            raise UnknownLabel(
                f"unknown category {category!r} for feature {self.name!r}"
            )
        return self.categories.index(category)


@dataclass
class ValidationReport:
    warnings: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


class ExperimentDataset:
    """Immutable columnar store for one experiment's results.

    Construction is done by :func:`load_dataset`; all arrays are set
    read-only afterwards. Derived bitmaps (per-classifier correct sets,
    pairwise agreement, per-instance correct counts) are computed lazily
    and cached, which is safe because the underlying columns never change.
    """

    def __init__(
        self,
        instance_ids: tuple[str, ...],
        labels: LabelVocabulary,
        features: tuple[FeatureSchema, ...],
        feature_columns: dict[str, np.ndarray],
        actual: np.ndarray,
        split_flags: np.ndarray,
        classifiers: tuple[str, ...],
        predictions: dict[str, np.ndarray],
        gold_standard: str | None = None,
        source: str | None = None,
    ):
        self.instance_ids = instance_ids
        self.labels = labels
        self.features = features
        self.feature_columns = feature_columns
        self.actual = actual
        self.split_flags = split_flags  # 0 = train, 1 = test
        self.classifiers = classifiers
        self.predictions = predictions
        self.gold_standard = gold_standard
        self.source = source

        self.n = len(instance_ids)
        self.compared = tuple(c for c in classifiers if c != gold_standard)
        self._features_by_name = {f.name: f for f in features}
        for arr in [actual, split_flags, *feature_columns.values(), *predictions.values()]:
            arr.flags.writeable = False

        self._lock = Lock()
        self._scope_cache: dict[str, InstanceSet] = {}
        self._correct_cache: dict[str, np.ndarray] = {}
        self._agree_cache: dict[tuple[str, str], np.ndarray] = {}
        self._ncorrect: np.ndarray | None = None

    # -- shape -------------------------------------------------------------

    @property
    def l(self) -> int:  # noqa: E743 - conventional symbol for label count
        return len(self.labels)

    @property
    def m(self) -> int:
        """Number of compared classifiers (gold standard excluded)."""
        return len(self.compared)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExperimentDataset):
            return NotImplemented
        return (
            self.instance_ids == other.instance_ids
            and self.labels == other.labels
            and self.features == other.features
            and self.classifiers == other.classifiers
            and self.gold_standard == other.gold_standard
            and np.array_equal(self.actual, other.actual)
            and np.array_equal(self.split_flags, other.split_flags)
            and all(
                np.array_equal(self.feature_columns[f.name], other.feature_columns[f.name], equal_nan=f.kind == "continuous")
                for f in self.features
            )
            and all(np.array_equal(self.predictions[c], other.predictions[c]) for c in self.classifiers)
        )

    # -- lookups -----------------------------------------------------------

    def feature(self, name: str) -> FeatureSchema:
        try:
            return self._features_by_name[name]
        except KeyError:
            raise UnknownFeature(f"unknown feature {name!r}") from None

    def feature_column(self, name: str) -> np.ndarray:
        self.feature(name)
        return self.feature_columns[name]

    def prediction_column(self, classifier: str) -> np.ndarray:
        try:
            return self.predictions[classifier]
        except KeyError:
            raise UnknownClassifier(f"unknown classifier {classifier!r}") from None

    # -- scopes ------------------------------------------------------------

    def scope_set(self, scope: str) -> InstanceSet:
        if scope not in SCOPES:
            raise SchemaViolation(f"unknown scope {scope!r}, expected one of {SCOPES}", "scope")
        with self._lock:
            cached = self._scope_cache.get(scope)
            if cached is None:
                if scope == "all":
                    cached = InstanceSet.full(self.n)
                else:
                    flag = 0 if scope == "train" else 1
                    cached = InstanceSet.from_mask(self.split_flags == flag)
                self._scope_cache[scope] = cached
        return cached

    # -- derived bitmaps (lazy) ---------------------------------------------

    def correct_words(self, classifier: str) -> np.ndarray:
        """Packed bitmap of instances where `classifier` predicts `actual`."""
        pred = self.prediction_column(classifier)
        with self._lock:
            words = self._correct_cache.get(classifier)
            if words is None:
                words = K.pack_mask(pred == self.actual)
                words.flags.writeable = False
                self._correct_cache[classifier] = words
        return words

    def agree_words(self, a: str, b: str) -> np.ndarray:
        """Packed bitmap of instances where classifiers a and b agree."""
        key = (a, b) if a <= b else (b, a)
        pa, pb = self.prediction_column(a), self.prediction_column(b)
        with self._lock:
            words = self._agree_cache.get(key)
            if words is None:
                words = K.pack_mask(pa == pb)
                words.flags.writeable = False
                self._agree_cache[key] = words
        return words

    def ncorrect_codes(self) -> np.ndarray:
        """Per-instance count of compared classifiers that predicted correctly."""
        with self._lock:
            if self._ncorrect is None:
                counts = np.zeros(self.n, dtype=np.int32)
                for name in self.compared:
                    counts += (self.predictions[name] == self.actual).astype(np.int32)
                counts.flags.writeable = False
                self._ncorrect = counts
        return self._ncorrect

    def precompute(self) -> None:
        """Materialize every derived bitmap up front (optional).

        The caches fill lazily on first use; calling this right after load
        moves that cost into load time so the first interaction is as fast
        as the steady state.
        """
        for scope in SCOPES:
            self.scope_set(scope)
        for name in self.classifiers:
            self.correct_words(name)
        self.ncorrect_codes()
        for i, a in enumerate(self.compared):
            for b in self.compared[i + 1:]:
                self.agree_words(a, b)


# -- loading ----------------------------------------------------------------


def load_dataset(manifest_path: str | Path) -> ExperimentDataset:
    """Load and fully validate a dataset manifest."""
    path = Path(manifest_path)
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"manifest is not valid JSON: {exc}", str(path)) from None
    return load_manifest(manifest, base_dir=path.parent, source=str(path))


def load_manifest(
    manifest: dict, base_dir: Path | None = None, source: str | None = None
) -> ExperimentDataset:
    """Load a manifest that is already parsed to a dict (e.g. an API upload)."""
    if not isinstance(manifest, dict):
        raise SchemaViolation("manifest must be a JSON object", "")
    for key in ("labels", "features", "classifiers", "data"):
        if key not in manifest:
            raise SchemaViolation(f"missing field {key!r}", key)

    labels = LabelVocabulary(_as_list(manifest["labels"], "labels"))
    features = _parse_features(_as_list(manifest["features"], "features"))
    classifiers = tuple(str(c) for c in _as_list(manifest["classifiers"], "classifiers"))
    if not classifiers:
        raise SchemaViolation("at least one classifier required", "classifiers")
    if len(set(classifiers)) != len(classifiers):
        raise SchemaViolation("duplicate classifier names", "classifiers")

    reserved = {"id", "split", "actual"}
    feature_names = [f.name for f in features]
    if len(set(feature_names)) != len(feature_names):
        raise SchemaViolation("duplicate feature names", "features")
    overlap = (set(feature_names) | reserved) & set(classifiers)
    if overlap:
        raise SchemaViolation(f"classifier names collide with columns: {sorted(overlap)}", "classifiers")
    if set(feature_names) & reserved:
        raise SchemaViolation("feature names id/split/actual are reserved", "features")

    gold = manifest.get("gold_standard")
    if gold is not None:
        gold = str(gold)
        if gold not in classifiers:
            raise SchemaViolation(f"gold_standard {gold!r} is not a classifier", "gold_standard")
        if len(classifiers) < 2:
            raise SchemaViolation("gold_standard needs at least one other classifier", "gold_standard")

    data = manifest["data"]
    need_actual = gold is None
    if isinstance(data, str):
        csv_path = (base_dir or Path.cwd()) / data
        columns = _read_csv_columns(csv_path, feature_names, classifiers, need_actual)
    elif isinstance(data, dict):
        columns = _inline_columns(data, feature_names, classifiers, need_actual)
    else:
        raise SchemaViolation("data must be a column object or a CSV path", "data")

    return _build_dataset(columns, labels, features, classifiers, gold, source)


def _as_list(value, path: str) -> list:
    if not isinstance(value, list):
        raise SchemaViolation(f"{path} must be an array", path)
    return value


def _parse_features(raw: list) -> tuple[FeatureSchema, ...]:
    features = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or "name" not in item or "kind" not in item:
            raise SchemaViolation("feature needs name and kind", f"features[{i}]")
        categories = item.get("categories")
        features.append(
            FeatureSchema(
                name=str(item["name"]),
                kind=str(item["kind"]),
                categories=tuple(str(c) for c in categories) if categories is not None else None,
                missing_allowed=bool(item.get("missing_allowed", True)),
            )
        )
    return tuple(features)


def _read_csv_columns(
    csv_path: Path, feature_names: list[str], classifiers: tuple[str, ...], need_actual: bool
) -> dict[str, pd.Series]:
    if not csv_path.is_file():
        raise MissingFile(f"data file not found: {csv_path}")
    try:
        frame = pd.read_csv(csv_path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.ParserError as exc:
        raise LengthMismatch(f"malformed CSV {csv_path.name}: {exc}", str(csv_path)) from None
    expected = ["id", "split"] + (["actual"] if need_actual else []) + feature_names + list(classifiers)
    got = [c.strip() for c in frame.columns]
    if got != expected and got != ["id", "split", "actual"] + feature_names + list(classifiers):
        raise SchemaViolation(
            f"CSV header mismatch: expected {expected}, got {got}", f"{csv_path.name}:header"
        )
    frame.columns = got
    return {name: frame[name] for name in got}


def _inline_columns(
    data: dict, feature_names: list[str], classifiers: tuple[str, ...], need_actual: bool
) -> dict[str, pd.Series]:
    required = ["id", "split"] + (["actual"] if need_actual else []) + feature_names + list(classifiers)
    missing = [c for c in required if c not in data]
    if missing:
        raise SchemaViolation(f"data is missing columns: {missing}", "data")
    columns = {}
    n = len(data["id"])
    for name in required + (["actual"] if not need_actual and "actual" in data else []):
        col = data[name]
        if not isinstance(col, list):
            raise SchemaViolation(f"data.{name} must be an array", f"data.{name}")
        if len(col) != n:
            raise LengthMismatch(
                f"column {name!r} has {len(col)} entries, expected {n}", f"data.{name}"
            )
        columns[name] = pd.Series(
            ["" if v is None else str(v) for v in col], dtype=str
        )
    return columns


def _intern(series: pd.Series, vocabulary: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Map strings to dense codes; returns (codes, bad_mask) with missing = -1."""
    values = series.to_numpy(dtype=object)
    codes = pd.Categorical(values, categories=list(vocabulary)).codes.astype(np.int32)
    bad = (codes == MISSING) & (values != "")
    return codes, bad


def _build_dataset(
    columns: dict[str, pd.Series],
    labels: LabelVocabulary,
    features: tuple[FeatureSchema, ...],
    classifiers: tuple[str, ...],
    gold: str | None,
    source: str | None,
) -> ExperimentDataset:
    ids = tuple(columns["id"].astype(str).tolist())
    n = len(ids)
    if n == 0:
        raise SchemaViolation("dataset has no instances", "data")
    if len(set(ids)) != n:
        dupes = columns["id"][columns["id"].duplicated()].iloc[0]
        raise DuplicateInstanceId(f"duplicate instance id {dupes!r}", "data.id")

    for name, col in columns.items():
        if len(col) != n:
            raise LengthMismatch(f"column {name!r} has {len(col)} entries, expected {n}", f"data.{name}")

    split_raw = columns["split"].to_numpy(dtype=object)
    bad_split = ~np.isin(split_raw, ("train", "test"))
    if bad_split.any():
        i = int(np.argmax(bad_split))
        raise SchemaViolation(
            f"split value {split_raw[i]!r} at row {i} (must be 'train' or 'test')", f"data.split[{i}]"
        )
    split_flags = (split_raw == "test").astype(np.uint8)

    feature_columns: dict[str, np.ndarray] = {}
    for schema in features:
        col = columns[schema.name]
        if schema.kind == "continuous":
            raw = col.to_numpy(dtype=object)
            numeric = pd.to_numeric(col.replace("", None), errors="coerce").to_numpy(dtype=np.float64)
            bad = np.isnan(numeric) & (raw != "")
            if bad.any():
                i = int(np.argmax(bad))
                raise SchemaViolation(
                    f"bad decimal literal {raw[i]!r} at row {i}", f"data.{schema.name}[{i}]"
                )
            missing = np.isnan(numeric)
        else:
            numeric, bad = _intern(col, schema.categories)
            if bad.any():
                i = int(np.argmax(bad))
                raise SchemaViolation(
                    f"unknown category {col.iloc[i]!r} at row {i}", f"data.{schema.name}[{i}]"
                )
            missing = numeric == MISSING
        if missing.any() and not schema.missing_allowed:
            i = int(np.argmax(missing))
            raise SchemaViolation(
                f"missing value at row {i} but feature disallows missing", f"data.{schema.name}[{i}]"
            )
        feature_columns[schema.name] = np.ascontiguousarray(numeric)

    predictions: dict[str, np.ndarray] = {}
    for name in classifiers:
        codes, bad = _intern(columns[name], labels.labels)
        if bad.any():
            i = int(np.argmax(bad))
            raise LabelOutOfVocabulary(
                f"prediction {columns[name].iloc[i]!r} at row {i} is not a label", f"data.{name}[{i}]"
            )
        if (codes == MISSING).any():
            i = int(np.argmax(codes == MISSING))
            raise SchemaViolation(f"missing prediction at row {i}", f"data.{name}[{i}]")
        predictions[name] = np.ascontiguousarray(codes)

    if gold is not None:
        actual = predictions[gold].copy()
    else:
        actual, bad = _intern(columns["actual"], labels.labels)
        if bad.any():
            i = int(np.argmax(bad))
            raise LabelOutOfVocabulary(
                f"actual label {columns['actual'].iloc[i]!r} at row {i} is not in the vocabulary",
                f"data.actual[{i}]",
            )
        if (actual == MISSING).any():
            i = int(np.argmax(actual == MISSING))
            raise SchemaViolation(f"missing actual label at row {i}", f"data.actual[{i}]")
        actual = np.ascontiguousarray(actual)

    return ExperimentDataset(
        instance_ids=ids,
        labels=labels,
        features=features,
        feature_columns=feature_columns,
        actual=actual,
        split_flags=split_flags,
        classifiers=classifiers,
        predictions=predictions,
        gold_standard=gold,
        source=source,
    )


# -- validation ---------------------------------------------------------------


def validate(dataset: ExperimentDataset) -> ValidationReport:
    """Report-only checks for conditions that are legal but suspicious."""
    report = ValidationReport()
    if len(dataset.scope_set("train")) == 0:
        report.warnings.append("empty train split")
    if len(dataset.scope_set("test")) == 0:
        report.warnings.append("empty test split")
    for schema in dataset.features:
        column = dataset.feature_columns[schema.name]
        if schema.kind == "continuous":
            present = column[~np.isnan(column)]
            n_missing = dataset.n - present.size
        else:
            present = column[column != MISSING]
            n_missing = dataset.n - present.size
        if n_missing:
            report.warnings.append(f"feature {schema.name!r}: {n_missing} missing values")
        if dataset.n > 1 and present.size > 0 and np.unique(present).size == 1:
            report.warnings.append(f"constant feature: {schema.name!r}")
    return report


def scope_set(dataset: ExperimentDataset, scope: str) -> InstanceSet:
    return dataset.scope_set(scope)
