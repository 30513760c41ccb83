"""Confusion matrices and scalar performance metrics over instance subsets.

All counting is exact integer arithmetic on confusion-matrix cells; a single
float division (or square root) happens at the boundary when the value is
produced. Undefined values (vanishing denominators) are first-class: they
carry ``defined=False`` instead of a number and sort below every defined
value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .bitset import InstanceSet
from .errors import UniverseMismatch
from .dataset import ExperimentDataset

METRIC_KINDS = ("accuracy", "error_rate", "precision", "recall", "f1", "mcc")
# metrics that are a plain ratio of subset counts and can be shown as boxes
COUNT_RATIO_KINDS = ("accuracy", "error_rate", "precision", "recall")


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (l, l) int64, row = actual, column = predicted
    subset_size: int

    @property
    def n_labels(self) -> int:
        return self.counts.shape[0]

    @property
    def trace(self) -> int:
        return int(np.trace(self.counts))

    def cell(self, actual_id: int, predicted_id: int) -> int:
        return int(self.counts[actual_id, predicted_id])

    def class_counts(self, class_id: int) -> tuple[int, int, int, int]:
        """One-vs-rest (tp, fp, fn, tn) for a class."""
        tp = int(self.counts[class_id, class_id])
        fp = int(self.counts[:, class_id].sum()) - tp
        fn = int(self.counts[class_id, :].sum()) - tp
        tn = self.subset_size - tp - fp - fn
        return tp, fp, fn, tn


@dataclass(frozen=True)
class MetricValue:
    kind: str
    value: float | None
    defined: bool
    skipped_classes: int = 0  # classes with no defined value, for macro averages

    def sort_key(self) -> tuple[int, float]:
        """Total order with undefined below every defined value."""
        return (1, self.value) if self.defined else (0, -math.inf)

    def to_jsonable(self) -> dict:
        out = {"kind": self.kind, "value": self.value if self.defined else None, "defined": self.defined}
        if self.skipped_classes:
            out["skipped_classes"] = self.skipped_classes
        return out


def _defined(kind: str, value: float, skipped: int = 0) -> MetricValue:
    return MetricValue(kind=kind, value=float(value), defined=True, skipped_classes=skipped)


def _undefined(kind: str, skipped: int = 0) -> MetricValue:
    return MetricValue(kind=kind, value=None, defined=False, skipped_classes=skipped)


def confusion(dataset: ExperimentDataset, classifier: str, subset: InstanceSet) -> ConfusionMatrix:
    """cell[a][p] = |{i in subset : actual(i)=a and prediction(classifier,i)=p}|."""
    if subset.universe_size != dataset.n:
        raise UniverseMismatch(
            f"subset universe {subset.universe_size} != dataset size {dataset.n}"
        )
    pred = dataset.prediction_column(classifier)
    flat = K.confusion_counts(dataset.actual, pred, subset.words, dataset.l, dataset.n)
    counts = np.asarray(flat, dtype=np.int64).reshape(dataset.l, dataset.l)
    counts.flags.writeable = False
    return ConfusionMatrix(counts=counts, subset_size=len(subset))


def correct_set(dataset: ExperimentDataset, classifier: str, scope_set: InstanceSet) -> InstanceSet:
    """Members of scope_set with prediction = actual; its scope-complement is the incorrect set."""
    return InstanceSet(dataset.n, dataset.correct_words(classifier)).intersection(scope_set)


# -- per-class values ---------------------------------------------------------


def _per_class(matrix: ConfusionMatrix, kind: str, class_id: int) -> MetricValue:
    tp, fp, fn, tn = matrix.class_counts(class_id)
    if kind in ("accuracy", "recall", "error_rate"):
        # within-class accuracy is recall: the class row is the universe
        if tp + fn == 0:
            return _undefined(kind)
        recall = tp / (tp + fn)
        return _defined(kind, 1.0 - recall if kind == "error_rate" else recall)
    if kind == "precision":
        if tp + fp == 0:
            return _undefined(kind)
        return _defined(kind, tp / (tp + fp))
    if kind == "f1":
        if 2 * tp + fp + fn == 0:
            return _undefined(kind)
        return _defined(kind, 2 * tp / (2 * tp + fp + fn))
    if kind == "mcc":
        num = tp * tn - fp * fn
        den_sq = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
        if den_sq == 0:
            return _undefined(kind)
        return _defined(kind, num / math.sqrt(den_sq))
    raise ValueError(f"unknown metric kind {kind!r}")


def _multiclass_mcc(matrix: ConfusionMatrix) -> MetricValue:
    # correlation-style generalization over the full matrix, exact integer parts
    counts = matrix.counts
    s = matrix.subset_size
    c = matrix.trace
    t = [int(x) for x in counts.sum(axis=1)]  # actual (row) totals
    p = [int(x) for x in counts.sum(axis=0)]  # predicted (column) totals
    num = c * s - sum(tk * pk for tk, pk in zip(t, p))
    den_t = s * s - sum(tk * tk for tk in t)
    den_p = s * s - sum(pk * pk for pk in p)
    if den_t == 0 or den_p == 0:
        return _undefined("mcc")
    return _defined("mcc", num / math.sqrt(den_t * den_p))


def metric(matrix: ConfusionMatrix, kind: str, label_id: int | None = None) -> MetricValue:
    """Compute one metric; macro averaging by default, per-class when `label_id` given."""
    if kind not in METRIC_KINDS:
        raise ValueError(f"unknown metric kind {kind!r}; expected one of {METRIC_KINDS}")
    if label_id is not None:
        return _per_class(matrix, kind, label_id)

    if kind in ("accuracy", "error_rate"):
        if matrix.subset_size == 0:
            return _undefined(kind)
        acc = matrix.trace / matrix.subset_size
        return _defined(kind, 1.0 - acc if kind == "error_rate" else acc)
    if kind == "mcc":
        return _multiclass_mcc(matrix)

    values = [_per_class(matrix, kind, cid) for cid in range(matrix.n_labels)]
    defined = [v.value for v in values if v.defined]
    skipped = len(values) - len(defined)
    if not defined:
        return _undefined(kind, skipped)
    return _defined(kind, sum(defined) / len(defined), skipped)


def metric_table(dataset: ExperimentDataset, subset: InstanceSet) -> list[dict]:
    """One row per compared classifier, all metric kinds with macro averaging."""
    rows = []
    for name in dataset.compared:
        matrix = confusion(dataset, name, subset)
        rows.append(
            {
                "classifier": name,
                "metrics": {kind: metric(matrix, kind) for kind in METRIC_KINDS},
            }
        )
    return rows
