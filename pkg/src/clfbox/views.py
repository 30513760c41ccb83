"""View payload computation.

Every view reduces to groups of *boxes*: a subset (named by a composable
query) with its scoped count and the overlap counts against both active
selections. Counts are computed with bulk bitmap kernels (one pass per
selection variant) rather than per-box query evaluation, but each box
carries the query whose evaluation would reproduce its count — the test
suite enforces that equivalence.

Payloads are plain JSON-able dicts with a shared envelope::

    {"view", "params", "selection_version", "groups": [...], "meta": {...}}

``payload_json`` renders the canonical byte form; the CLI and the HTTP
service both emit exactly that, which is what makes their outputs
byte-comparable.
"""

from __future__ import annotations

import functools
import json

import numpy as np

from . import _kernels as K
from .bitset import InstanceSet
from .dataset import ExperimentDataset
from .errors import (
    InvalidPage,
    MissingSelection,
    SchemaViolation,
    TooFewClassifiers,
    UnknownView,
)
from .metrics import COUNT_RATIO_KINDS, METRIC_KINDS, MetricValue, confusion, metric
from .query import (
    Actual,
    ClassifierCorrect,
    ClassifierIncorrect,
    Combine,
    CumulativeCount,
    FeatureEquals,
    FeatureRange,
    Predicted,
    Query,
    Scope,
    describe,
    evaluate,
    parse,
)
from .selection import SelectionState

DEFAULT_SMALL_THRESHOLD = 0.02
DEFAULT_BINS = 10
PSEUDO_PREDICTED = "pred:"


def payload_json(payload: dict) -> str:
    """Canonical serialization; identical bytes for identical payloads."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _small_flag(count: int, group_total: int, threshold: float) -> bool:
    # zero is encoded differently from small: never flag empty boxes
    return 0 < count and group_total > 0 and count / group_total < threshold


def _metric_json(value: MetricValue) -> dict:
    return value.to_jsonable()


class _ViewContext:
    """Scope and selection bitmaps shared by all boxes of one payload."""

    def __init__(self, dataset: ExperimentDataset, state: SelectionState, version: int):
        self.dataset = dataset
        self.state = state
        self.version = version
        self.scope = state.scope_set()
        self.scope_words = self.scope.words
        self.first_scoped = (
            state.first.set.words & self.scope_words if state.first is not None else None
        )
        self.second_scoped = (
            state.second.set.words & self.scope_words if state.second is not None else None
        )

    def overlaps(self, words: np.ndarray) -> tuple[int, int]:
        first = int(K.popcount_and(words, self.first_scoped)) if self.first_scoped is not None else 0
        second = int(K.popcount_and(words, self.second_scoped)) if self.second_scoped is not None else 0
        return first, second

    def box_from_words(self, query: Query, scoped_words: np.ndarray, **extra) -> dict:
        count = int(K.popcount(scoped_words))
        first, second = self.overlaps(scoped_words)
        return self.box(query, count, first, second, **extra)

    def box(self, query: Query, count: int, overlap_first: int, overlap_second: int, **extra) -> dict:
        out = {
            "query_text": describe(query),
            "count": count,
            "overlap_first": overlap_first,
            "overlap_second": overlap_second,
            "small_flag": False,  # set once the group total is known
        }
        out.update(extra)
        return out

    def triple_bincount(self, codes: np.ndarray, n_bins: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Counts per code over scope, scope∩first, scope∩second."""
        n = self.dataset.n
        counts = K.masked_bincount(codes, self.scope_words, n_bins, n)
        zeros = np.zeros(n_bins, dtype=np.int64)
        first = K.masked_bincount(codes, self.first_scoped, n_bins, n) if self.first_scoped is not None else zeros
        second = K.masked_bincount(codes, self.second_scoped, n_bins, n) if self.second_scoped is not None else zeros
        return counts, first, second

    def payload(self, view: str, params: dict, **body) -> dict:
        out = {"view": view, "params": params, "selection_version": self.version}
        out.update(body)
        return out


def _flag_boxes(boxes: list[dict], group_total: int, threshold: float) -> None:
    for box in boxes:
        box["small_flag"] = _small_flag(box["count"], group_total, threshold)


def _sorted_groups(groups: list[dict], mode: str, value_key: str = "value") -> list[dict]:
    if mode == "none":
        return groups
    if mode != "value":
        raise SchemaViolation(f"unknown sort mode {mode!r}", "sort")
    # descending by value, undefined last, ties stable in classifier order
    def key(item):
        index, group = item
        if group.get("defined"):
            return (0, -group[value_key], index)
        return (1, 0.0, index)

    return [g for _, g in sorted(enumerate(groups), key=key)]


# -- classifier performance -----------------------------------------------------


def classifier_performance(
    dataset: ExperimentDataset,
    state: SelectionState,
    version: int = 0,
    metric_kind: str = "accuracy",
    sort: str = "none",
    class_label: str | None = None,
    small_threshold: float = DEFAULT_SMALL_THRESHOLD,
) -> dict:
    """One stacked bar per compared classifier: numerator and complement boxes."""
    if metric_kind not in METRIC_KINDS:
        raise SchemaViolation(f"unknown metric {metric_kind!r}", "metric")
    ctx = _ViewContext(dataset, state, version)
    decomposable = metric_kind in ("accuracy", "error_rate") or (
        metric_kind in ("precision", "recall") and class_label is not None
    )
    label_id = dataset.labels.index(class_label) if class_label is not None else None

    groups = []
    for name in dataset.compared:
        matrix = confusion(dataset, name, ctx.scope)
        value = metric(matrix, metric_kind, label_id)
        group = {
            "classifier": name,
            "value": value.value,
            "defined": value.defined,
            "boxes": [],
            "total": 0,
        }
        if decomposable:
            group["boxes"], group["total"] = _performance_boxes(
                ctx, name, metric_kind, class_label
            )
            _flag_boxes(group["boxes"], group["total"], small_threshold)
        groups.append(group)

    groups = _sorted_groups(groups, sort)
    params = {
        "metric": metric_kind,
        "sort": sort,
        "class_label": class_label,
        "small_threshold": small_threshold,
    }
    meta = {"decomposable": decomposable, "scope_size": len(ctx.scope)}
    if not decomposable:
        # the metric is not a ratio of subset counts: values only, no boxes
        meta["reason"] = "NonDecomposableMetric"
    return ctx.payload("classifier_performance", params, groups=groups, meta=meta)


def _performance_boxes(
    ctx: _ViewContext, name: str, metric_kind: str, class_label: str | None
) -> tuple[list[dict], int]:
    dataset = ctx.dataset
    correct = dataset.correct_words(name) & ctx.scope_words
    incorrect = ctx.scope_words & ~dataset.correct_words(name)
    if metric_kind in ("accuracy", "error_rate"):
        correct_box = ctx.box_from_words(ClassifierCorrect(name), correct, part="correct")
        incorrect_box = ctx.box_from_words(ClassifierIncorrect(name), incorrect, part="incorrect")
        boxes = [correct_box, incorrect_box]
        if metric_kind == "error_rate":
            boxes.reverse()
        return boxes, len(ctx.scope)

    label_id = dataset.labels.index(class_label)
    actual_eq = K.filter_eq(dataset.actual, label_id, dataset.n)
    if metric_kind == "recall":
        universe = actual_eq & ctx.scope_words
        numerator_q = Combine("intersection", Actual(class_label), ClassifierCorrect(name))
        complement_q = Combine("intersection", Actual(class_label), ClassifierIncorrect(name))
        numerator = universe & correct
    else:  # precision
        pred_eq = K.filter_eq(dataset.prediction_column(name), label_id, dataset.n)
        universe = pred_eq & ctx.scope_words
        numerator_q = Combine("intersection", Predicted(name, class_label), Actual(class_label))
        complement_q = Combine("difference", Predicted(name, class_label), Actual(class_label))
        numerator = universe & actual_eq
    complement = universe & ~numerator
    boxes = [
        ctx.box_from_words(numerator_q, numerator, part="hit"),
        ctx.box_from_words(complement_q, complement, part="miss"),
    ]
    return boxes, int(K.popcount(universe))


# -- histogram --------------------------------------------------------------------


def _resolve_histogram_column(dataset: ExperimentDataset, feature: str):
    """Returns (codes or values, kind, category names or None, query factory)."""
    if feature == "actual":
        return dataset.actual, "categorical", dataset.labels.labels, lambda lab: Actual(lab)
    if feature.startswith(PSEUDO_PREDICTED):
        clf = feature[len(PSEUDO_PREDICTED):]
        column = dataset.prediction_column(clf)
        return column, "categorical", dataset.labels.labels, lambda lab: Predicted(clf, lab)
    schema = dataset.feature(feature)
    column = dataset.feature_column(feature)
    if schema.kind == "categorical":
        return column, "categorical", schema.categories, lambda cat: FeatureEquals(feature, cat)
    return column, "continuous", None, None


def _bin_codes(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    codes = (np.searchsorted(edges, values, side="right") - 1).astype(np.int32)
    n_bins = len(edges) - 1
    codes[codes >= n_bins] = -1  # beyond the top edge (also catches NaN)
    codes[values == edges[-1]] = n_bins - 1  # top edge joins the closed last bin
    codes[np.isnan(values)] = -1
    return codes


def histogram(
    dataset: ExperimentDataset,
    state: SelectionState,
    version: int = 0,
    feature: str = "",
    bins: int = DEFAULT_BINS,
    lo: float | None = None,
    hi: float | None = None,
    normalize: bool = False,
    sort: str = "natural",
    small_threshold: float = DEFAULT_SMALL_THRESHOLD,
) -> dict:
    """Distribution of one feature (or the actual / a predicted class) as boxes."""
    if not feature:
        raise SchemaViolation("histogram requires a feature", "feature")
    if sort not in ("natural", "count"):
        raise SchemaViolation(f"unknown sort mode {sort!r}", "sort")
    ctx = _ViewContext(dataset, state, version)
    params = {
        "feature": feature,
        "bins": bins,
        "lo": lo,
        "hi": hi,
        "normalize": normalize,
        "sort": sort,
        "small_threshold": small_threshold,
    }
    column, kind, categories, make_query = _resolve_histogram_column(dataset, feature)

    meta: dict = {"feature_kind": kind, "scope_size": len(ctx.scope)}
    if len(ctx.scope) == 0:
        return ctx.payload("histogram", params, groups=[], meta=meta)

    if kind == "categorical":
        codes = column
        n_bins = len(categories)
        bin_labels = list(categories)
        queries = [make_query(c) for c in categories]
    else:
        if bins < 1:
            raise SchemaViolation("bins must be >= 1", "bins")
        scoped_values = column[ctx.scope.indices()]
        present = scoped_values[~np.isnan(scoped_values)]
        if present.size == 0:
            meta["missing_in_scope"] = int(len(ctx.scope))
            return ctx.payload("histogram", params, groups=[], meta=meta)
        lo_edge = float(present.min()) if lo is None else float(lo)
        hi_edge = float(present.max()) if hi is None else float(hi)
        if hi_edge < lo_edge:
            raise SchemaViolation("hi must be >= lo", "hi")
        if hi_edge == lo_edge:
            edges = np.array([lo_edge, hi_edge], dtype=np.float64)
        else:
            edges = np.linspace(lo_edge, hi_edge, bins + 1)
        n_bins = len(edges) - 1
        codes = _bin_codes(column, edges)
        bin_labels = []
        queries = []
        for i in range(n_bins):
            last = i == n_bins - 1
            closer = "]" if last else ")"
            label = f"[{float(edges[i])!r},{float(edges[i + 1])!r}{closer}"
            bin_labels.append(label)
            queries.append(
                FeatureRange(feature, float(edges[i]), float(edges[i + 1]), include_hi=last, bin_label=label)
            )
        meta["bin_edges"] = [float(e) for e in edges]

    counts, first, second = ctx.triple_bincount(np.ascontiguousarray(codes, dtype=np.int32), n_bins)
    total = int(counts.sum())
    meta["missing_in_scope"] = len(ctx.scope) - total

    boxes = []
    for i in range(n_bins):
        box = ctx.box(
            queries[i], int(counts[i]), int(first[i]), int(second[i]), bin=bin_labels[i]
        )
        if normalize:
            box["fraction"] = counts[i] / total if total else 0.0
            box["overlap_first_fraction"] = first[i] / counts[i] if counts[i] else 0.0
            box["overlap_second_fraction"] = second[i] / counts[i] if counts[i] else 0.0
        boxes.append(box)
    _flag_boxes(boxes, total, small_threshold)
    if sort == "count":
        order = sorted(range(n_bins), key=lambda i: (-boxes[i]["count"], i))
        boxes = [boxes[i] for i in order]

    groups = [{"key": feature, "total": total, "boxes": boxes}]
    return ctx.payload("histogram", params, groups=groups, meta=meta)


# -- cumulative accuracy -------------------------------------------------------------


def cumulative_accuracy(
    dataset: ExperimentDataset,
    state: SelectionState,
    version: int = 0,
    direction: str = "up",
    small_threshold: float = DEFAULT_SMALL_THRESHOLD,
) -> dict:
    """Boxes for 'exactly k classifiers correct', k = 0..m, plus the pareto line."""
    if direction not in ("up", "down"):
        raise SchemaViolation(f"direction must be 'up' or 'down', got {direction!r}", "direction")
    ctx = _ViewContext(dataset, state, version)
    m = dataset.m
    counts, first, second = ctx.triple_bincount(dataset.ncorrect_codes(), m + 1)
    scope_size = len(ctx.scope)

    boxes = []
    for k in range(m + 1):
        boxes.append(ctx.box(CumulativeCount(k), int(counts[k]), int(first[k]), int(second[k]), k=k))
    _flag_boxes(boxes, scope_size, small_threshold)

    if scope_size:
        cumulative = np.cumsum(counts if direction == "up" else counts[::-1]) / scope_size
        pareto = [float(x) for x in cumulative]
        if direction == "down":
            pareto = pareto[::-1]  # pareto[k] = fraction with >= k correct
    else:
        pareto = [0.0] * (m + 1)

    params = {"direction": direction, "small_threshold": small_threshold}
    meta = {"m": m, "pareto": pareto, "scope_size": scope_size}
    groups = [{"key": "ncorrect", "total": scope_size, "boxes": boxes}]
    return ctx.payload("cumulative_accuracy", params, groups=groups, meta=meta)


# -- confusion matrix grid ------------------------------------------------------------


def confusion_grid(
    dataset: ExperimentDataset,
    state: SelectionState,
    version: int = 0,
    small_threshold: float = DEFAULT_SMALL_THRESHOLD,
) -> dict:
    """Per classifier, an l x l grid of (actual, predicted) boxes."""
    ctx = _ViewContext(dataset, state, version)
    l = dataset.l
    labels = dataset.labels.labels
    scope_size = len(ctx.scope)

    groups = []
    for name in dataset.compared:
        codes = dataset.actual.astype(np.int64) * l + dataset.prediction_column(name)
        counts, first, second = ctx.triple_bincount(codes.astype(np.int32), l * l)
        boxes = []
        for a in range(l):
            for p in range(l):
                flat = a * l + p
                query = Combine("intersection", Actual(labels[a]), Predicted(name, labels[p]))
                boxes.append(
                    ctx.box(
                        query,
                        int(counts[flat]),
                        int(first[flat]),
                        int(second[flat]),
                        actual=labels[a],
                        predicted=labels[p],
                    )
                )
        _flag_boxes(boxes, scope_size, small_threshold)
        groups.append({"classifier": name, "total": scope_size, "boxes": boxes})

    params = {"small_threshold": small_threshold}
    meta = {"labels": list(labels), "shape": [l, l], "scope_size": scope_size}
    return ctx.payload("confusion_grid", params, groups=groups, meta=meta)


# -- pairwise consensus ----------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _agreement_query(classifier_a: str, classifier_b: str, labels: tuple[str, ...]) -> Query:
    """OR over labels of (pred(a)=L AND pred(b)=L): the textual form of 'a agrees with b'."""
    terms = [
        Combine("intersection", Predicted(classifier_a, lab), Predicted(classifier_b, lab))
        for lab in labels
    ]
    node = terms[0]
    for term in terms[1:]:
        node = Combine("union", node, term)
    return node


def pairwise_consensus(
    dataset: ExperimentDataset,
    state: SelectionState,
    version: int = 0,
    small_threshold: float = DEFAULT_SMALL_THRESHOLD,
) -> dict:
    """m x m agreement matrix; off-diagonal cells split into correct/incorrect halves."""
    if dataset.m < 2:
        raise TooFewClassifiers("pairwise consensus needs at least two compared classifiers")
    ctx = _ViewContext(dataset, state, version)
    names = dataset.compared
    labels = dataset.labels.labels
    scope_size = len(ctx.scope)

    groups = []
    for a in names:
        for b in names:
            if a == b:
                box = ctx.box_from_words(Scope(ctx.state.scope), ctx.scope_words, part="all")
                cell = {"row": a, "col": b, "total": scope_size, "boxes": [box]}
                _flag_boxes(cell["boxes"], scope_size, small_threshold)
                groups.append(cell)
                continue
            agree = dataset.agree_words(a, b) & ctx.scope_words
            agree_correct = agree & dataset.correct_words(a)  # agreeing and correct => both correct
            agree_incorrect = agree & ~dataset.correct_words(a)
            agree_q = _agreement_query(a, b, labels)
            correct_q = Combine("intersection", ClassifierCorrect(a), ClassifierCorrect(b))
            incorrect_q = Combine("intersection", agree_q, ClassifierIncorrect(a))
            boxes = [
                ctx.box_from_words(correct_q, agree_correct, part="agree_correct"),
                ctx.box_from_words(incorrect_q, agree_incorrect, part="agree_incorrect"),
            ]
            total = int(K.popcount(agree))
            _flag_boxes(boxes, total, small_threshold)
            groups.append({"row": a, "col": b, "total": total, "boxes": boxes})

    params = {"small_threshold": small_threshold}
    meta = {"classifiers": list(names), "shape": [len(names), len(names)], "scope_size": scope_size}
    return ctx.payload("pairwise_consensus", params, groups=groups, meta=meta)


# -- selection performance ----------------------------------------------------------------


def selection_performance(
    dataset: ExperimentDataset,
    state: SelectionState,
    version: int = 0,
    metric_kind: str = "accuracy",
) -> dict:
    """Per-classifier metric on each populated selection (within scope). Not boxes."""
    if metric_kind not in METRIC_KINDS:
        raise SchemaViolation(f"unknown metric {metric_kind!r}", "metric")
    if state.first is None and state.second is None:
        raise MissingSelection("selection performance needs at least one selection")
    ctx = _ViewContext(dataset, state, version)

    subsets = {}
    for slot_name in ("first", "second"):
        slot = getattr(state, slot_name)
        if slot is not None:
            subsets[slot_name] = InstanceSet(dataset.n, slot.set.words & ctx.scope_words)

    groups = []
    for name in dataset.compared:
        row = {"classifier": name, "first": None, "second": None}
        for slot_name, subset in subsets.items():
            value = metric(confusion(dataset, name, subset), metric_kind)
            row[slot_name] = _metric_json(value)
        groups.append(row)

    params = {"metric": metric_kind}
    meta = {
        "selection_sizes": {k: len(v) for k, v in subsets.items()},
        "scope_size": len(ctx.scope),
    }
    return ctx.payload("selection_performance", params, groups=groups, meta=meta)


# -- per-class performance ---------------------------------------------------------------


def per_class_performance(
    dataset: ExperimentDataset,
    state: SelectionState,
    version: int = 0,
    metric_kind: str = "accuracy",
    small_threshold: float = DEFAULT_SMALL_THRESHOLD,
) -> dict:
    """Classifier x actual-class grid; cells are boxes when the metric is a count ratio."""
    if metric_kind not in METRIC_KINDS:
        raise SchemaViolation(f"unknown metric {metric_kind!r}", "metric")
    ctx = _ViewContext(dataset, state, version)
    l = dataset.l
    labels = dataset.labels.labels
    decomposable = metric_kind in COUNT_RATIO_KINDS

    groups = []
    for name in dataset.compared:
        codes = (dataset.actual.astype(np.int64) * 2 + (dataset.prediction_column(name) == dataset.actual)).astype(np.int32)
        counts, first, second = ctx.triple_bincount(codes, 2 * l)
        matrix = confusion(dataset, name, ctx.scope)
        cells = []
        boxes = []
        for cid, label in enumerate(labels):
            value = metric(matrix, metric_kind, cid)
            tp_triplet = (int(counts[2 * cid + 1]), int(first[2 * cid + 1]), int(second[2 * cid + 1]))
            fn_triplet = (int(counts[2 * cid]), int(first[2 * cid]), int(second[2 * cid]))
            cells.append({"class": label, "value": value.value, "defined": value.defined})
            if not decomposable:
                continue
            box, denominator = _per_class_box(
                dataset, name, metric_kind, label, matrix, tp_triplet, fn_triplet, ctx
            )
            box["class"] = label
            box["denominator"] = denominator
            box["small_flag"] = _small_flag(box["count"], denominator, small_threshold)
            boxes.append(box)
        groups.append({"classifier": name, "cells": cells, "boxes": boxes})

    params = {"metric": metric_kind, "small_threshold": small_threshold}
    meta = {"labels": list(labels), "decomposable": decomposable, "scope_size": len(ctx.scope)}
    return ctx.payload("per_class_performance", params, groups=groups, meta=meta)


def _per_class_box(dataset, name, metric_kind, label, matrix, tp_triplet, fn_triplet, ctx):
    cid = dataset.labels.index(label)
    tp, tp_first, tp_second = tp_triplet
    fn, fn_first, fn_second = fn_triplet
    if metric_kind in ("accuracy", "recall"):
        query = Combine("intersection", Actual(label), ClassifierCorrect(name))
        return ctx.box(query, tp, tp_first, tp_second), tp + fn
    if metric_kind == "error_rate":
        query = Combine("intersection", Actual(label), ClassifierIncorrect(name))
        return ctx.box(query, fn, fn_first, fn_second), tp + fn
    # precision: numerator is the same tp set, universe is the predicted column
    query = Combine("intersection", Predicted(name, label), Actual(label))
    predicted_total = int(matrix.counts[:, cid].sum())
    return ctx.box(query, tp, tp_first, tp_second), predicted_total


# -- metric tables --------------------------------------------------------------------------


def _metric_rows(dataset: ExperimentDataset, ctx: _ViewContext) -> list[dict]:
    rows = []
    for name in dataset.compared:
        matrix = confusion(dataset, name, ctx.scope)
        rows.append(
            {
                "classifier": name,
                "metrics": {kind: _metric_json(metric(matrix, kind)) for kind in METRIC_KINDS},
            }
        )
    return rows


def metrics_table(dataset: ExperimentDataset, state: SelectionState, version: int = 0) -> dict:
    """The plain many-metrics table, one row per compared classifier."""
    ctx = _ViewContext(dataset, state, version)
    rows = _metric_rows(dataset, ctx)
    meta = {"metric_kinds": list(METRIC_KINDS), "scope_size": len(ctx.scope)}
    return ctx.payload("metrics", {}, groups=rows, meta=meta)


def parallel_metrics(
    dataset: ExperimentDataset,
    state: SelectionState,
    version: int = 0,
    order_by: str = "accuracy",
) -> dict:
    """Metric table plus a rank ordering of classifiers by one chosen metric."""
    if order_by not in METRIC_KINDS:
        raise SchemaViolation(f"unknown metric {order_by!r}", "order_by")
    ctx = _ViewContext(dataset, state, version)
    rows = _metric_rows(dataset, ctx)

    def sort_key(item):
        index, row = item
        cell = row["metrics"][order_by]
        if cell["defined"]:
            return (0, -cell["value"], index)
        return (1, 0.0, index)  # undefined ranked last, stable

    ordered = sorted(enumerate(rows), key=sort_key)
    for rank, (index, _) in enumerate(ordered, start=1):
        rows[index]["rank"] = rank
    ranking = [rows[index]["classifier"] for index, _ in ordered]

    params = {"order_by": order_by}
    meta = {"metric_kinds": list(METRIC_KINDS), "ranking": ranking, "scope_size": len(ctx.scope)}
    return ctx.payload("parallel_metrics", params, groups=rows, meta=meta)


# -- selection controls ----------------------------------------------------------------------


def selection_controls(dataset: ExperimentDataset, state: SelectionState, version: int = 0) -> dict:
    """State of the two selections: descriptions, cardinalities, the four
    relationship regions (each with a composable query), and the history."""
    ctx = _ViewContext(dataset, state, version)

    def slot_info(slot):
        if slot is None:
            return None
        return {
            "description": slot.description,
            "cardinality": len(slot.set),
            "cardinality_in_scope": slot.set.intersect_count(ctx.scope),
        }

    relationship = None
    if state.first is not None and state.second is not None:
        rel = state.relationship()
        relationship = {
            name: {"count": region.count, "query_text": region.description}
            for name, region in (
                ("only_first", rel.only_first),
                ("both", rel.both),
                ("only_second", rel.only_second),
                ("neither", rel.neither),
            )
        }

    body = {
        "scope": state.scope,
        "first": slot_info(state.first),
        "second": slot_info(state.second),
        "relationship": relationship,
        "history": [slot.description for slot in state.history],
        "meta": {"scope_size": len(ctx.scope)},
    }
    return ctx.payload("selection_controls", {}, **body)


# -- instance list ---------------------------------------------------------------------------


def _sort_order(dataset: ExperimentDataset, indices: np.ndarray, sort_key: str | None) -> np.ndarray:
    if not sort_key or sort_key in ("index", "+index"):
        return indices
    descending = sort_key.startswith("-")
    key = sort_key.lstrip("+-")
    if key == "index":
        column = indices
    elif key == "id":
        column = np.array([dataset.instance_ids[i] for i in indices])
    elif key == "actual":
        column = dataset.actual[indices]
    elif key in dataset.predictions:
        column = dataset.predictions[key][indices]
    else:
        schema = dataset.feature(key)  # raises UnknownFeature for anything else
        column = dataset.feature_columns[schema.name][indices]
    order = np.argsort(column, kind="stable")
    if descending:
        order = order[::-1]
    return indices[order]


def instance_list(
    dataset: ExperimentDataset,
    state: SelectionState,
    version: int = 0,
    offset: int = 0,
    limit: int = 50,
    sort: str | None = None,
    filter: str | None = None,
) -> dict:
    """Paged rows of first ∪ second (within scope) with membership flags."""
    if state.first is None and state.second is None:
        raise MissingSelection("instance list needs at least one selection")
    if offset < 0 or limit < 0:
        raise InvalidPage(f"offset/limit must be non-negative, got {offset}/{limit}")
    ctx = _ViewContext(dataset, state, version)

    union = K.zeros(dataset.n)
    if ctx.first_scoped is not None:
        union = union | ctx.first_scoped
    if ctx.second_scoped is not None:
        union = union | ctx.second_scoped
    filter_query = None
    if filter:
        filter_query = parse(filter)
        union = union & evaluate(filter_query, dataset, state.scope).words

    indices = K.members(union, dataset.n)
    total = int(indices.size)
    ordered = _sort_order(dataset, indices, sort)
    page = ordered[offset : offset + limit]

    first_set = state.first.set if state.first is not None else None
    second_set = state.second.set if state.second is not None else None
    rows = []
    for i in (int(x) for x in page):
        features = {}
        for schema in dataset.features:
            raw = dataset.feature_columns[schema.name][i]
            if schema.kind == "continuous":
                features[schema.name] = None if np.isnan(raw) else float(raw)
            else:
                features[schema.name] = None if raw < 0 else schema.categories[int(raw)]
        rows.append(
            {
                "index": i,
                "id": dataset.instance_ids[i],
                "in_first": bool(first_set is not None and i in first_set),
                "in_second": bool(second_set is not None and i in second_set),
                "split": "test" if dataset.split_flags[i] else "train",
                "actual": dataset.labels.name(int(dataset.actual[i])),
                "predictions": {
                    name: dataset.labels.name(int(dataset.predictions[name][i]))
                    for name in dataset.classifiers
                },
                "features": features,
            }
        )

    params = {"offset": offset, "limit": limit, "sort": sort, "filter": filter}
    meta = {"total_count": total, "scope_size": len(ctx.scope)}
    return ctx.payload("instance_list", params, rows=rows, meta=meta)


# -- registry ------------------------------------------------------------------------------

# kind -> (builder, {param: (coercer, default)}); REQUIRED marks mandatory params
REQUIRED = object()


def _bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise SchemaViolation(f"bad boolean {value!r}")


def _float_or_none(value):
    return None if value is None or value == "" else float(value)


def _str_or_none(value):
    return None if value is None or value == "" else str(value)


VIEWS: dict[str, tuple] = {
    "classifier_performance": (
        classifier_performance,
        {
            "metric_kind": (str, "accuracy"),
            "sort": (str, "none"),
            "class_label": (_str_or_none, None),
            "small_threshold": (float, DEFAULT_SMALL_THRESHOLD),
        },
    ),
    "histogram": (
        histogram,
        {
            "feature": (str, REQUIRED),
            "bins": (int, DEFAULT_BINS),
            "lo": (_float_or_none, None),
            "hi": (_float_or_none, None),
            "normalize": (_bool, False),
            "sort": (str, "natural"),
            "small_threshold": (float, DEFAULT_SMALL_THRESHOLD),
        },
    ),
    "cumulative_accuracy": (
        cumulative_accuracy,
        {"direction": (str, "up"), "small_threshold": (float, DEFAULT_SMALL_THRESHOLD)},
    ),
    "confusion_grid": (
        confusion_grid,
        {"small_threshold": (float, DEFAULT_SMALL_THRESHOLD)},
    ),
    "pairwise_consensus": (
        pairwise_consensus,
        {"small_threshold": (float, DEFAULT_SMALL_THRESHOLD)},
    ),
    "selection_performance": (
        selection_performance,
        {"metric_kind": (str, "accuracy")},
    ),
    "per_class_performance": (
        per_class_performance,
        {"metric_kind": (str, "accuracy"), "small_threshold": (float, DEFAULT_SMALL_THRESHOLD)},
    ),
    "metrics": (metrics_table, {}),
    "parallel_metrics": (parallel_metrics, {"order_by": (str, "accuracy")}),
    "selection_controls": (selection_controls, {}),
    "instance_list": (
        instance_list,
        {
            "offset": (int, 0),
            "limit": (int, 50),
            "sort": (_str_or_none, None),
            "filter": (_str_or_none, None),
        },
    ),
}

# user-facing aliases accepted by the CLI and the service
_PARAM_ALIASES = {"metric": "metric_kind"}
VIEW_KINDS = tuple(VIEWS)


def coerce_view_params(kind: str, raw: dict) -> dict:
    """Normalize raw (possibly string-typed) params for a view kind.

    Shared by the CLI, the script runner, and the HTTP service so all three
    produce identical payloads for identical inputs.
    """
    if kind not in VIEWS:
        raise UnknownView(f"unknown view kind {kind!r}; expected one of {sorted(VIEWS)}")
    _, spec = VIEWS[kind]
    params = {}
    for key, value in raw.items():
        key = _PARAM_ALIASES.get(key, key)
        if key not in spec:
            raise SchemaViolation(f"view {kind!r} does not take parameter {key!r}", key)
        coerce, _ = spec[key]
        try:
            params[key] = coerce(value)
        except (TypeError, ValueError) as exc:
            raise SchemaViolation(f"bad value for {key!r}: {exc}", key) from None
    for key, (_, default) in spec.items():
        if key not in params:
            if default is REQUIRED:
                raise SchemaViolation(f"view {kind!r} requires parameter {key!r}", key)
            params[key] = default
    return params


def build_view(
    dataset: ExperimentDataset,
    state: SelectionState,
    kind: str,
    raw_params: dict | None = None,
    version: int = 0,
) -> dict:
    params = coerce_view_params(kind, raw_params or {})
    builder, _ = VIEWS[kind]
    return builder(dataset, state, version=version, **params)
