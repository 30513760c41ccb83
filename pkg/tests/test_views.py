import numpy as np
import pytest

from clfbox.dataset import load_manifest
from clfbox.errors import (
    InvalidPage,
    MissingSelection,
    SchemaViolation,
    TooFewClassifiers,
    UnknownView,
)
from clfbox.query import evaluate, parse
from clfbox.selection import SelectionState
from clfbox import views
from clfbox.views import build_view, coerce_view_params, payload_json

from conftest import FIXTURE6_MANIFEST
from gen import random_dataset, random_query


def fresh_state(ds, first=None, second=None, scope="all"):
    st = SelectionState(ds)
    st.set_scope(scope)
    if first:
        st.set_slot("first", parse(first))
    if second:
        st.set_slot("second", parse(second))
    return st


def boxes_of(payload, group=0):
    return payload["groups"][group]["boxes"]


# -- classifier performance ---------------------------------------------------


def test_performance_bars_fixture(fixture6):
    payload = views.classifier_performance(fixture6, fresh_state(fixture6))
    bars = {g["classifier"]: [b["count"] for b in g["boxes"]] for g in payload["groups"]}
    assert bars == {"c1": [4, 2], "c2": [5, 1]}
    for g in payload["groups"]:
        assert sum(b["count"] for b in g["boxes"]) == payload["meta"]["scope_size"]


def test_performance_overlaps_with_first_selection(fixture6):
    st = fresh_state(fixture6, first="correct(c1)")
    payload = views.classifier_performance(fixture6, st)
    correct_boxes = {g["classifier"]: g["boxes"][0] for g in payload["groups"]}
    assert correct_boxes["c1"]["overlap_first"] == 4
    assert correct_boxes["c2"]["overlap_first"] == 3


def test_performance_gold_standard_excluded():
    manifest = dict(FIXTURE6_MANIFEST, gold_standard="c1")
    ds = load_manifest(manifest)
    payload = views.classifier_performance(ds, fresh_state(ds))
    assert [g["classifier"] for g in payload["groups"]] == ["c2"]


def test_performance_sort_by_value(fixture6):
    payload = views.classifier_performance(fixture6, fresh_state(fixture6), sort="value")
    assert [g["classifier"] for g in payload["groups"]] == ["c2", "c1"]


def test_performance_nondecomposable_reports_values_without_boxes(fixture6):
    payload = views.classifier_performance(fixture6, fresh_state(fixture6), metric_kind="mcc")
    assert payload["meta"]["decomposable"] is False
    for g in payload["groups"]:
        assert g["boxes"] == [] and g["defined"]


def test_performance_per_class_recall_boxes(fixture6):
    payload = views.classifier_performance(
        fixture6, fresh_state(fixture6), metric_kind="recall", class_label="B"
    )
    assert payload["meta"]["decomposable"] is True
    g = payload["groups"][0]  # c1: both B instances predicted B
    assert g["value"] == 1.0
    assert [b["count"] for b in g["boxes"]] == [2, 0]
    assert g["total"] == 2


def test_performance_box_queries_reproduce_counts(fixture6):
    st = fresh_state(fixture6, first="actual=A", second="incorrect(c2)", scope="train")
    payload = views.classifier_performance(fixture6, st)
    scope = fixture6.scope_set("train")
    for g in payload["groups"]:
        for box in g["boxes"]:
            subset = evaluate(parse(box["query_text"]), fixture6, "train") & scope
            assert box["count"] == len(subset)
            assert box["overlap_first"] == len(subset & st.first.set & scope)
            assert box["overlap_second"] == len(subset & st.second.set & scope)


# -- histogram ------------------------------------------------------------------


def test_histogram_two_bins(fixture6):
    payload = views.histogram(fixture6, fresh_state(fixture6), feature="score", bins=2)
    assert [b["count"] for b in boxes_of(payload)] == [4, 2]
    assert payload["meta"]["bin_edges"] == [0.1, 0.55, 1.0]
    assert [b["bin"] for b in boxes_of(payload)] == ["[0.1,0.55)", "[0.55,1.0]"]


def test_histogram_bin_queries_reproduce_counts(fixture6):
    payload = views.histogram(fixture6, fresh_state(fixture6), feature="score", bins=3)
    scope = fixture6.scope_set("all")
    total = 0
    for box in boxes_of(payload):
        got = evaluate(parse(box["query_text"]), fixture6) & scope
        assert len(got) == box["count"]
        total += box["count"]
    assert total == payload["groups"][0]["total"]


def test_histogram_actual_pseudo_feature(fixture6):
    payload = views.histogram(fixture6, fresh_state(fixture6), feature="actual")
    assert {b["bin"]: b["count"] for b in boxes_of(payload)} == {"A": 2, "B": 2, "C": 2}
    assert boxes_of(payload)[0]["query_text"] == "actual=A"


def test_histogram_predicted_pseudo_feature(fixture6):
    payload = views.histogram(fixture6, fresh_state(fixture6), feature="pred:c1")
    assert {b["bin"]: b["count"] for b in boxes_of(payload)} == {"A": 2, "B": 3, "C": 1}


def test_histogram_categorical_sort_by_count(fixture6):
    payload = views.histogram(fixture6, fresh_state(fixture6), feature="pred:c1", sort="count")
    assert [b["count"] for b in boxes_of(payload)] == [3, 2, 1]


def test_histogram_normalize_fractions(fixture6):
    st = fresh_state(fixture6, first="ids{0,1}")
    payload = views.histogram(
        fixture6, st, feature="score", bins=2, normalize=True
    )
    box = boxes_of(payload)[0]  # count 4, overlap_first 2
    assert box["count"] == 4 and box["overlap_first"] == 2
    assert box["overlap_first_fraction"] == 0.5
    assert box["fraction"] == pytest.approx(4 / 6)


def test_histogram_empty_scope_returns_empty_payload():
    manifest = dict(FIXTURE6_MANIFEST)
    ds = load_manifest(manifest)
    st = fresh_state(ds, scope="test")
    payload = views.histogram(ds, st, feature="score", bins=2)
    assert payload["groups"][0]["total"] == 2  # sanity: test split has values
    # now a scope with no instances: filter to train on an all-test dataset
    manifest = dict(FIXTURE6_MANIFEST)
    manifest["data"] = dict(manifest["data"], split=["test"] * 6)
    ds2 = load_manifest(manifest)
    payload = views.histogram(ds2, fresh_state(ds2, scope="train"), feature="score")
    assert payload["groups"] == []


def test_histogram_missing_values_excluded():
    manifest = dict(FIXTURE6_MANIFEST)
    manifest["data"] = dict(manifest["data"], score=[0.1, None, 0.35, 0.5, 0.9, 1.0])
    ds = load_manifest(manifest)
    payload = views.histogram(ds, fresh_state(ds), feature="score", bins=2)
    assert payload["groups"][0]["total"] == 5
    assert payload["meta"]["missing_in_scope"] == 1


def test_histogram_constant_feature_single_bin():
    manifest = dict(FIXTURE6_MANIFEST)
    manifest["data"] = dict(manifest["data"], score=[0.5] * 6)
    ds = load_manifest(manifest)
    payload = views.histogram(ds, fresh_state(ds), feature="score", bins=4)
    assert [b["count"] for b in boxes_of(payload)] == [6]


def test_histogram_small_flag(fixture6):
    rng = np.random.default_rng(0)
    ds = random_dataset(rng, n=200, m=1, l=2)
    st = fresh_state(ds)
    payload = views.histogram(ds, st, feature="cat one", small_threshold=0.5)
    for box in boxes_of(payload):
        total = payload["groups"][0]["total"]
        assert box["small_flag"] == (0 < box["count"] < 0.5 * total)


# -- cumulative accuracy -----------------------------------------------------------


def test_cumulative_fixture(fixture6):
    payload = views.cumulative_accuracy(fixture6, fresh_state(fixture6))
    assert [b["count"] for b in boxes_of(payload)] == [0, 3, 3]
    assert payload["meta"]["pareto"] == [0.0, 0.5, 1.0]
    assert [b["query_text"] for b in boxes_of(payload)] == ["ncorrect=0", "ncorrect=1", "ncorrect=2"]


def test_cumulative_sums_to_scope(fixture6):
    for scope in ("train", "test", "all"):
        payload = views.cumulative_accuracy(fixture6, fresh_state(fixture6, scope=scope))
        assert sum(b["count"] for b in boxes_of(payload)) == payload["meta"]["scope_size"]


def test_cumulative_all_perfect():
    manifest = {
        "labels": ["a", "b"],
        "features": [{"name": "x", "kind": "continuous"}],
        "classifiers": ["c1", "c2"],
        "data": {
            "id": ["1", "2"],
            "split": ["train", "test"],
            "actual": ["a", "b"],
            "x": [0.0, 1.0],
            "c1": ["a", "b"],
            "c2": ["a", "b"],
        },
    }
    ds = load_manifest(manifest)
    payload = views.cumulative_accuracy(ds, fresh_state(ds))
    counts = [b["count"] for b in boxes_of(payload)]
    assert counts == [0, 0, 2]


def test_cumulative_pareto_down(fixture6):
    payload = views.cumulative_accuracy(fixture6, fresh_state(fixture6), direction="down")
    assert payload["meta"]["pareto"] == [1.0, 1.0, 0.5]


# -- confusion grid ------------------------------------------------------------------


def test_grid_matches_confusion(fixture6):
    from clfbox.metrics import confusion

    payload = views.confusion_grid(fixture6, fresh_state(fixture6))
    g1 = payload["groups"][0]
    matrix = confusion(fixture6, "c1", fixture6.scope_set("all"))
    got = np.array([b["count"] for b in g1["boxes"]]).reshape(3, 3)
    assert np.array_equal(got, matrix.counts)


def test_grid_diagonal_union_is_correct_set(fixture6):
    payload = views.confusion_grid(fixture6, fresh_state(fixture6))
    g1 = payload["groups"][0]
    l = fixture6.l
    union = None
    for i in range(l):
        q = parse(g1["boxes"][i * l + i]["query_text"])
        s = evaluate(q, fixture6)
        union = s if union is None else (union | s)
    from clfbox.metrics import correct_set

    assert union == correct_set(fixture6, "c1", fixture6.scope_set("all"))


def test_grid_empty_scope():
    manifest = dict(FIXTURE6_MANIFEST)
    manifest["data"] = dict(manifest["data"], split=["test"] * 6)
    ds = load_manifest(manifest)
    payload = views.confusion_grid(ds, fresh_state(ds, scope="train"))
    assert all(b["count"] == 0 for g in payload["groups"] for b in g["boxes"])


# -- pairwise consensus ----------------------------------------------------------------


def test_consensus_fixture(fixture6):
    payload = views.pairwise_consensus(fixture6, fresh_state(fixture6))
    cells = {(g["row"], g["col"]): g for g in payload["groups"]}
    assert cells[("c1", "c2")]["boxes"][0]["count"] == 3  # agree-correct
    assert cells[("c1", "c2")]["boxes"][1]["count"] == 0  # agree-incorrect
    assert cells[("c1", "c1")]["total"] == 6
    assert cells[("c1", "c2")]["total"] == cells[("c2", "c1")]["total"]


def test_consensus_identical_classifiers():
    manifest = dict(FIXTURE6_MANIFEST)
    manifest["data"] = dict(manifest["data"], c2=manifest["data"]["c1"])
    ds = load_manifest(manifest)
    payload = views.pairwise_consensus(ds, fresh_state(ds))
    cells = {(g["row"], g["col"]): g for g in payload["groups"]}
    assert cells[("c1", "c2")]["total"] == 6


def test_consensus_box_queries_reproduce_counts(fixture6):
    st = fresh_state(fixture6, first="actual=A")
    payload = views.pairwise_consensus(fixture6, st)
    scope = fixture6.scope_set("all")
    for g in payload["groups"]:
        for box in g["boxes"]:
            got = evaluate(parse(box["query_text"]), fixture6) & scope
            assert len(got) == box["count"], box["query_text"]


def test_consensus_needs_two():
    rng = np.random.default_rng(1)
    ds = random_dataset(rng, n=10, m=1)
    with pytest.raises(TooFewClassifiers):
        views.pairwise_consensus(ds, fresh_state(ds))


# -- selection performance ----------------------------------------------------------------


def test_selection_performance_own_correct_set(fixture6):
    st = fresh_state(fixture6, first="correct(c1)")
    payload = views.selection_performance(fixture6, st)
    rows = {g["classifier"]: g for g in payload["groups"]}
    assert rows["c1"]["first"]["value"] == 1.0


def test_selection_performance_on_c1_errors(fixture6):
    st = fresh_state(fixture6, first="incorrect(c1)")
    payload = views.selection_performance(fixture6, st)
    rows = {g["classifier"]: g for g in payload["groups"]}
    assert rows["c2"]["first"]["value"] == 1.0
    assert rows["c1"]["first"]["value"] == 0.0


def test_selection_performance_requires_selection(fixture6):
    with pytest.raises(MissingSelection):
        views.selection_performance(fixture6, fresh_state(fixture6))


def test_selection_performance_empty_selection_undefined(fixture6):
    st = fresh_state(fixture6, first="ids{}")
    payload = views.selection_performance(fixture6, st)
    assert all(not g["first"]["defined"] for g in payload["groups"])


# -- per-class performance ---------------------------------------------------------------


def test_per_class_recall_fixture(fixture6):
    payload = views.per_class_performance(fixture6, fresh_state(fixture6))
    g1 = payload["groups"][0]
    values = {c["class"]: c["value"] for c in g1["cells"]}
    assert values["B"] == 1.0


def test_per_class_absent_class_undefined(fixture6):
    payload = views.per_class_performance(fixture6, fresh_state(fixture6, scope="test"))
    g1 = payload["groups"][0]
    cells = {c["class"]: c for c in g1["cells"]}
    assert not cells["A"]["defined"] and not cells["B"]["defined"]
    assert cells["C"]["defined"]


def test_per_class_macro_mean_matches_metrics_engine(fixture6):
    from clfbox.metrics import confusion, metric

    payload = views.per_class_performance(fixture6, fresh_state(fixture6), metric_kind="recall")
    g1 = payload["groups"][0]
    defined = [c["value"] for c in g1["cells"] if c["defined"]]
    macro = metric(confusion(fixture6, "c1", fixture6.scope_set("all")), "recall")
    assert sum(defined) / len(defined) == pytest.approx(macro.value, abs=1e-15)


def test_per_class_boxes_reproduce_counts(fixture6):
    st = fresh_state(fixture6, first="correct(c2)")
    payload = views.per_class_performance(fixture6, st, metric_kind="precision")
    for g in payload["groups"]:
        for box in g["boxes"]:
            got = evaluate(parse(box["query_text"]), fixture6) & fixture6.scope_set("all")
            assert len(got) == box["count"]


# -- metric tables --------------------------------------------------------------------------


def test_parallel_metrics_ordering(fixture6):
    payload = views.parallel_metrics(fixture6, fresh_state(fixture6), order_by="accuracy")
    assert payload["meta"]["ranking"] == ["c2", "c1"]
    ranks = {g["classifier"]: g["rank"] for g in payload["groups"]}
    assert ranks == {"c2": 1, "c1": 2}


def test_parallel_metrics_single_classifier():
    rng = np.random.default_rng(2)
    ds = random_dataset(rng, n=15, m=1)
    payload = views.parallel_metrics(ds, fresh_state(ds))
    assert [g["rank"] for g in payload["groups"]] == [1]


def test_ranks_are_a_permutation():
    rng = np.random.default_rng(3)
    ds = random_dataset(rng, n=50, m=4)
    payload = views.parallel_metrics(ds, fresh_state(ds), order_by="mcc")
    assert sorted(g["rank"] for g in payload["groups"]) == [1, 2, 3, 4]


def test_metrics_table_values(fixture6):
    payload = views.metrics_table(fixture6, fresh_state(fixture6))
    rows = {g["classifier"]: g["metrics"] for g in payload["groups"]}
    assert rows["c1"]["accuracy"]["value"] == pytest.approx(4 / 6)
    assert rows["c2"]["accuracy"]["value"] == pytest.approx(5 / 6)


# -- instance list ---------------------------------------------------------------------------


def test_instance_list_first_only(fixture6):
    st = fresh_state(fixture6, first="ids{0,2,4}")
    payload = views.instance_list(fixture6, st)
    assert len(payload["rows"]) == 3
    assert all(r["in_first"] and not r["in_second"] for r in payload["rows"])


def test_instance_list_union_flags(fixture6):
    st = fresh_state(fixture6, first="correct(c1)", second="correct(c2)")
    payload = views.instance_list(fixture6, st)
    assert len(payload["rows"]) == 6
    both = [r["index"] for r in payload["rows"] if r["in_first"] and r["in_second"]]
    assert both == [0, 2, 4]


def test_instance_list_offset_beyond_union(fixture6):
    st = fresh_state(fixture6, first="correct(c1)")
    payload = views.instance_list(fixture6, st, offset=10, limit=5)
    assert payload["rows"] == []
    assert payload["meta"]["total_count"] == 4


def test_instance_list_sort_and_filter(fixture6):
    st = fresh_state(fixture6, first="correct(c1)", second="correct(c2)")
    payload = views.instance_list(fixture6, st, sort="-score", filter="actual=A")
    assert [r["index"] for r in payload["rows"]] == [1, 0]
    assert payload["meta"]["total_count"] == 2


def test_instance_list_requires_selection(fixture6):
    with pytest.raises(MissingSelection):
        views.instance_list(fixture6, fresh_state(fixture6))


def test_instance_list_invalid_page(fixture6):
    st = fresh_state(fixture6, first="correct(c1)")
    with pytest.raises(InvalidPage):
        views.instance_list(fixture6, st, offset=-1)


def test_instance_list_row_contents(fixture6):
    st = fresh_state(fixture6, first="ids{5}")
    row = views.instance_list(fixture6, st)["rows"][0]
    assert row == {
        "index": 5,
        "id": "i5",
        "in_first": True,
        "in_second": False,
        "split": "test",
        "actual": "C",
        "predictions": {"c1": "A", "c2": "C"},
        "features": {"score": 1.0, "size": "large"},
    }


# -- registry / params ------------------------------------------------------------------------


def test_build_view_coerces_string_params(fixture6):
    st = fresh_state(fixture6)
    payload = build_view(fixture6, st, "histogram", {"feature": "score", "bins": "2", "normalize": "true"})
    assert payload["params"]["bins"] == 2 and payload["params"]["normalize"] is True


def test_param_alias_metric(fixture6):
    payload = build_view(fixture6, st := fresh_state(fixture6), "classifier_performance", {"metric": "error_rate"})
    assert payload["params"]["metric"] == "error_rate"


def test_unknown_view_and_params(fixture6):
    with pytest.raises(UnknownView):
        coerce_view_params("nope", {})
    with pytest.raises(SchemaViolation):
        coerce_view_params("histogram", {"feature": "score", "bogus": "1"})
    with pytest.raises(SchemaViolation):
        coerce_view_params("histogram", {})  # feature required


def test_payload_json_is_canonical(fixture6):
    st = fresh_state(fixture6, first="correct(c1)")
    a = payload_json(views.cumulative_accuracy(fixture6, st))
    b = payload_json(views.cumulative_accuracy(fixture6, st))
    assert a == b and a.count(" ") == 0


# -- cross-view invariants on random data ---------------------------------------------------


def check_view_invariants(ds, st):
    """Shared invariant assertions; also used by the acceptance suite."""
    scope_size = len(st.scope_set())
    first_size = st.first.set.intersect_count(st.scope_set()) if st.first else 0
    second_size = st.second.set.intersect_count(st.scope_set()) if st.second else 0

    def check_box(box, group_total):
        assert box["overlap_first"] <= min(box["count"], first_size) if st.first else box["overlap_first"] == 0
        assert box["overlap_second"] <= min(box["count"], second_size) if st.second else box["overlap_second"] == 0
        assert box["small_flag"] == (
            0 < box["count"] and group_total > 0 and box["count"] / group_total < 0.02
        )

    perf = views.classifier_performance(ds, st)
    for g in perf["groups"]:
        assert sum(b["count"] for b in g["boxes"]) == scope_size
        for b in g["boxes"]:
            check_box(b, g["total"])

    cum = views.cumulative_accuracy(ds, st)
    assert sum(b["count"] for b in cum["groups"][0]["boxes"]) == scope_size
    pareto = cum["meta"]["pareto"]
    assert all(pareto[i] <= pareto[i + 1] + 1e-15 for i in range(len(pareto) - 1))
    if scope_size:
        assert pareto[-1] == pytest.approx(1.0, abs=1e-12)
    for b in cum["groups"][0]["boxes"]:
        check_box(b, scope_size)

    hist = views.histogram(ds, st, feature="x1", bins=5)
    if hist["groups"]:
        g = hist["groups"][0]
        assert sum(b["count"] for b in g["boxes"]) == g["total"]
        assert g["total"] + hist["meta"]["missing_in_scope"] == scope_size
        for b in g["boxes"]:
            check_box(b, g["total"])

    grid = views.confusion_grid(ds, st)
    for g in grid["groups"]:
        assert sum(b["count"] for b in g["boxes"]) == scope_size
        for b in g["boxes"]:
            check_box(b, scope_size)

    if ds.m >= 2:
        cons = views.pairwise_consensus(ds, st)
        cells = {(g["row"], g["col"]): g for g in cons["groups"]}
        for (a, b), cell in cells.items():
            if a == b:
                assert cell["total"] == scope_size
            else:
                mirror = cells[(b, a)]
                assert cell["total"] == mirror["total"]
                assert [x["count"] for x in cell["boxes"]] == [x["count"] for x in mirror["boxes"]]
                assert sum(x["count"] for x in cell["boxes"]) == cell["total"]
            for x in cell["boxes"]:
                check_box(x, cell["total"])

    if st.first or st.second:
        rel_sum = None
        if st.first and st.second:
            rel = st.relationship()
            rel_sum = sum(rel.counts().values())
            assert rel_sum == scope_size


def test_view_invariants_random_sample():
    rng = np.random.default_rng(99)
    for _ in range(15):
        ds = random_dataset(rng, missing=True)
        st = SelectionState(ds)
        st.set_scope(str(rng.choice(["train", "test", "all"])))
        if rng.random() < 0.8:
            st.set_slot("first", random_query(rng, ds))
        if rng.random() < 0.8:
            st.set_slot("second", random_query(rng, ds))
        check_view_invariants(ds, st)
