import copy
import json

import numpy as np
import pytest

from clfbox.dataset import load_dataset, load_manifest, validate
from clfbox.errors import (
    DuplicateInstanceId,
    LabelOutOfVocabulary,
    LengthMismatch,
    MissingFile,
    SchemaViolation,
    UnknownClassifier,
    UnknownFeature,
    UnknownLabel,
)
from conftest import FIXTURE6_MANIFEST

MINIMAL = {
    "labels": ["yes", "no"],
    "features": [{"name": "x", "kind": "continuous"}],
    "classifiers": ["c"],
    "data": {
        "id": ["a", "b"],
        "split": ["train", "test"],
        "actual": ["yes", "no"],
        "x": [1.0, 2.0],
        "c": ["yes", "yes"],
    },
}


def manifest_variant(**changes):
    manifest = copy.deepcopy(MINIMAL)
    manifest.update(changes)
    return manifest


def test_minimal_manifest():
    ds = load_manifest(MINIMAL)
    assert (ds.n, ds.m, ds.l) == (2, 1, 2)
    assert ds.instance_ids == ("a", "b")


def test_fixture6_field_by_field(fixture6):
    ds = fixture6
    assert (ds.n, ds.m, ds.l) == (6, 2, 3)
    assert ds.labels.labels == ("A", "B", "C")
    assert ds.classifiers == ("c1", "c2")
    assert ds.actual.tolist() == [0, 0, 1, 1, 2, 2]
    assert ds.predictions["c1"].tolist() == [0, 1, 1, 1, 2, 0]
    assert ds.predictions["c2"].tolist() == [0, 0, 1, 0, 2, 2]
    assert ds.split_flags.tolist() == [0, 0, 0, 0, 1, 1]
    assert ds.feature_columns["score"].tolist() == [0.1, 0.2, 0.35, 0.5, 0.9, 1.0]
    assert ds.feature_columns["size"].tolist() == [0, 1, 0, 1, 0, 1]


def test_l_labels_give_l_squared_confusion_cells(fixture6):
    from clfbox.metrics import confusion

    matrix = confusion(fixture6, "c1", fixture6.scope_set("all"))
    assert matrix.counts.size == fixture6.l * fixture6.l == 9


def test_reload_is_deterministic(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(FIXTURE6_MANIFEST))
    assert load_dataset(path) == load_dataset(path)


def test_missing_file(tmp_path):
    with pytest.raises(MissingFile):
        load_dataset(tmp_path / "nope.json")


def test_schema_violation_reports_path():
    bad = manifest_variant(features=[{"name": "x"}])
    with pytest.raises(SchemaViolation) as err:
        load_manifest(bad)
    assert err.value.detail_path == "features[0]"


def test_label_out_of_vocabulary():
    bad = copy.deepcopy(MINIMAL)
    bad["data"]["c"] = ["yes", "maybe"]
    with pytest.raises(LabelOutOfVocabulary) as err:
        load_manifest(bad)
    assert "maybe" in err.value.message


def test_length_mismatch():
    bad = copy.deepcopy(MINIMAL)
    bad["data"]["c"] = ["yes"]
    with pytest.raises(LengthMismatch):
        load_manifest(bad)


def test_duplicate_instance_id():
    bad = copy.deepcopy(MINIMAL)
    bad["data"]["id"] = ["a", "a"]
    with pytest.raises(DuplicateInstanceId):
        load_manifest(bad)


def test_duplicate_labels_rejected():
    with pytest.raises(SchemaViolation):
        load_manifest(manifest_variant(labels=["yes", "yes"]))


def test_single_label_rejected():
    with pytest.raises(SchemaViolation):
        load_manifest(manifest_variant(labels=["yes"]))


def test_bad_split_value():
    bad = copy.deepcopy(MINIMAL)
    bad["data"]["split"] = ["train", "val"]
    with pytest.raises(SchemaViolation) as err:
        load_manifest(bad)
    assert "split" in err.value.detail_path


def test_categorical_needs_categories():
    with pytest.raises(SchemaViolation):
        load_manifest(
            manifest_variant(features=[{"name": "x", "kind": "categorical"}])
        )


def test_unknown_category_value():
    manifest = copy.deepcopy(FIXTURE6_MANIFEST)
    manifest["data"]["size"] = ["small", "large", "small", "large", "small", "huge"]
    with pytest.raises(SchemaViolation) as err:
        load_manifest(manifest)
    assert "huge" in err.value.message


def test_csv_roundtrip(tmp_path):
    csv = tmp_path / "data.csv"
    csv.write_text(
        "id,split,actual,score,size,c1,c2\n"
        "i0,train,A,0.1,small,A,A\n"
        "i1,train,A,0.2,large,B,A\n"
        "i2,train,B,0.35,small,B,B\n"
        "i3,train,B,0.5,large,B,A\n"
        "i4,test,C,0.9,small,C,C\n"
        "i5,test,C,1.0,large,A,C\n"
    )
    manifest = copy.deepcopy(FIXTURE6_MANIFEST)
    manifest["data"] = "data.csv"
    path = tmp_path / "m.json"
    path.write_text(json.dumps(manifest))
    ds = load_dataset(path)
    inline = load_manifest(FIXTURE6_MANIFEST)
    assert ds == inline


def test_csv_header_mismatch(tmp_path):
    csv = tmp_path / "data.csv"
    csv.write_text("id,split,actual,size,score,c1,c2\ni0,train,A,small,0.1,A,A\n")
    manifest = copy.deepcopy(FIXTURE6_MANIFEST)
    manifest["data"] = "data.csv"
    path = tmp_path / "m.json"
    path.write_text(json.dumps(manifest))
    with pytest.raises(SchemaViolation):
        load_dataset(path)


def test_truncated_csv(tmp_path):
    csv = tmp_path / "data.csv"
    csv.write_text(
        "id,split,actual,score,size,c1,c2\n"
        "i0,train,A,0.1,small,A,A\n"
        "i1,train,A,0.2,large,B,A,EXTRA,EXTRA\n"
    )
    manifest = copy.deepcopy(FIXTURE6_MANIFEST)
    manifest["data"] = "data.csv"
    path = tmp_path / "m.json"
    path.write_text(json.dumps(manifest))
    with pytest.raises(LengthMismatch):
        load_dataset(path)


# -- scopes ---------------------------------------------------------------


def test_scope_sets(fixture6):
    assert len(fixture6.scope_set("all")) == 6
    assert fixture6.scope_set("test").indices().tolist() == [4, 5]
    assert fixture6.scope_set("train").indices().tolist() == [0, 1, 2, 3]


def test_scope_partition(fixture6):
    train, test = fixture6.scope_set("train"), fixture6.scope_set("test")
    assert len(train & test) == 0
    assert (train | test) == fixture6.scope_set("all")


# -- validation -------------------------------------------------------------


def test_fixture6_is_clean(fixture6):
    report = validate(fixture6)
    assert report.ok
    assert report.warnings == []


def test_empty_train_split_warning():
    manifest = copy.deepcopy(FIXTURE6_MANIFEST)
    manifest["data"]["split"] = ["test"] * 6
    report = validate(load_manifest(manifest))
    assert "empty train split" in report.warnings


def test_constant_feature_warning():
    manifest = copy.deepcopy(FIXTURE6_MANIFEST)
    manifest["data"]["score"] = [0.5] * 6
    report = validate(load_manifest(manifest))
    assert any("constant feature" in w for w in report.warnings)


def test_missing_values_warning():
    manifest = copy.deepcopy(FIXTURE6_MANIFEST)
    manifest["data"]["score"] = [0.1, None, 0.35, 0.5, 0.9, 1.0]
    ds = load_manifest(manifest)
    assert np.isnan(ds.feature_columns["score"][1])
    assert any("missing" in w for w in validate(ds).warnings)


def test_missing_disallowed():
    manifest = copy.deepcopy(FIXTURE6_MANIFEST)
    manifest["features"][0]["missing_allowed"] = False
    manifest["data"]["score"] = [0.1, None, 0.35, 0.5, 0.9, 1.0]
    with pytest.raises(SchemaViolation):
        load_manifest(manifest)


# -- gold standard ------------------------------------------------------------


def gold_manifest():
    manifest = copy.deepcopy(FIXTURE6_MANIFEST)
    manifest["gold_standard"] = "c1"
    del manifest["data"]["actual"]
    return manifest


def test_gold_standard_replaces_actual():
    ds = load_manifest(gold_manifest())
    assert ds.actual.tolist() == ds.predictions["c1"].tolist()
    assert ds.compared == ("c2",)
    assert ds.m == 1


def test_gold_standard_accuracy_is_one_on_any_subset():
    from clfbox.metrics import confusion, correct_set, metric

    ds = load_manifest(gold_manifest())
    for scope in ("train", "test", "all"):
        subset = ds.scope_set(scope)
        assert correct_set(ds, "c1", subset) == subset
        value = metric(confusion(ds, "c1", subset), "accuracy")
        assert value.defined and value.value == 1.0


def test_gold_standard_must_be_a_classifier():
    manifest = gold_manifest()
    manifest["gold_standard"] = "c9"
    with pytest.raises(SchemaViolation):
        load_manifest(manifest)


# -- lookups --------------------------------------------------------------------


def test_unknown_lookups(fixture6):
    with pytest.raises(UnknownFeature):
        fixture6.feature("nope")
    with pytest.raises(UnknownClassifier):
        fixture6.prediction_column("nope")
    with pytest.raises(UnknownLabel):
        fixture6.labels.index("Z")
