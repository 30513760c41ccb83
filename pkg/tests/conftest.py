import json

import pytest

from clfbox.dataset import load_dataset

# Six-instance fixture used throughout: labels A/B/C, classifiers c1/c2.
#   actual: A A B B C C
#   c1:     A B B B C A   -> correct {0,2,3,4}
#   c2:     A A B A C C   -> correct {0,1,2,4,5}
# split: 0-3 train, 4-5 test; features: one continuous, one categorical.
FIXTURE6_MANIFEST = {
    "labels": ["A", "B", "C"],
    "features": [
        {"name": "score", "kind": "continuous"},
        {"name": "size", "kind": "categorical", "categories": ["small", "large"]},
    ],
    "classifiers": ["c1", "c2"],
    "data": {
        "id": ["i0", "i1", "i2", "i3", "i4", "i5"],
        "split": ["train", "train", "train", "train", "test", "test"],
        "actual": ["A", "A", "B", "B", "C", "C"],
        "score": [0.1, 0.2, 0.35, 0.5, 0.9, 1.0],
        "size": ["small", "large", "small", "large", "small", "large"],
        "c1": ["A", "B", "B", "B", "C", "A"],
        "c2": ["A", "A", "B", "A", "C", "C"],
    },
}


def write_fixture6(tmp_path):
    path = tmp_path / "fixture6.json"
    path.write_text(json.dumps(FIXTURE6_MANIFEST))
    return path


@pytest.fixture(scope="session")
def fixture6_path(tmp_path_factory):
    return write_fixture6(tmp_path_factory.mktemp("fixture6"))


@pytest.fixture(scope="session")
def fixture6(fixture6_path):
    return load_dataset(fixture6_path)
