"""clfbox: classifier-comparison analytics over experiment results.

Load a finished experiment (instances, true labels, one prediction column
per classifier), carve out instance subsets with composable queries and
dual selections, and compare per-subset performance through box-based view
payloads, a CLI, and an HTTP API.
"""

from .bitset import InstanceSet, combine
from .dataset import (
    ExperimentDataset,
    FeatureSchema,
    LabelVocabulary,
    ValidationReport,
    load_dataset,
    load_manifest,
    scope_set,
    validate,
)
from .metrics import ConfusionMatrix, MetricValue, confusion, correct_set, metric, metric_table
from .query import Query, describe, evaluate, parse
from .selection import RelationshipSummary, SelectionSlot, SelectionState
from .session import DatasetRegistry, Session, SessionManager
from .views import build_view, coerce_view_params, payload_json

__version__ = "0.1.0"

__all__ = [
    "ConfusionMatrix",
    "DatasetRegistry",
    "ExperimentDataset",
    "FeatureSchema",
    "InstanceSet",
    "LabelVocabulary",
    "MetricValue",
    "Query",
    "RelationshipSummary",
    "SelectionSlot",
    "SelectionState",
    "Session",
    "SessionManager",
    "ValidationReport",
    "build_view",
    "coerce_view_params",
    "combine",
    "confusion",
    "correct_set",
    "describe",
    "evaluate",
    "load_dataset",
    "load_manifest",
    "metric",
    "metric_table",
    "parse",
    "payload_json",
    "scope_set",
    "validate",
    "__version__",
]
