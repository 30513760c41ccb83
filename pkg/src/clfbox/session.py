"""Sessions: versioned selection state bound to a loaded dataset.

One Session = one exploration. Mutations go through :meth:`Session.mutate`
(the single canonical mutation language shared by the HTTP API, the CLI
script runner, and tests) and bump ``selection_version``; views are pure
reads computed against a consistent snapshot and tagged with the version
they observed.
"""

from __future__ import annotations

import copy
import threading
import time
from pathlib import Path

from .dataset import ExperimentDataset, load_dataset
from .errors import (
    IndexOutOfRange,
    MissingSelection,
    SchemaViolation,
    UnknownDataset,
    UnknownSession,
)
from .query import parse
from .selection import SelectionState
from .views import build_view

COMBINE_ACTIONS = {
    "intersect": "intersection",
    "union": "union",
    "difference": "difference",
    "symmetric_difference": "symmetric_difference",
}
ACTIONS = ("set", "clear", "recall", "scope", *COMBINE_ACTIONS)

DEFAULT_SESSION_TTL = 3600.0


class Session:
    def __init__(self, session_id: str, dataset_id: str, dataset: ExperimentDataset):
        self.session_id = session_id
        self.dataset_id = dataset_id
        self.dataset = dataset
        self.state = SelectionState(dataset)
        self.version = 0
        self.lock = threading.Lock()
        self.touched = time.monotonic()

    # -- mutations ------------------------------------------------------------

    def mutate(
        self,
        action: str,
        slot: str | None = None,
        query: str | None = None,
        history_index: int | None = None,
        scope: str | None = None,
    ) -> dict:
        """Apply one mutation; raises before any state change on bad input."""
        with self.lock:
            self.touched = time.monotonic()
            if action == "set":
                if query is None:
                    raise SchemaViolation("action 'set' requires a query", "query")
                parsed = parse(query)
                self.state.set_slot(slot or "first", parsed)
            elif action == "clear":
                if slot is None:
                    raise SchemaViolation("action 'clear' requires a slot", "slot")
                self.state.clear_slot(slot)
            elif action == "recall":
                if history_index is None:
                    raise IndexOutOfRange("action 'recall' requires history_index")
                self.state.recall(history_index, slot or "first")
            elif action == "scope":
                if scope is None:
                    raise SchemaViolation("action 'scope' requires a scope", "scope")
                self.state.set_scope(scope)
            elif action in COMBINE_ACTIONS:
                if self.state.first is None or self.state.second is None:
                    raise MissingSelection(f"action {action!r} needs both selections set")
                self.state.combine_slots(COMBINE_ACTIONS[action], slot or "first")
            else:
                raise SchemaViolation(
                    f"unknown action {action!r}, expected one of {ACTIONS}", "action"
                )
            self.version += 1
            return self.summary_locked()

    def summary(self) -> dict:
        with self.lock:
            return self.summary_locked()

    def summary_locked(self) -> dict:
        info = self.state.summary()
        info["selection_version"] = self.version
        info["session_id"] = self.session_id
        info["dataset_id"] = self.dataset_id
        return info

    # -- reads ------------------------------------------------------------------

    def view(self, kind: str, raw_params: dict | None = None) -> dict:
        with self.lock:
            self.touched = time.monotonic()
            snapshot = copy.copy(self.state)  # slots/sets are immutable; shallow is consistent
            version = self.version
        return build_view(self.dataset, snapshot, kind, raw_params, version=version)


class DatasetRegistry:
    """Loaded datasets by id. Datasets are immutable; the registry only grows."""

    def __init__(self):
        self._lock = threading.Lock()
        self._datasets: dict[str, ExperimentDataset] = {}
        self._counter = 0

    def add(self, dataset: ExperimentDataset, dataset_id: str | None = None) -> str:
        with self._lock:
            if dataset_id is None:
                self._counter += 1
                dataset_id = f"ds{self._counter}"
            if dataset_id in self._datasets:
                raise SchemaViolation(f"dataset id {dataset_id!r} already registered", "dataset_id")
            self._datasets[dataset_id] = dataset
            return dataset_id

    def load_path(self, path: str | Path) -> str:
        return self.add(load_dataset(path))

    def get(self, dataset_id: str) -> ExperimentDataset:
        with self._lock:
            try:
                return self._datasets[dataset_id]
            except KeyError:
                raise UnknownDataset(f"unknown dataset {dataset_id!r}") from None

    def describe_all(self) -> list[dict]:
        with self._lock:
            items = list(self._datasets.items())
        return [
            {
                "dataset_id": dataset_id,
                "n": ds.n,
                "classifiers": list(ds.compared),
                "labels": list(ds.labels.labels),
                "features": [f.name for f in ds.features],
                "gold_standard": ds.gold_standard,
                "source": ds.source,
            }
            for dataset_id, ds in items
        ]


class SessionManager:
    def __init__(self, registry: DatasetRegistry, ttl: float = DEFAULT_SESSION_TTL):
        self.registry = registry
        self.ttl = ttl
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}
        self._counter = 0

    def create(self, dataset_id: str) -> Session:
        dataset = self.registry.get(dataset_id)
        with self._lock:
            self._purge_locked()
            self._counter += 1
            session = Session(f"s{self._counter}", dataset_id, dataset)
            self._sessions[session.session_id] = session
            return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            self._purge_locked()
            try:
                return self._sessions[session_id]
            except KeyError:
                raise UnknownSession(f"unknown or expired session {session_id!r}") from None

    def _purge_locked(self) -> None:
        now = time.monotonic()
        expired = [sid for sid, s in self._sessions.items() if now - s.touched > self.ttl]
        for sid in expired:
            del self._sessions[sid]
