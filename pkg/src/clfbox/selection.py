"""Dual active selections with bounded history.

A session holds exactly two selection slots (the design argument: one slot
cannot express comparison, three explode the color budget), plus a bounded
history of displaced slots. Slots store the query, its evaluated set, and
the canonical text description; sets are re-evaluated on recall and on
scope changes so a slot never lies about the instances it names.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bitset import InstanceSet
from .dataset import SCOPES, ExperimentDataset
from .errors import IndexOutOfRange, MissingSelection, SchemaViolation
from .query import Combine, Not, Query, describe, evaluate

SLOTS = ("first", "second")
DEFAULT_HISTORY_CAP = 50


@dataclass
class SelectionSlot:
    query: Query
    set: InstanceSet
    description: str

    @classmethod
    def build(cls, query: Query, dataset: ExperimentDataset, scope: str) -> "SelectionSlot":
        return cls(query=query, set=evaluate(query, dataset, scope), description=describe(query))


@dataclass
class Region:
    count: int
    query: Query
    description: str


@dataclass
class RelationshipSummary:
    only_first: Region
    both: Region
    only_second: Region
    neither: Region

    def counts(self) -> dict[str, int]:
        return {
            "only_first": self.only_first.count,
            "both": self.both.count,
            "only_second": self.only_second.count,
            "neither": self.neither.count,
        }


class SelectionState:
    """Per-session mutable selection state. Mutations must be serialized
    externally (the service holds a per-session lock); reads of the
    immutable slot sets are safe from any thread."""

    def __init__(self, dataset: ExperimentDataset, history_cap: int = DEFAULT_HISTORY_CAP):
        self.dataset = dataset
        self.history_cap = history_cap
        self.first: SelectionSlot | None = None
        self.second: SelectionSlot | None = None
        self.history: list[SelectionSlot] = []
        self.scope: str = "all"

    # -- helpers -----------------------------------------------------------

    def slot(self, name: str) -> SelectionSlot | None:
        if name not in SLOTS:
            raise SchemaViolation(f"unknown slot {name!r}, expected one of {SLOTS}", "slot")
        return getattr(self, name)

    def scope_set(self) -> InstanceSet:
        return self.dataset.scope_set(self.scope)

    def _push_history(self, slot: SelectionSlot | None) -> None:
        if slot is None:
            return
        self.history.append(slot)
        if len(self.history) > self.history_cap:
            del self.history[: len(self.history) - self.history_cap]

    # -- mutations -----------------------------------------------------------

    def set_slot(self, name: str, query: Query) -> SelectionSlot:
        fresh = SelectionSlot.build(query, self.dataset, self.scope)
        self._push_history(self.slot(name))
        setattr(self, name, fresh)
        return fresh

    def clear_slot(self, name: str) -> None:
        self._push_history(self.slot(name))
        setattr(self, name, None)

    def recall(self, history_index: int, name: str = "first") -> SelectionSlot:
        if not 0 <= history_index < len(self.history):
            raise IndexOutOfRange(
                f"history index {history_index} outside 0..{len(self.history) - 1}"
            )
        recalled = self.history.pop(history_index)
        fresh = SelectionSlot.build(recalled.query, self.dataset, self.scope)
        self._push_history(self.slot(name))
        setattr(self, name, fresh)
        return fresh

    def set_scope(self, scope: str) -> None:
        if scope not in SCOPES:
            raise SchemaViolation(f"unknown scope {scope!r}, expected one of {SCOPES}", "scope")
        self.scope = scope
        # complements are scope-relative, so active slots must re-evaluate
        for name in SLOTS:
            slot = self.slot(name)
            if slot is not None:
                setattr(self, name, SelectionSlot.build(slot.query, self.dataset, scope))

    def combine_slots(self, op: str, target: str = "first") -> SelectionSlot:
        """Replace `target` with first <op> second (the relationship-widget actions)."""
        if self.first is None or self.second is None:
            raise MissingSelection("both selections must be set to combine them")
        query = Combine(op, self.first.query, self.second.query)
        return self.set_slot(target, query)

    # -- queries over the state ------------------------------------------------

    def relationship(self) -> RelationshipSummary:
        if self.first is None or self.second is None:
            raise MissingSelection("relationship needs both selections populated")
        scope = self.scope_set()
        f = self.first.set.intersection(scope)
        s = self.second.set.intersection(scope)
        qf, qs = self.first.query, self.second.query

        def region(count: int, query: Query) -> Region:
            return Region(count=count, query=query, description=describe(query))

        both = f.intersect_count(s)
        return RelationshipSummary(
            only_first=region(len(f) - both, Combine("difference", qf, qs)),
            both=region(both, Combine("intersection", qf, qs)),
            only_second=region(len(s) - both, Combine("difference", qs, qf)),
            neither=region(
                len(scope) - (len(f) + len(s) - both),
                Not(Combine("union", qf, qs)),
            ),
        )

    def summary(self) -> dict:
        """JSON-able snapshot used by the service and the script runner."""
        def slot_info(slot: SelectionSlot | None) -> dict | None:
            if slot is None:
                return None
            scoped = slot.set.intersect_count(self.scope_set())
            return {
                "description": slot.description,
                "cardinality": len(slot.set),
                "cardinality_in_scope": scoped,
            }

        info = {
            "scope": self.scope,
            "first": slot_info(self.first),
            "second": slot_info(self.second),
            "history": [slot.description for slot in self.history],
            "relationship": None,
        }
        if self.first is not None and self.second is not None:
            info["relationship"] = self.relationship().counts()
        return info


# -- spec-surface functions -------------------------------------------------


def set_selection(state: SelectionState, slot: str, query: Query) -> SelectionState:
    state.set_slot(slot, query)
    return state


def recall_selection(state: SelectionState, history_index: int, slot: str) -> SelectionState:
    state.recall(history_index, slot)
    return state


def relationship(state: SelectionState) -> RelationshipSummary:
    return state.relationship()
