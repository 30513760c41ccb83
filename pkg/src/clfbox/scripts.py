"""Line-oriented selection scripts.

A script drives an in-process session: selection mutations interleaved with
``emit`` directives that print view payloads. The same lines map 1:1 onto
HTTP API calls, which is what the CLI/service parity guarantee rests on.

Syntax (one action per line, ``#`` comments)::

    scope test
    first incorrect(c1)
    second correct(c2)
    intersect            # first := first AND second
    recall 0 second
    clear second
    emit cumulative_accuracy
    emit histogram feature=score bins=4 normalize=true

``emit`` parameters are ``key=value`` tokens; shell-style quoting lets a
value contain spaces (``filter="actual=A AND correct(c1)"``).
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass

from .dataset import ExperimentDataset
from .errors import ClfboxError, ScriptError, SchemaViolation
from .session import COMBINE_ACTIONS, Session


@dataclass(frozen=True)
class Step:
    kind: str  # "mutate" | "emit"
    line_no: int
    text: str
    mutate_args: dict | None = None
    view_kind: str | None = None
    view_params: dict | None = None


def parse_script(text: str) -> list[Step]:
    steps = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            steps.append(_parse_line(line, line_no))
        except (ValueError, ClfboxError) as exc:
            raise ScriptError(len(steps) + 1, raw.strip(), exc) from None
    return steps


def _parse_line(line: str, line_no: int) -> Step:
    word, _, rest = line.partition(" ")
    rest = rest.strip()
    if word in ("first", "second"):
        if not rest:
            raise SchemaViolation(f"'{word}' needs a query", "query")
        return Step("mutate", line_no, line, mutate_args={"action": "set", "slot": word, "query": rest})
    if word == "scope":
        return Step("mutate", line_no, line, mutate_args={"action": "scope", "scope": rest})
    if word == "clear":
        return Step("mutate", line_no, line, mutate_args={"action": "clear", "slot": rest or "first"})
    if word == "recall":
        parts = rest.split()
        if not parts:
            raise SchemaViolation("'recall' needs a history index", "history_index")
        slot = parts[1] if len(parts) > 1 else "first"
        return Step(
            "mutate",
            line_no,
            line,
            mutate_args={"action": "recall", "history_index": int(parts[0]), "slot": slot},
        )
    if word in COMBINE_ACTIONS:
        return Step(
            "mutate", line_no, line, mutate_args={"action": word, "slot": rest or "first"}
        )
    if word == "emit":
        tokens = shlex.split(rest)
        if not tokens:
            raise SchemaViolation("'emit' needs a view kind", "view")
        params = {}
        for token in tokens[1:]:
            key, sep, value = token.partition("=")
            if not sep:
                raise SchemaViolation(f"emit parameter {token!r} is not key=value", "params")
            params[key] = value
        return Step("emit", line_no, line, view_kind=tokens[0], view_params=params)
    raise SchemaViolation(f"unknown script directive {word!r}", "script")


def run_script(dataset: ExperimentDataset, text: str):
    """Execute a script against a fresh in-process session, yielding payloads per emit."""
    session = Session("script", "script", dataset)
    steps = parse_script(text)
    for step_index, step in enumerate(steps, start=1):
        try:
            if step.kind == "mutate":
                session.mutate(**step.mutate_args)
            else:
                yield session.view(step.view_kind, step.view_params)
        except ClfboxError as exc:
            raise ScriptError(step_index, step.text, exc) from exc
