"""HTTP+JSON API under /v1.

Thin wrapper over :mod:`clfbox.session`: datasets are loaded once and
immutable, per-session selection state is mutated through the canonical
action language, views are computed on demand and serialized with the same
canonical JSON writer the CLI uses (so the two emit identical bytes).

Endpoints:
    POST /v1/datasets                {"path": ...} | {"manifest": {...}}
    GET  /v1/datasets
    POST /v1/sessions                {"dataset_id": ...}
    GET  /v1/sessions/{id}/state
    POST /v1/sessions/{id}/selection {"action", "slot"?, "query"?, "history_index"?, "scope"?}
    GET  /v1/sessions/{id}/views/{kind}?params...
    GET  /v1/sessions/{id}/instances?offset&limit&sort&filter

Errors are JSON {"code", "message", "detail_path"} with 4xx status.
"""

from __future__ import annotations

from fastapi import FastAPI, Request, Response
from pydantic import BaseModel

from .dataset import load_manifest
from .errors import ClfboxError, SchemaViolation
from .session import DEFAULT_SESSION_TTL, DatasetRegistry, SessionManager
from .views import payload_json


class DatasetRequest(BaseModel):
    path: str | None = None
    manifest: dict | None = None
    dataset_id: str | None = None


class SessionRequest(BaseModel):
    dataset_id: str


class SelectionRequest(BaseModel):
    action: str
    slot: str | None = None
    query: str | None = None
    history_index: int | None = None
    scope: str | None = None


def _json_response(payload: dict, status_code: int = 200) -> Response:
    return Response(
        content=payload_json(payload), status_code=status_code, media_type="application/json"
    )


def create_app(
    registry: DatasetRegistry | None = None, session_ttl: float = DEFAULT_SESSION_TTL
) -> FastAPI:
    registry = registry or DatasetRegistry()
    sessions = SessionManager(registry, ttl=session_ttl)

    app = FastAPI(title="clfbox", version="0.1.0")
    app.state.registry = registry
    app.state.sessions = sessions

    @app.exception_handler(ClfboxError)
    async def clfbox_error_handler(_request: Request, exc: ClfboxError):
        return _json_response(exc.to_payload(), status_code=exc.http_status)

    @app.post("/v1/datasets")
    def add_dataset(body: DatasetRequest):
        if (body.path is None) == (body.manifest is None):
            raise SchemaViolation("provide exactly one of 'path' or 'manifest'", "body")
        if body.path is not None:
            dataset_id = registry.add(
                load_manifest_from_path(body.path), dataset_id=body.dataset_id
            )
        else:
            dataset_id = registry.add(load_manifest(body.manifest), dataset_id=body.dataset_id)
        dataset = registry.get(dataset_id)
        return _json_response(
            {
                "dataset_id": dataset_id,
                "n": dataset.n,
                "classifiers": list(dataset.compared),
                "labels": list(dataset.labels.labels),
            },
            status_code=201,
        )

    @app.get("/v1/datasets")
    def list_datasets():
        return _json_response({"datasets": registry.describe_all()})

    @app.post("/v1/sessions")
    def create_session(body: SessionRequest):
        session = sessions.create(body.dataset_id)
        return _json_response(session.summary(), status_code=201)

    @app.get("/v1/sessions/{session_id}/state")
    def session_state(session_id: str):
        return _json_response(sessions.get(session_id).summary())

    @app.post("/v1/sessions/{session_id}/selection")
    def mutate_selection(session_id: str, body: SelectionRequest):
        session = sessions.get(session_id)
        summary = session.mutate(
            action=body.action,
            slot=body.slot,
            query=body.query,
            history_index=body.history_index,
            scope=body.scope,
        )
        return _json_response(summary)

    @app.get("/v1/sessions/{session_id}/views/{kind}")
    def get_view(session_id: str, kind: str, request: Request):
        session = sessions.get(session_id)
        raw_params = dict(request.query_params)
        return _json_response(session.view(kind, raw_params))

    @app.get("/v1/sessions/{session_id}/instances")
    def get_instances(session_id: str, request: Request):
        session = sessions.get(session_id)
        raw_params = dict(request.query_params)
        return _json_response(session.view("instance_list", raw_params))

    return app


def load_manifest_from_path(path: str):
    from .dataset import load_dataset  # noqa: PLC0415

    return load_dataset(path)
