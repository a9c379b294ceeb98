"""HTTP API over the scoring store, plus the static annotation UI at /.

Validation errors the spec cares about (score out of range, bad items)
come back as 400 with a JSON detail; unknown sessions and items are 404.
Range checks happen in the store, not in the request models, so an
out-of-range float is a 400 rather than a request-shape error.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..errors import (
    DomainError,
    DuplicateItemIdError,
    EmptyItemsError,
    RangeError,
    UnknownItemError,
    UnknownSessionError,
)
from .store import CmsStore

STATIC_DIR = Path(__file__).parent / "static"


class ItemIn(BaseModel):
    item_id: str
    source: str
    reference: str
    hypothesis: str


class SessionIn(BaseModel):
    name: str
    items: list[ItemIn]


class ScoreIn(BaseModel):
    annotator: str
    item_id: str
    value: float


def create_app(data_dir: str | Path, id_factory=None) -> FastAPI:
    store = CmsStore(data_dir, id_factory=id_factory)
    app = FastAPI(title="ffr scoring service", docs_url=None, redoc_url=None)
    app.state.store = store

    @app.exception_handler(UnknownSessionError)
    @app.exception_handler(UnknownItemError)
    async def _not_found(request: Request, exc: Exception):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(RangeError)
    @app.exception_handler(DuplicateItemIdError)
    @app.exception_handler(EmptyItemsError)
    @app.exception_handler(DomainError)
    async def _bad_request(request: Request, exc: Exception):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.post("/api/sessions", status_code=201)
    def create_session(body: SessionIn):
        state = store.create_session(
            body.name, [item.model_dump() for item in body.items]
        )
        return {"session_id": state.session_id}

    @app.get("/api/sessions/{session_id}")
    def session_summary(session_id: str):
        state = store.get_session(session_id)
        scored_by: dict[str, int] = {}
        for annotator, _ in state.scores:
            scored_by[annotator] = scored_by.get(annotator, 0) + 1
        return {
            "session_id": state.session_id,
            "name": state.name,
            "created_at": state.created_at,
            "n_items": len(state.items),
            "scored_by": scored_by,
        }

    @app.get("/api/sessions/{session_id}/next")
    def next_item(session_id: str, annotator: str = ""):
        item = store.next_item(session_id, annotator)
        if item is None:
            return {"done": True}
        return {
            "done": False,
            "item_id": item.item_id,
            "source": item.source,
            "reference": item.reference,
            "hypothesis": item.hypothesis,
        }

    @app.post("/api/sessions/{session_id}/scores", status_code=204)
    def submit_score(session_id: str, body: ScoreIn):
        store.submit_score(session_id, body.annotator, body.item_id, body.value)
        return Response(status_code=204)

    @app.get("/api/sessions/{session_id}/aggregate")
    def aggregate(session_id: str):
        return store.aggregate(session_id).to_json_dict()

    @app.get("/api/sessions/{session_id}/export")
    def export(session_id: str):
        csv_text = store.export_csv(session_id)
        return PlainTextResponse(
            csv_text,
            media_type="text/csv; charset=utf-8",
            headers={
                "Content-Disposition":
                    f'attachment; filename="{session_id}.csv"'
            },
        )

    if STATIC_DIR.is_dir():
        app.mount("/", StaticFiles(directory=STATIC_DIR, html=True),
                  name="ui")
    return app
