"""HTTP/JSON service around the compiler and the local engine.

Sessions serialize their queries: a newer request on the same session
supersedes the older one, which is cancelled on the engine and answered
with 409. Results are cached under the structural spec digest, so a
worksheet that differs only in column names or order is served without
touching the engine.
"""

from __future__ import annotations

import datetime
import threading
import time
import uuid
from typing import Optional

from fastapi import Body, FastAPI
from fastapi.responses import JSONResponse

from sheetc.compiler import compile_spec
from sheetc.engine import Engine, QueryCancelled
from sheetc.errors import UnsupportedQuery
from sheetc.options import Page
from sheetc.runner.cache import ResultCache, cache_key, restore, store_form
from sheetc.runner.explain import STAGES, explain
from sheetc.spec_model import (
    Catalog,
    SchemaError,
    SpecError,
    SpecSyntaxError,
    parse_spec,
)

DEFAULT_PAGE_SIZE = 1000


class Session:
    def __init__(self, sid: str):
        self.id = sid
        self.spec_text: Optional[str] = None
        self.dialect = "ansi"
        self.seq = 0
        self.token: Optional[object] = None
        self.lock = threading.Lock()


def _status_of(exc: Exception) -> int:
    if isinstance(exc, (SpecSyntaxError, SchemaError)):
        return 400
    if isinstance(exc, (SpecError, UnsupportedQuery)):
        return 422
    return 500


def _json_value(v):
    if isinstance(v, datetime.date):
        return v.isoformat()
    return v


def create_app(catalog: Catalog, db_path: Optional[str] = None,
               page_size: int = DEFAULT_PAGE_SIZE,
               cache_capacity: int = 256) -> FastAPI:
    app = FastAPI(title="worksheet compiler service")
    engine = Engine(db_path or ":memory:")
    engine.load_catalog(catalog)
    cache = ResultCache(cache_capacity)
    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()

    def get_session(sid: Optional[str]) -> Session:
        sid = sid or uuid.uuid4().hex
        with sessions_lock:
            if sid not in sessions:
                sessions[sid] = Session(sid)
            return sessions[sid]

    def fail(exc: Exception) -> JSONResponse:
        return JSONResponse({"error": str(exc)}, status_code=_status_of(exc))

    @app.post("/compile")
    def compile_endpoint(payload: dict = Body(...)):
        spec_text = payload.get("spec")
        dialect = payload.get("dialect", "ansi")
        if not isinstance(spec_text, str):
            return JSONResponse({"error": "spec must be a JSON string"},
                                status_code=400)
        started = time.perf_counter()
        try:
            compiled = compile_spec(spec_text, catalog, dialect=dialect,
                                    bindings=payload.get("bindings"))
        except (SpecError, UnsupportedQuery, ValueError) as exc:
            return fail(exc)
        compile_ms = (time.perf_counter() - started) * 1000.0
        return {
            "sql": compiled.sql,
            "diagnostics": {
                name: [d.message for d in ds]
                for name, ds in compiled.diagnostics.items()
            },
            "compile_ms": compile_ms,
        }

    @app.post("/query")
    def query_endpoint(payload: dict = Body(...)):
        spec_text = payload.get("spec")
        if not isinstance(spec_text, str):
            return JSONResponse({"error": "spec must be a JSON string"},
                                status_code=400)
        bindings = payload.get("bindings") or {}
        page_doc = payload.get("page") or {}
        page = Page(limit=int(page_doc.get("limit", page_size)),
                    offset=int(page_doc.get("offset", 0)))
        session = get_session(payload.get("session"))

        token = object()
        with session.lock:
            session.seq += 1
            my_seq = session.seq
            old_token = session.token
            session.token = token
            session.spec_text = spec_text
        if old_token is not None:
            engine.cancel(old_token)

        try:
            spec = parse_spec(spec_text)
            key, placeholder = cache_key(spec, bindings, "ansi", page)
            compiled = compile_spec(spec, catalog, bindings=bindings,
                                    page=page)
        except (SpecError, UnsupportedQuery, ValueError) as exc:
            return fail(exc)

        stored = cache.get(key)
        from_cache = stored is not None
        if from_cache:
            table = restore(stored, compiled.columns, placeholder)
        else:
            try:
                table = engine.run(compiled.sql, compiled.columns,
                                   token=token)
            except QueryCancelled:
                return JSONResponse(
                    {"error": "superseded", "session": session.id},
                    status_code=409,
                )
            except Exception as exc:  # engine failure
                return JSONResponse({"error": str(exc)}, status_code=500)

        with session.lock:
            if session.seq != my_seq:
                # a newer request took over; leave its state alone
                return JSONResponse(
                    {"error": "superseded", "session": session.id},
                    status_code=409,
                )
            session.token = None
            if not from_cache:
                cache.put(key, store_form(table, placeholder))

        return {
            "session": session.id,
            "columns": [{"name": n, "type": t.value}
                        for n, t in table.columns],
            "rows": [[_json_value(v) for v in row] for row in table.rows],
            "annotations": {"multi_value_flags": compiled.multi_flags},
            "from_cache": from_cache,
        }

    @app.get("/explain")
    def explain_endpoint(session: str, stage: str = "sql"):
        if stage not in STAGES:
            return JSONResponse(
                {"error": f"unknown stage {stage!r}"}, status_code=400
            )
        with sessions_lock:
            s = sessions.get(session)
        if s is None or s.spec_text is None:
            return JSONResponse(
                {"error": "session has no current worksheet"},
                status_code=400,
            )
        try:
            compiled = compile_spec(s.spec_text, catalog, dialect=s.dialect)
        except (SpecError, UnsupportedQuery, ValueError) as exc:
            return fail(exc)
        return {"stage": stage, "text": explain(compiled, stage)}

    @app.post("/cancel")
    def cancel_endpoint(payload: dict = Body(...)):
        with sessions_lock:
            s = sessions.get(payload.get("session") or "")
        if s is None:
            return {"cancelled": False}
        with s.lock:
            s.seq += 1  # anything in flight is now stale
            token = s.token
            s.token = None
        cancelled = engine.cancel(token) if token is not None else False
        return {"cancelled": cancelled}

    return app
