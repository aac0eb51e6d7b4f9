"""HTTP service: sessions, chat with async tool events over SSE, dataset and
conditions views, sample questions, transcript export, static UI hosting.

One server process fronts one dataset. Sessions are in-memory; the transcript
export is the durable artifact. The SSE stream carries the five session event
types; the transcript log additionally records user messages for export.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import HTMLResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .agent import Session
from .dataset import DataTable, DatasetMetadata
from .errors import BadParamType, UnknownColumn
from .genpipeline import render_system_prompt
from .nlu import DeterministicStrategy, FewShotStrategy, PromptSample, extractor_specs
from .tools import ExecutionContext
from .transcript import render_transcript_html

logger = logging.getLogger(__name__)

EVENT_TYPES = ("agent_message", "tool_started", "tool_result", "conditions_changed", "error")
PREVIEW_ROWS = 20
SSE_POLL_SECONDS = 0.2
SSE_HEARTBEAT_SECONDS = 15.0


@dataclass
class SessionEvent:
    type: str
    payload: dict
    seq: int

    def to_dict(self) -> dict:
        return {"type": self.type, "payload": self.payload, "seq": self.seq}


@dataclass
class SessionRecord:
    session: Session
    events: list[SessionEvent] = field(default_factory=list)
    transcript: list[dict] = field(default_factory=list)
    seq: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)
    wakeup: threading.Condition = field(default_factory=threading.Condition)
    # serializes message handling per session; background jobs run outside it
    message_lock: threading.Lock = field(default_factory=threading.Lock)

    def append_event(self, etype: str, payload: dict) -> SessionEvent:
        with self.lock:
            self.seq += 1
            event = SessionEvent(type=etype, payload=payload, seq=self.seq)
            self.events.append(event)
            self.transcript.append({"type": etype, "payload": payload})
        with self.wakeup:
            self.wakeup.notify_all()
        return event

    def record_user(self, text: str) -> None:
        with self.lock:
            self.transcript.append({"type": "user_message", "payload": {"text": text}})


class ServerState:
    """Everything one dataset-bound server process owns."""

    def __init__(
        self,
        meta: DatasetMetadata | None = None,
        table: DataTable | None = None,
        prompt_db: list[PromptSample] | None = None,
        provider=None,
        seed: int = 0,
        folds: int = 5,
        max_workers: int = 2,
        use_fewshot: bool = False,
    ):
        self.meta = meta
        self.table = table
        self.prompt_db = prompt_db or []
        self.provider = provider
        self.seed = seed
        self.folds = folds
        self.use_fewshot = use_fewshot
        self.sessions: dict[str, SessionRecord] = {}
        self.executor = ThreadPoolExecutor(max_workers=max_workers)
        self.lock = threading.RLock()

    @property
    def ready(self) -> bool:
        return self.meta is not None and self.table is not None

    def _build_strategies(self):
        deterministic = DeterministicStrategy(self.prompt_db, self.meta, self.table)
        if self.use_fewshot and self.provider is not None:
            return FewShotStrategy(self.prompt_db, self.provider, seed=self.seed), deterministic
        return deterministic, deterministic

    def create_session(self) -> str:
        session_id = str(uuid.uuid4())
        record = SessionRecord(session=None)  # placeholder until sink exists
        strategy, fallback = self._build_strategies()
        session = Session(
            ctx=ExecutionContext(meta=self.meta, table=self.table, seed=self.seed, folds=self.folds),
            specs=extractor_specs(self.meta),
            strategy=strategy,
            provider=self.provider,
            system_prompt=render_system_prompt(self.meta).text,
            fallback_strategy=fallback,
            event_sink=record.append_event,
        )
        record.session = session
        with self.lock:
            self.sessions[session_id] = record
        return session_id

    def get(self, session_id: str) -> SessionRecord:
        with self.lock:
            record = self.sessions.get(session_id)
        if record is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return record

    def toggle_column(self, name: str, supported: bool) -> DatasetMetadata:
        with self.lock:
            if not self.meta.has_column(name):
                raise HTTPException(status_code=404, detail=f"unknown column {name!r}")
            self.meta = self.meta.with_supported(name, supported)
            strategy, fallback = self._build_strategies()
            specs = extractor_specs(self.meta)
            for record in self.sessions.values():
                record.session.ctx.meta = self.meta
                record.session.specs = specs
                record.session.strategy.primary = strategy
                record.session.strategy.fallback = fallback
            return self.meta


def _frame(event: SessionEvent) -> str:
    data = json.dumps(event.to_dict())
    return f"id: {event.seq}\nevent: {event.type}\ndata: {data}\n\n"


def sse_frames(record: SessionRecord, cursor: int) -> list[str]:
    """Frames for every event past cursor, in seq order."""
    with record.lock:
        fresh = [e for e in record.events if e.seq > cursor]
    return [_frame(e) for e in fresh]


async def sse_stream_live(record: SessionRecord, cursor: int):
    """Endless event stream: backlog replay, then poll for new events with
    periodic heartbeats. Async so client disconnects cancel it cleanly."""
    import asyncio

    sent = cursor
    last_beat = time.monotonic()
    while True:
        with record.lock:
            fresh = [e for e in record.events if e.seq > sent]
        for event in fresh:
            sent = event.seq
            yield _frame(event)
            last_beat = time.monotonic()
        if time.monotonic() - last_beat > SSE_HEARTBEAT_SECONDS:
            yield ": ping\n\n"
            last_beat = time.monotonic()
        await asyncio.sleep(SSE_POLL_SECONDS)


class MessageBody(BaseModel):
    text: str


class ColumnToggle(BaseModel):
    supported: bool


class ConditionBody(BaseModel):
    column: str
    value: Any


def create_app(state: ServerState, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="prescriptive-agent")
    app.state.server = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.post("/api/sessions")
    def create_session():
        if not state.ready:
            raise HTTPException(status_code=503, detail="no dataset loaded")
        return {"session_id": state.create_session()}

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody):
        record = state.get(session_id)
        if not body.text.strip():
            raise HTTPException(status_code=422, detail="empty message text")
        with record.message_lock:
            record.record_user(body.text)
            turn = record.session.handle_query(body.text, executor=state.executor)
        return turn.to_dict()

    @app.get("/api/sessions/{session_id}/events")
    def event_stream(session_id: str, request: Request):
        record = state.get(session_id)
        last_id = request.headers.get("Last-Event-ID") or request.query_params.get("last_event_id") or "0"
        try:
            cursor = int(last_id)
        except ValueError:
            cursor = 0
        headers = {"Cache-Control": "no-cache", "X-Accel-Buffering": "no"}
        if request.query_params.get("replay"):
            # bounded mode: emit the current backlog and close (resume/debugging)
            body = "".join(sse_frames(record, cursor))
            return StreamingResponse(iter([body]), media_type="text/event-stream", headers=headers)
        return StreamingResponse(
            sse_stream_live(record, cursor), media_type="text/event-stream", headers=headers
        )

    @app.get("/api/dataset")
    def get_dataset():
        if not state.ready:
            raise HTTPException(status_code=503, detail="no dataset loaded")
        with state.lock:
            meta = state.meta
        table = state.table
        preview = []
        for i in range(min(PREVIEW_ROWS, table.row_count)):
            preview.append({name: table.columns[name][i] for name in table.column_order})
        return {
            "metadata": meta.to_dict(),
            "preview": preview,
            "row_count": table.row_count,
        }

    @app.put("/api/dataset/columns/{name}")
    def toggle_column(name: str, body: ColumnToggle):
        meta = state.toggle_column(name, body.supported)
        return {"metadata": meta.to_dict()}

    @app.get("/api/sessions/{session_id}/conditions")
    def get_conditions(session_id: str):
        record = state.get(session_id)
        return {
            "conditions": record.session.conditions_snapshot(),
            "provenance": record.session.provenance_snapshot(),
        }

    @app.put("/api/sessions/{session_id}/conditions")
    def put_condition(session_id: str, body: ConditionBody):
        record = state.get(session_id)
        try:
            snapshot = record.session.set_condition(body.column, body.value)
        except UnknownColumn as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except BadParamType as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {"conditions": snapshot}

    @app.delete("/api/sessions/{session_id}/conditions")
    def delete_conditions(session_id: str):
        record = state.get(session_id)
        return {"conditions": record.session.clear_conditions()}

    @app.delete("/api/sessions/{session_id}/conditions/{column}")
    def delete_condition(session_id: str, column: str):
        record = state.get(session_id)
        try:
            snapshot = record.session.remove_condition(column)
        except UnknownColumn as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {"conditions": snapshot}

    @app.get("/api/sessions/{session_id}/sample-questions")
    def sample_questions(session_id: str):
        record = state.get(session_id)
        return {"questions": record.session.sample_questions()}

    @app.get("/api/sessions/{session_id}/transcript")
    def transcript(session_id: str, format: str = "html"):
        record = state.get(session_id)
        if format != "html":
            raise HTTPException(status_code=400, detail=f"unsupported format {format!r}")
        with record.lock:
            log = list(record.transcript)
        title = f"{state.meta.title} conversation" if state.meta else "Conversation"
        return HTMLResponse(render_transcript_html(log, title=title))

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def build_state_from_paths(
    bundle_dir: str | Path,
    data_path: str | Path | None = None,
    meta_path: str | Path | None = None,
    provider=None,
    seed: int = 0,
    use_fewshot: bool = False,
) -> ServerState:
    """Assemble server state from a setup bundle (plus optional overrides)."""
    from .dataset import load_metadata, load_table
    from .genpipeline import load_bundle

    bundle_meta, prompt_db, _ = load_bundle(bundle_dir)
    meta = load_metadata(meta_path) if meta_path else bundle_meta
    table = load_table(meta, csv_path=data_path)
    return ServerState(
        meta=meta,
        table=table,
        prompt_db=prompt_db,
        provider=provider,
        seed=seed,
        use_fewshot=use_fewshot,
    )
