"""Session-oriented HTTP service exposing grounding and the dialog loop.

JSON over HTTP plus a server-sent-event feed per session. Requests on one
session are serialized by a per-session lock; the engine itself is pure,
so sessions never share mutable state. Views carry a monotonically
increasing per-session revision number.
"""
from __future__ import annotations

import dataclasses
import json
import os
import threading
import time
import uuid
from typing import Dict, List, Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from .dialog import AWAITING, DialogState, dialog_step, start_dialog, state_hash
from .errors import GroundingError, SceneFormatError
from .jsonutil import stable_json
from .pipeline import EngineConfig, GroundingOutcome, ground
from .scoring import tokenize
from .scene import Scene, load_scene, scene_to_dict

EVENT_KEEPALIVE_SECONDS = 15.0

_ENGINE_OVERRIDES = ("sharpness", "noise_epsilon", "noise_seed",
                     "informativeness_threshold", "perspective_mode",
                     "kmeans_seed", "kmeans_restarts")


class TextBody(BaseModel):
    text: str


class SessionRecord:
    """One session: scene, optional dialog, transcript, and event feed."""

    def __init__(self, session_id: str, scene: Scene, scene_doc: dict,
                 engine: EngineConfig):
        self.id = session_id
        self.scene = scene
        self.scene_doc = scene_doc
        self.engine = engine
        self.created_at = time.time()
        self.revision = 0
        self.dialog: Optional[DialogState] = None
        self.last_view: Optional[dict] = None
        self.transcript: List[dict] = []
        self.events: List[dict] = []
        self.lock = threading.Lock()
        self.changed = threading.Condition()

    def next_revision(self) -> int:
        self.revision += 1
        return self.revision

    def emit(self, event_type: str, view: dict) -> None:
        self.events.append({"revision": view["revision"], "type": event_type,
                            "view": view})
        with self.changed:
            self.changed.notify_all()


def _trace_view(outcome: GroundingOutcome) -> dict:
    return {
        "stage": outcome.stage,
        "relevant_ids": list(outcome.relevant_ids),
        "self": [
            {"region": c.region_id, "cel": c.scores.cel, "meteor": c.scores.meteor,
             "decoded": c.decoded.text()}
            for c in outcome.self_trace
        ],
        "pairs": [
            {"referred": p.referred_id, "context": p.context_id,
             "cel": p.scores.cel, "meteor": p.scores.meteor,
             "decoded": p.decoded.text()}
            for p in outcome.pair_trace
        ],
        "relevant_pairs": [list(k) for k in outcome.relevant_pairs],
    }


def _question_view(state: DialogState) -> dict:
    assert state.current is not None
    return {"text": state.current.text, "target": state.current.target_id,
            "kind": state.current.kind}


class ServiceState:
    def __init__(self, default_engine: EngineConfig, journal_dir: Optional[str]):
        self.sessions: Dict[str, SessionRecord] = {}
        self.default_engine = default_engine
        self.journal_dir = journal_dir
        self.lock = threading.Lock()
        if journal_dir:
            os.makedirs(journal_dir, exist_ok=True)

    def get(self, session_id: str) -> SessionRecord:
        with self.lock:
            record = self.sessions.get(session_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown session '{session_id}'")
        return record

    def journal(self, record: SessionRecord, action: str, payload, view: dict) -> None:
        if not self.journal_dir:
            return
        line = stable_json({"revision": view.get("revision"), "action": action,
                            "payload": payload, "view": view}).replace("\n", " ")
        path = os.path.join(self.journal_dir, f"{record.id}.jsonl")
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(line.strip() + "\n")


def _engine_from_overrides(base: EngineConfig, overrides: dict) -> EngineConfig:
    unknown = set(overrides) - set(_ENGINE_OVERRIDES)
    if unknown:
        raise HTTPException(status_code=422,
                            detail=f"unknown engine options: {sorted(unknown)}")
    return dataclasses.replace(base, **overrides)


def create_app(default_engine: EngineConfig | None = None,
               journal_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="refground service")
    # The operator console is served from another local origin.
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    state = ServiceState(default_engine or EngineConfig(), journal_dir)
    app.state.service = state

    @app.exception_handler(GroundingError)
    def grounding_error_handler(request: Request, exc: GroundingError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        if "scene" in body and "regions" not in body:
            scene_doc = body["scene"]
            engine = _engine_from_overrides(state.default_engine,
                                            body.get("engine", {}))
        else:
            scene_doc = body
            engine = state.default_engine
        try:
            scene = load_scene(scene_doc)
        except SceneFormatError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        session_id = uuid.uuid4().hex[:12]
        record = SessionRecord(session_id, scene, scene_to_dict(scene), engine)
        with state.lock:
            state.sessions[session_id] = record
        view = {"revision": record.next_revision(), "kind": "created"}
        record.last_view = view
        state.journal(record, "created", scene_doc, view)
        return {"id": session_id, "revision": view["revision"],
                "scene": record.scene_doc}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        record = state.get(session_id)
        with record.lock:
            return {
                "id": record.id,
                "revision": record.revision,
                "created_at": record.created_at,
                "scene": record.scene_doc,
                "dialog_open": record.dialog is not None
                               and record.dialog.status == AWAITING,
                "last": record.last_view,
                "transcript": record.transcript,
            }

    @app.post("/sessions/{session_id}/instruction")
    def submit_instruction(session_id: str, body: TextBody):
        record = state.get(session_id)
        with record.lock:
            if record.dialog is not None and record.dialog.status == AWAITING:
                raise HTTPException(status_code=409,
                                    detail="a clarification dialog is awaiting a response")
            outcome = ground(record.scene, body.text, record.engine)
            revision = record.next_revision()
            if outcome.kind == "unique":
                record.dialog = None
                view = {"revision": revision, "kind": "unique",
                        "selected": outcome.selected,
                        "candidates": outcome.candidates.ids(),
                        "trace": _trace_view(outcome)}
                event = "resolved"
            else:
                record.dialog = start_dialog(record.scene, outcome, body.text,
                                             record.engine)
                view = {"revision": revision, "kind": "question",
                        "question": _question_view(record.dialog),
                        "candidates": record.dialog.candidates.ids(),
                        "trace": _trace_view(outcome)}
                event = "question-asked"
            record.last_view = view
            record.transcript.append({"revision": revision, "role": "user",
                                      "text": body.text, "timestamp": time.time()})
            if view["kind"] == "question":
                record.transcript.append({
                    "revision": revision, "role": "robot",
                    "text": view["question"]["text"],
                    "state_hash": state_hash(record.dialog),
                    "timestamp": time.time()})
            record.emit(event, view)
            state.journal(record, "instruction", body.text, view)
            return view

    @app.post("/sessions/{session_id}/response")
    def submit_response(session_id: str, body: TextBody):
        record = state.get(session_id)
        with record.lock:
            if record.dialog is None or record.dialog.status != AWAITING:
                raise HTTPException(status_code=409, detail="no open dialog")
            before = len(record.dialog.candidates)
            asked_in = state_hash(record.dialog)
            try:
                correcting = tokenize(body.text).tokens not in (("yes",), ("no",))
            except GroundingError:
                correcting = False
            record.dialog = dialog_step(record.dialog, body.text)
            dialog = record.dialog
            revision = record.next_revision()
            record.transcript.append({"revision": revision, "role": "user",
                                      "text": body.text, "state_hash": asked_in,
                                      "timestamp": time.time()})
            if dialog.status == "resolved":
                view = {"revision": revision, "kind": "resolved",
                        "selected": dialog.resolved_id,
                        "candidates": dialog.candidates.ids()}
                event = "resolved"
            elif dialog.status == "exhausted":
                view = {"revision": revision, "kind": "exhausted",
                        "candidates": []}
                event = "exhausted"
            else:
                view = {"revision": revision, "kind": "question",
                        "question": _question_view(dialog),
                        "candidates": dialog.candidates.ids()}
                event = "question-asked"
                if correcting and len(dialog.candidates) < before:
                    narrowed = dict(view, kind="narrowed")
                    record.emit("narrowed", narrowed)
                record.transcript.append({
                    "revision": revision, "role": "robot",
                    "text": view["question"]["text"],
                    "state_hash": state_hash(dialog),
                    "timestamp": time.time()})
            record.last_view = view
            record.emit(event, view)
            state.journal(record, "response", body.text, view)
            return view

    @app.get("/sessions/{session_id}/events")
    def event_stream(session_id: str, since: int = 0, replay: int = 0):
        record = state.get(session_id)

        def sse(event: dict) -> str:
            return (f"id: {event['revision']}\n"
                    f"event: {event['type']}\n"
                    f"data: {json.dumps(event['view'], sort_keys=True)}\n\n")

        def stream():
            cursor = since
            while True:
                with record.lock:
                    pending = [e for e in record.events if e["revision"] > cursor]
                for event in pending:
                    cursor = max(cursor, event["revision"])
                    yield sse(event)
                if replay:
                    return
                with record.changed:
                    record.changed.wait(timeout=EVENT_KEEPALIVE_SECONDS)
                    if not [e for e in record.events if e["revision"] > cursor]:
                        yield ": keep-alive\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


def replay_journal(app: FastAPI, journal_path: str) -> List[dict]:
    """Re-apply a session journal against a fresh session; returns the views."""
    from fastapi.testclient import TestClient

    views = []
    with open(journal_path, "r", encoding="utf-8") as fh:
        entries = [json.loads(line) for line in fh if line.strip()]
    client = TestClient(app)
    session_id = None
    for entry in entries:
        if entry["action"] == "created":
            response = client.post("/sessions", json=entry["payload"])
            response.raise_for_status()
            session_id = response.json()["id"]
            views.append({"kind": "created", "revision": response.json()["revision"]})
        elif entry["action"] == "instruction":
            response = client.post(f"/sessions/{session_id}/instruction",
                                   json={"text": entry["payload"]})
            response.raise_for_status()
            views.append(response.json())
        elif entry["action"] == "response":
            response = client.post(f"/sessions/{session_id}/response",
                                   json={"text": entry["payload"]})
            response.raise_for_status()
            views.append(response.json())
    return views
