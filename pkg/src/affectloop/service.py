"""HTTP front door: session lifecycle, ingestion, live streaming, storage.

All writes funnel through the session's lock so ticks never overlap;
reads are snapshots. Sessions persist as plain files under the storage
root: session.json, calibration.json, events.ndjson, metrics.json.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from .engine import EngineConfig, Session, SessionMetrics, StudentPreferences
from .errors import CalibrationRequiredError, PersistenceError, SessionError

HEARTBEAT_S = 10.0

_ENGINE_FIELDS = (
    "tick_period_s",
    "stability_ticks",
    "min_calibration_samples",
    "calibration_warmup_s",
    "preference_bias_fraction",
    "feature_window",
)


def now_ms() -> int:
    return int(time.time() * 1000)


@dataclass
class SessionSlot:
    session: Session
    lock: threading.Lock


def create_app(storage_root, model, mdp_model, engine_config: EngineConfig = None,
               clock=now_ms, token: str = None) -> FastAPI:
    """Build the service around one served model and MDP configuration."""
    app = FastAPI(title="affectloop", version="0.1.0")
    app.state.storage_root = Path(storage_root)
    app.state.model = model
    app.state.mdp_model = mdp_model
    app.state.engine_config = engine_config or EngineConfig()
    app.state.clock = clock
    app.state.token = token
    app.state.slots = {}
    app.state.counter = 0
    app.state.registry_lock = threading.Lock()

    def unauthorized(request) -> bool:
        if app.state.token is None:
            return False
        return request.headers.get("authorization") != f"Bearer {app.state.token}"

    def slot_of(session_id) -> SessionSlot:
        slot = app.state.slots.get(session_id)
        if slot is None:
            raise SessionError(f"unknown session {session_id!r}")
        return slot

    @app.exception_handler(SessionError)
    async def _session_error(request, exc):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.middleware("http")
    async def _auth(request, call_next):
        if unauthorized(request):
            return JSONResponse(status_code=401, content={"error": "missing or bad token"})
        return await call_next(request)

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        try:
            payload = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={"error": "body must be JSON"})
        roster_ids = payload.get("roster")
        if not isinstance(roster_ids, list) or not roster_ids or not all(
            isinstance(s, str) and s for s in roster_ids
        ):
            return JSONResponse(
                status_code=400,
                content={"error": "field 'roster' must be a non-empty list of student ids"},
            )
        for field in ("model_id", "mdp_config_id"):
            value = payload.get(field, "default")
            if value != "default":
                return JSONResponse(
                    status_code=400,
                    content={"error": f"field {field!r} must be 'default' (served artifact)"},
                )
        prefs_in = payload.get("preferences", {})
        engine_in = payload.get("engine", {})
        unknown = set(engine_in) - set(_ENGINE_FIELDS)
        if unknown:
            return JSONResponse(
                status_code=400,
                content={"error": f"unknown engine fields {sorted(unknown)}"},
            )
        base = app.state.engine_config
        cfg = EngineConfig(**{
            **{f: getattr(base, f) for f in _ENGINE_FIELDS},
            "fuzzy": base.fuzzy,
            **engine_in,
        })
        try:
            roster = {
                sid: StudentPreferences(**prefs_in.get(sid, {})) for sid in roster_ids
            }
        except (TypeError, ValueError) as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        with app.state.registry_lock:
            app.state.counter += 1
            session_id = f"sess-{app.state.counter:06d}"
            session = Session(
                session_id,
                roster=roster,
                model=app.state.model,
                mdp_model=app.state.mdp_model,
                config=cfg,
                weights=payload.get("weights"),
                created_ms=app.state.clock(),
            )
            app.state.slots[session_id] = SessionSlot(session, threading.Lock())
        return {"session_id": session_id}

    @app.post("/sessions/{session_id}/ingest", status_code=202)
    async def ingest(session_id: str, request: Request):
        slot = slot_of(session_id)
        body = (await request.body()).decode("utf-8", errors="replace")
        lines = body.splitlines()
        with slot.lock:
            if slot.session.status == "ended":
                return JSONResponse(status_code=409, content={"error": "session has ended"})
            report = slot.session.ingest_lines(lines, app.state.clock())
        return report

    @app.post("/sessions/{session_id}/go-live")
    async def go_live(session_id: str):
        slot = slot_of(session_id)
        with slot.lock:
            if slot.session.status != "calibrating":
                return JSONResponse(
                    status_code=409,
                    content={"error": f"cannot go live from status {slot.session.status!r}"},
                )
            try:
                slot.session.go_live(app.state.clock())
            except CalibrationRequiredError:
                return JSONResponse(
                    status_code=409,
                    content={
                        "error": "calibration incomplete",
                        "shortfall": slot.session.calibration_shortfall(),
                    },
                )
        return {"status": "live"}

    @app.get("/sessions/{session_id}/state")
    async def state(session_id: str):
        slot = slot_of(session_id)
        return slot.session.snapshot()

    @app.post("/sessions/{session_id}/action")
    async def action(session_id: str, request: Request):
        slot = slot_of(session_id)
        try:
            payload = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={"error": "body must be JSON"})
        action_name = payload.get("action")
        source = payload.get("source")
        if source not in ("applied", "override", "infeasible"):
            return JSONResponse(
                status_code=400,
                content={"error": "field 'source' must be applied, override or infeasible"},
            )
        with slot.lock:
            if slot.session.status == "ended":
                return JSONResponse(status_code=409, content={"error": "session has ended"})
            if action_name not in slot.session.mdp_model.actions:
                return JSONResponse(
                    status_code=422,
                    content={"error": f"action {action_name!r} is not in the action set"},
                )
            try:
                slot.session.record_action(action_name, source, app.state.clock())
            except ValueError as exc:
                return JSONResponse(status_code=422, content={"error": str(exc)})
        return {"status": "recorded"}

    @app.get("/sessions/{session_id}/stream")
    async def stream(session_id: str):
        slot = slot_of(session_id)
        return StreamingResponse(
            _event_stream(slot, app.state.clock), media_type="text/event-stream"
        )

    @app.post("/sessions/{session_id}/end")
    async def end(session_id: str):
        slot = slot_of(session_id)
        with slot.lock:
            if slot.session.status == "ended":
                return JSONResponse(status_code=409, content={"error": "session already ended"})
            slot.session.end(app.state.clock())
            path = persist_session(slot.session, app.state.storage_root)
        return {"status": "ended", "storage": str(path)}

    return app


def _sse_payload(event: dict):
    """Map an engine event to its stream (type, data) or None."""
    kind = event["event"]
    if kind == "tick":
        return "state", event["collective"]
    if kind == "suggestion":
        return "suggestion", {k: v for k, v in event.items() if k != "event"}
    return None


def _event_stream(slot: SessionSlot, clock):
    """SSE generator: replay history, then follow live until the end."""
    session = slot.session
    inbox = queue.Queue()
    session.add_listener(inbox.put)
    try:
        yield f"event: heartbeat\ndata: {json.dumps({'ts_ms': clock()})}\n\n"
        cursor = 0
        history = list(session.events)
        for index, event in enumerate(history):
            mapped = _sse_payload(event)
            if mapped:
                yield f"id: {index}\nevent: {mapped[0]}\ndata: {json.dumps(mapped[1])}\n\n"
            cursor = index + 1
        if any(e["event"] == "session_ended" for e in history):
            return
        while True:
            try:
                event = inbox.get(timeout=HEARTBEAT_S)
            except queue.Empty:
                yield f"event: heartbeat\ndata: {json.dumps({'ts_ms': clock()})}\n\n"
                continue
            index = cursor
            cursor += 1
            mapped = _sse_payload(event)
            if mapped:
                yield f"id: {index}\nevent: {mapped[0]}\ndata: {json.dumps(mapped[1])}\n\n"
            if event["event"] == "session_ended":
                return
    finally:
        session.remove_listener(inbox.put)


def tick_sessions(app: FastAPI, at_ms: int = None) -> list:
    """Run due ticks on every live session; returns emitted suggestions."""
    at = at_ms if at_ms is not None else app.state.clock()
    out = []
    for slot in list(app.state.slots.values()):
        with slot.lock:
            suggestion = slot.session.maybe_tick(at)
        if suggestion is not None:
            out.append(suggestion)
    return out


def start_tick_thread(app: FastAPI, period_s: float = 1.0) -> threading.Thread:
    def loop():
        while True:
            time.sleep(period_s)
            tick_sessions(app)

    thread = threading.Thread(target=loop, daemon=True, name="affectloop-ticker")
    thread.start()
    return thread


# -- persistence ----------------------------------------------------------------

def persist_session(session: Session, storage_root) -> Path:
    root = Path(storage_root) / session.session_id
    root.mkdir(parents=True, exist_ok=True)
    record = {
        "session_id": session.session_id,
        "status": session.status,
        "created_ms": session.created_ms,
        "ended_ms": session.ended_ms,
        "roster": {
            sid: {"pace_preference": p.pace_preference, "content_style": p.content_style}
            for sid, p in session.roster.items()
        },
        "weights": session.weights,
        "infeasible": sorted(session.infeasible),
        "engine_config": {f: getattr(session.config, f) for f in _ENGINE_FIELDS},
        "transition_log": [
            {"from": s, "action": a, "to": t, "ts_ms": ts}
            for s, a, t, ts in session.transition_log.entries
        ],
    }
    (root / "session.json").write_text(json.dumps(record, indent=2))
    (root / "calibration.json").write_text(session.calibration.to_json())
    with open(root / "events.ndjson", "w", encoding="utf-8") as fh:
        for event in session.events:
            fh.write(json.dumps(event, separators=(",", ":")) + "\n")
    (root / "metrics.json").write_text(json.dumps(session.metrics.to_dict(), indent=2))
    return root


@dataclass
class SessionArchive:
    """Read-only view of a stored session."""

    record: dict
    calibration: dict
    events: list
    metrics: dict

    def replay_metrics(self) -> SessionMetrics:
        return SessionMetrics.from_events(self.events)


def load_session(storage_root, session_id: str) -> SessionArchive:
    root = Path(storage_root) / session_id
    if not root.is_dir():
        raise PersistenceError(f"no stored session {session_id!r} under {storage_root}")
    paths = {name: root / name for name in
             ("session.json", "calibration.json", "events.ndjson", "metrics.json")}
    for name, path in paths.items():
        if not path.is_file():
            raise PersistenceError(f"stored session is missing {name}", path=str(path))
    events = []
    offset = 0
    with open(paths["events.ndjson"], "rb") as fh:
        for raw in fh:
            line = raw.decode("utf-8", errors="replace").strip()
            if line:
                try:
                    events.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise PersistenceError(
                        f"corrupt event log at byte offset {offset}: {exc}",
                        path=str(paths["events.ndjson"]),
                        byte_offset=offset,
                    ) from exc
            offset += len(raw)
    return SessionArchive(
        record=json.loads(paths["session.json"].read_text()),
        calibration=json.loads(paths["calibration.json"].read_text()),
        events=events,
        metrics=json.loads(paths["metrics.json"].read_text()),
    )
