import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from affectloop.engine import EngineConfig, SessionMetrics
from affectloop.errors import PersistenceError
from affectloop.ingest import SensorSample, render_sample
from affectloop.service import create_app, load_session, persist_session, tick_sessions
from affectloop.simulator import CALIBRATION_CORNERS, draw_va_for_emotion


class FakeClock:
    def __init__(self, start_ms=0):
        self.t_ms = start_ms

    def __call__(self):
        return self.t_ms


@pytest.fixture()
def service(shared_population, shared_model, mdp_model, tmp_path):
    clock = FakeClock()
    app = create_app(
        tmp_path / "storage",
        shared_model,
        mdp_model,
        engine_config=EngineConfig(),
        clock=clock,
    )
    return TestClient(app), clock, app


def _sample_lines(students, ts_s, va_of, rng):
    lines = []
    for student in students:
        va = va_of(student)
        stats = student.channel_stats(va.valence, va.arousal)
        for channel in ("hr", "eda", "temp", "rr"):
            mean, sd = stats[channel]
            lines.append(render_sample(SensorSample(
                student.student_id, ts_s * 1000, channel,
                float(mean + sd * rng.standard_normal()),
            )))
    return lines


def _calibrate(client, clock, students, sid, warmup_s=240, batch_s=30):
    rng = np.random.default_rng(3)
    segment = warmup_s // len(CALIBRATION_CORNERS)
    for start in range(0, warmup_s, batch_s):
        lines = []
        for ts_s in range(start, start + batch_s):
            corner = CALIBRATION_CORNERS[min(ts_s // segment, 3)]
            lines += _sample_lines(students, ts_s, lambda s: corner, rng)
        clock.t_ms = (start + batch_s) * 1000
        resp = client.post(f"/sessions/{sid}/ingest", content="\n".join(lines))
        assert resp.status_code == 202, resp.text
        assert resp.json()["rejected"] == []
    return warmup_s


def _run_live(client, clock, app, students, sid, start_s, seconds, emotion, rng):
    va_by = {
        s.student_id: draw_va_for_emotion(emotion, np.random.default_rng(5), margin=0.4)
        for s in students
    }
    for ts_s in range(start_s, start_s + seconds):
        lines = _sample_lines(students, ts_s, lambda s: va_by[s.student_id], rng)
        clock.t_ms = ts_s * 1000
        client.post(f"/sessions/{sid}/ingest", content="\n".join(lines))
        tick_sessions(app, ts_s * 1000)
    return start_s + seconds


def test_unknown_session_is_404(service):
    client, clock, app = service
    assert client.get("/sessions/nope/state").status_code == 404
    assert client.post("/sessions/nope/go-live").status_code == 404


def test_create_validates_roster(service):
    client, _, _ = service
    assert client.post("/sessions", json={}).status_code == 400
    assert client.post("/sessions", json={"roster": []}).status_code == 400
    assert client.post("/sessions", json={"roster": [1, 2]}).status_code == 400
    assert (
        client.post("/sessions", json={"roster": ["a"], "model_id": "other"}).status_code
        == 400
    )


def test_go_live_before_samples_lists_every_student(service, shared_population):
    client, _, _ = service
    students = shared_population[:3]
    sid = client.post(
        "/sessions", json={"roster": [s.student_id for s in students]}
    ).json()["session_id"]
    resp = client.post(f"/sessions/{sid}/go-live")
    assert resp.status_code == 409
    shortfall = resp.json()["shortfall"]
    assert set(shortfall) == {s.student_id for s in students}


def test_ingest_partial_accept_report(service, shared_population):
    client, _, _ = service
    students = shared_population[:1]
    sid = client.post(
        "/sessions", json={"roster": [s.student_id for s in students]}
    ).json()["session_id"]
    good = render_sample(SensorSample(students[0].student_id, 1000, "hr", 72.0))
    bad_json = "{not json"
    out_of_range = json.dumps(
        {"student_id": students[0].student_id, "ts_ms": 2000, "channel": "hr", "value": 500}
    )
    resp = client.post(
        f"/sessions/{sid}/ingest", content="\n".join([good, bad_json, out_of_range])
    )
    assert resp.status_code == 202
    report = resp.json()
    assert report["accepted"] == 1
    assert [r["line"] for r in report["rejected"]] == [1, 2]
    assert "value" in report["rejected"][1]["reason"]


def test_action_validation(service, shared_population):
    client, _, _ = service
    sid = client.post(
        "/sessions", json={"roster": [shared_population[0].student_id]}
    ).json()["session_id"]
    assert (
        client.post(f"/sessions/{sid}/action", json={"action": "levitate", "source": "applied"})
        .status_code == 422
    )
    assert (
        client.post(f"/sessions/{sid}/action", json={"action": "no_change", "source": "later"})
        .status_code == 400
    )


def test_full_lifecycle_with_fixture_replay(service, shared_population, tmp_path):
    client, clock, app = service
    students = shared_population[:4]
    roster = [s.student_id for s in students]
    create = client.post(
        "/sessions",
        json={
            "roster": roster,
            "preferences": {roster[0]: {"pace_preference": "fast"}},
        },
    )
    assert create.status_code == 201
    sid = create.json()["session_id"]

    # calibration epoch, then live
    t = _calibrate(client, clock, students, sid)
    resp = client.post(f"/sessions/{sid}/go-live")
    assert resp.status_code == 200, resp.text
    assert client.post(f"/sessions/{sid}/go-live").status_code == 409  # already live

    rng = np.random.default_rng(4)
    t = _run_live(client, clock, app, students, sid, t, 120, "curious", rng)

    state = client.get(f"/sessions/{sid}/state").json()
    assert state["status"] == "live"
    assert state["collective"]["collective"]["label"] == "curious"
    assert state["suggestion"]["action"] == "decrease_pace"
    assert state["metrics"]["ticks"] > 0

    # teacher feedback: mark the standing action infeasible, then override
    assert (
        client.post(
            f"/sessions/{sid}/action", json={"action": "decrease_pace", "source": "infeasible"}
        ).status_code == 200
    )
    t = _run_live(client, clock, app, students, sid, t, 40, "curious", rng)
    state = client.get(f"/sessions/{sid}/state").json()
    assert state["suggestion"]["action"] != "decrease_pace"
    assert state["suggestion"]["rank"] in ("suboptimal", "best_feasible")
    assert (
        client.post(
            f"/sessions/{sid}/action", json={"action": "enrich_content", "source": "override"}
        ).status_code == 200
    )
    assert client.get(f"/sessions/{sid}/state").json()["metrics"]["intervention_count"] == 1

    # end, stream replay, persistence
    end = client.post(f"/sessions/{sid}/end")
    assert end.status_code == 200
    assert client.post(f"/sessions/{sid}/end").status_code == 409

    with client.stream("GET", f"/sessions/{sid}/stream") as stream:
        body = "".join(stream.iter_text())
    events = _parse_sse(body)
    kinds = {e["type"] for e in events}
    assert {"heartbeat", "state", "suggestion"} <= kinds
    engine_suggestions = {
        e["action"] for e in app.state.slots[sid].session.events if e["event"] == "suggestion"
    }
    for event in events:
        if event["type"] == "suggestion":
            assert event["data"]["action"] in engine_suggestions

    archive = load_session(app.state.storage_root, sid)
    assert archive.record["status"] == "ended"
    assert archive.record["infeasible"] == ["decrease_pace"]
    assert archive.replay_metrics().to_dict() == archive.metrics
    live_metrics = app.state.slots[sid].session.metrics.to_dict()
    assert archive.metrics == live_metrics


def _parse_sse(body: str):
    events = []
    current = {}
    for line in body.splitlines():
        if not line:
            if current:
                events.append(current)
                current = {}
            continue
        key, _, value = line.partition(": ")
        if key == "event":
            current["type"] = value
        elif key == "data":
            current["data"] = json.loads(value)
        elif key == "id":
            current["id"] = int(value)
    if current:
        events.append(current)
    return events


def test_stream_of_calibrating_session_has_heartbeat_only(service, shared_population):
    client, clock, app = service
    sid = client.post(
        "/sessions", json={"roster": [shared_population[0].student_id]}
    ).json()["session_id"]
    app.state.slots[sid].session.end(clock())  # close immediately so the stream terminates
    with client.stream("GET", f"/sessions/{sid}/stream") as stream:
        body = "".join(stream.iter_text())
    events = _parse_sse(body)
    assert events and events[0]["type"] == "heartbeat"
    assert all(e["type"] == "heartbeat" for e in events)


def test_persist_and_load_round_trip(shared_population, shared_model, mdp_model, tmp_path):
    from tests.test_engine import make_live_session, run_live_seconds

    students = shared_population[:3]
    session, rng, t0 = make_live_session(students, shared_model, mdp_model,
                                         session_id="persist-1")
    run_live_seconds(session, students, rng, t0, 90, emotion="satisfied")
    session.end((t0 + 91) * 1000)
    root = persist_session(session, tmp_path)
    archive = load_session(tmp_path, "persist-1")
    assert archive.record["session_id"] == "persist-1"
    assert archive.metrics == session.metrics.to_dict()
    assert archive.replay_metrics().to_dict() == archive.metrics
    assert (root / "events.ndjson").exists()


def test_load_unknown_session(tmp_path):
    with pytest.raises(PersistenceError):
        load_session(tmp_path, "ghost")


def test_load_truncated_event_log_names_offset(
    shared_population, shared_model, mdp_model, tmp_path
):
    from tests.test_engine import make_live_session

    students = shared_population[:2]
    session, rng, t0 = make_live_session(students, shared_model, mdp_model,
                                         session_id="trunc-1")
    session.end(t0 * 1000)
    persist_session(session, tmp_path)
    log = tmp_path / "trunc-1" / "events.ndjson"
    raw = log.read_bytes()
    cut = raw[: len(raw) - 40]  # chop mid-record
    log.write_bytes(cut)
    offset = cut.rfind(b"\n") + 1
    with pytest.raises(PersistenceError) as exc:
        load_session(tmp_path, "trunc-1")
    assert exc.value.byte_offset == offset
    assert str(offset) in str(exc.value)


def test_bearer_token_enforced(shared_population, shared_model, mdp_model, tmp_path):
    app = create_app(tmp_path, shared_model, mdp_model, token="sekrit")
    client = TestClient(app)
    assert client.post("/sessions", json={"roster": ["a"]}).status_code == 401
    ok = client.post(
        "/sessions", json={"roster": ["a"]}, headers={"Authorization": "Bearer sekrit"}
    )
    assert ok.status_code == 201
