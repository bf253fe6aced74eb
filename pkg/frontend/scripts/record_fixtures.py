"""Record dashboard test fixtures from the real service.

Drives a seeded session where the class sits in confusion, the engine
suggests simplifying content, the teacher marks that infeasible, and the
fallback (decrease pace) surfaces. Captures the raw SSE transcript and a
REST state snapshot exactly as the dashboard would receive them.

Run from the repository root:
    python frontend/scripts/record_fixtures.py
"""

import json
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from affectloop.ingest import SensorSample, render_sample
from affectloop.mdp import default_mdp_model
from affectloop.service import create_app, tick_sessions
from affectloop.simulator import (
    CALIBRATION_CORNERS,
    draw_va_for_emotion,
    make_population,
    train_population_model,
)

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

clock = {"t_ms": 0}
students = make_population(4, np.random.default_rng(np.random.SeedSequence(21).spawn(2)[0]))
model, _ = train_population_model(students, seed=21, rows_per_user=60)
app = create_app("/tmp/affectloop-fixtures", model, default_mdp_model(),
                 clock=lambda: clock["t_ms"])
client = TestClient(app)

sid = client.post("/sessions", json={
    "roster": [s.student_id for s in students],
}).json()["session_id"]

rng = np.random.default_rng(4)
va_live = {
    s.student_id: draw_va_for_emotion("confused", np.random.default_rng(8), margin=0.45)
    for s in students
}
marked_infeasible = False
for ts_s in range(460):
    lines = []
    for student in students:
        va = CALIBRATION_CORNERS[min(ts_s // 60, 3)] if ts_s < 240 else va_live[student.student_id]
        stats = student.channel_stats(va.valence, va.arousal)
        for channel in ("hr", "eda", "temp", "rr"):
            mean, sd = stats[channel]
            lines.append(render_sample(SensorSample(
                student.student_id, ts_s * 1000, channel,
                float(mean + sd * rng.standard_normal()))))
    clock["t_ms"] = ts_s * 1000
    client.post(f"/sessions/{sid}/ingest", content="\n".join(lines))
    if ts_s == 240:
        assert client.post(f"/sessions/{sid}/go-live").status_code == 200
    if ts_s > 240:
        tick_sessions(app, ts_s * 1000)
    state = client.get(f"/sessions/{sid}/state").json()
    if (not marked_infeasible and state["suggestion"]
            and state["suggestion"]["action"] == "simplify_content"):
        # the teacher cannot simplify this content: fallback path
        assert client.post(
            f"/sessions/{sid}/action",
            json={"action": "simplify_content", "source": "infeasible"},
        ).status_code == 200
        marked_infeasible = True

state = client.get(f"/sessions/{sid}/state").json()
assert state["suggestion"]["action"] == "decrease_pace", state["suggestion"]
assert state["suggestion"]["rank"] == "suboptimal"
assert state["collective"]["collective"]["label"] == "confused"

client.post(f"/sessions/{sid}/end")
with client.stream("GET", f"/sessions/{sid}/stream") as stream:
    transcript = "".join(stream.iter_text())

FIXTURES.mkdir(parents=True, exist_ok=True)
(FIXTURES / "recorded_stream.txt").write_text(transcript)
(FIXTURES / "state_snapshot.json").write_text(json.dumps(state, indent=2))
print(f"wrote {FIXTURES / 'recorded_stream.txt'} ({len(transcript)} bytes)")
print(f"wrote {FIXTURES / 'state_snapshot.json'}")
print("final suggestion:", state["suggestion"]["action"], state["suggestion"]["rank"])
