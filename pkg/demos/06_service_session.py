"""
Driving the HTTP service end to end
===================================

Spins the FastAPI app in-process with a virtual clock, walks a session
through create -> ingest -> go-live -> ticks -> teacher action -> end,
then reloads the stored artifacts and re-derives the metrics from the
event log alone.
"""

import numpy as np
from fastapi.testclient import TestClient

from affectloop.ingest import SensorSample, render_sample
from affectloop.mdp import default_mdp_model
from affectloop.service import create_app, load_session, tick_sessions
from affectloop.simulator import (
    CALIBRATION_CORNERS,
    draw_va_for_emotion,
    make_population,
    train_population_model,
)

clock = {"t_ms": 0}
students = make_population(4, np.random.default_rng(np.random.SeedSequence(11).spawn(2)[0]))
model, _ = train_population_model(students, seed=11, rows_per_user=60)
app = create_app("/tmp/affectloop-demo", model, default_mdp_model(),
                 clock=lambda: clock["t_ms"])
client = TestClient(app)

sid = client.post("/sessions", json={"roster": [s.student_id for s in students]}).json()["session_id"]
print("created", sid)
print("premature go-live ->", client.post(f"/sessions/{sid}/go-live").json())

rng = np.random.default_rng(2)
va_live = {s.student_id: draw_va_for_emotion("confused", np.random.default_rng(3), margin=0.4)
           for s in students}
for ts_s in range(400):
    lines = []
    for student in students:
        va = (CALIBRATION_CORNERS[min(ts_s // 60, 3)] if ts_s < 240
              else va_live[student.student_id])
        stats = student.channel_stats(va.valence, va.arousal)
        for channel in ("hr", "eda", "temp", "rr"):
            mean, sd = stats[channel]
            lines.append(render_sample(SensorSample(
                student.student_id, ts_s * 1000, channel,
                float(mean + sd * rng.standard_normal()))))
    clock["t_ms"] = ts_s * 1000
    client.post(f"/sessions/{sid}/ingest", content="\n".join(lines))
    if ts_s == 240:
        print("go-live ->", client.post(f"/sessions/{sid}/go-live").json())
    if ts_s > 240:
        tick_sessions(app, ts_s * 1000)

state = client.get(f"/sessions/{sid}/state").json()
print("collective:", state["collective"]["collective"]["label"],
      "suggestion:", state["suggestion"]["action"], f"({state['suggestion']['rank']})")

client.post(f"/sessions/{sid}/action",
            json={"action": "simplify_content", "source": "infeasible"})
for ts_s in range(400, 440):
    clock["t_ms"] = ts_s * 1000
    tick_sessions(app, ts_s * 1000)
state = client.get(f"/sessions/{sid}/state").json()
print("after marking simplify_content infeasible:",
      state["suggestion"]["action"], f"({state['suggestion']['rank']})")

print("end ->", client.post(f"/sessions/{sid}/end").json()["status"])
archive = load_session("/tmp/affectloop-demo", sid)
print("stored events:", len(archive.events),
      "| metrics replay exact:", archive.replay_metrics().to_dict() == archive.metrics)
