"""Synthetic students and closed-loop evaluation.

Students carry heterogeneous physiological baselines and per-channel
gain multipliers; signals are affine in the latent (valence, arousal)
plus Gaussian noise, so the feature-to-affect map is learnable while
per-user calibration is provably necessary. All randomness flows from
the scenario seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from importlib import resources

import numpy as np

from .affect import EMOTIONS, VAPoint, classify_emotion, train_regressor
from .calibration import calibrate_rows
from .engine import EngineConfig, Session, StudentPreferences
from .features import FEATURE_NAMES
from .ingest import SensorSample
from .mdp import ACTIONS, STATES, default_mdp_model

# base gains of each channel statistic on (valence, arousal); per-student
# multipliers scale these without changing direction
HR_GAIN = (3.0, 9.0)        # beats/min per unit valence, arousal
EDA_GAIN = (0.5, 1.8)       # microsiemens
TEMP_GAIN = (0.8, 0.2)      # degC
HR_SD = 1.5
EDA_SD = (0.4, 0.15)        # base + arousal coefficient
TEMP_SD = (0.12, 0.04)
RR_SD = (24.0, 4.0, -7.0)   # base + valence + arousal coefficients
SD_FLOORS = {"eda": 0.05, "temp": 0.03, "rr": 2.0}

FEATURE_WINDOW = 50

# quadrant corners visited during the session calibration protocol; they
# span the same affect range the training stimuli cover
CALIBRATION_CORNERS = (
    VAPoint(-0.85, -0.85),
    VAPoint(0.85, -0.85),
    VAPoint(0.85, 0.85),
    VAPoint(-0.85, 0.85),
)

QUADRANT_SIGNS = {
    "bored": (-1, -1),
    "satisfied": (1, -1),
    "curious": (1, 1),
    "confused": (-1, 1),
}


@dataclass
class SyntheticStudent:
    """Baselines, per-channel gain multipliers, and latent state.

    va_offset models a resting point displaced in affect space: a
    student's baseline physiology looks like a permanent affect shift,
    which is exactly what makes non-personalized (pooled) training
    ambiguous and per-user calibration necessary.
    """

    student_id: str
    hr0: float
    eda0: float
    temp0: float
    hr_scale: float = 1.0
    eda_scale: float = 1.0
    temp_scale: float = 1.0
    rr_scale: float = 1.0
    gain_scale: float = 1.0
    va_offset: tuple = (0.0, 0.0)
    emotion: str = "curious"
    va: VAPoint = field(default_factory=lambda: VAPoint(0.5, 0.5))

    def channel_stats(self, v: float, a: float) -> dict:
        """Mean and per-sample sd of each channel at affect (v, a)."""
        g = self.gain_scale
        v = v + self.va_offset[0]
        a = a + self.va_offset[1]
        hr_mean = self.hr0 + g * self.hr_scale * (HR_GAIN[0] * v + HR_GAIN[1] * a)
        eda_mean = self.eda0 + g * self.eda_scale * (EDA_GAIN[0] * v + EDA_GAIN[1] * a)
        temp_mean = self.temp0 + g * self.temp_scale * (TEMP_GAIN[0] * v + TEMP_GAIN[1] * a)
        return {
            "hr": (hr_mean, self.hr_scale * HR_SD),
            "eda": (
                eda_mean,
                self.eda_scale * max(SD_FLOORS["eda"], EDA_SD[0] + g * EDA_SD[1] * a),
            ),
            "temp": (
                temp_mean,
                self.temp_scale * max(SD_FLOORS["temp"], TEMP_SD[0] + g * TEMP_SD[1] * a),
            ),
            "rr": (
                60000.0 / hr_mean,
                self.rr_scale
                * max(SD_FLOORS["rr"], RR_SD[0] + g * (RR_SD[1] * v + RR_SD[2] * a)),
            ),
        }

    def expected_features(self, v: float, a: float) -> np.ndarray:
        """Windowed-feature means at affect (v, a), in FEATURE_NAMES order."""
        stats = self.channel_stats(v, a)
        return np.array([
            stats["eda"][1],                  # scr: running deviation of eda
            stats["eda"][0],                  # scl
            stats["hr"][0],                   # hr
            np.sqrt(2.0) * stats["rr"][1],    # hrv: rmssd of iid jitter
            stats["temp"][1],                 # str
            stats["temp"][0],                 # stl
        ])

    def feature_noise_sd(self, v: float, a: float) -> np.ndarray:
        """Estimator noise of each windowed feature (window 50 at 1 Hz)."""
        stats = self.channel_stats(v, a)
        n = FEATURE_WINDOW
        mean_f = np.sqrt(n)
        sd_f = np.sqrt(2.0 * (n - 1))
        return np.array([
            stats["eda"][1] / sd_f,
            stats["eda"][1] / mean_f,
            stats["hr"][1] / mean_f,
            np.sqrt(2.0) * stats["rr"][1] / np.sqrt(n - 1),
            stats["temp"][1] / sd_f,
            stats["temp"][1] / mean_f,
        ])


def make_population(n_users: int, rng, heterogeneity: float = 1.0,
                    gain_scale: float = 1.0) -> list:
    """Draw a student population with heterogeneous baselines and gains.

    Heterogeneity has two parts: an affect-space resting offset (the
    ambiguous part) and small per-channel residuals plus positive gain
    multipliers (removed exactly by per-user min-max calibration).
    """
    students = []
    h = heterogeneity
    for i in range(n_users):
        students.append(SyntheticStudent(
            student_id=f"s{i + 1}",
            hr0=float(73.0 + rng.uniform(-4.0, 4.0) * h),
            eda0=float(10.0 + rng.uniform(-1.0, 1.0) * h),
            temp0=float(33.0 + rng.uniform(-0.4, 0.4) * h),
            hr_scale=float(1.0 + rng.uniform(-0.3, 0.4) * h),
            eda_scale=float(1.0 + rng.uniform(-0.3, 0.4) * h),
            temp_scale=float(1.0 + rng.uniform(-0.3, 0.4) * h),
            rr_scale=float(1.0 + rng.uniform(-0.3, 0.4) * h),
            gain_scale=gain_scale,
            va_offset=(
                float(rng.uniform(-1.0, 1.0) * h),
                float(rng.uniform(-1.0, 1.0) * h),
            ),
        ))
    return students


def draw_va_for_emotion(emotion: str, rng, margin: float = 0.10, spread: float = 0.85) -> VAPoint:
    """A VA point uniform in the emotion's quadrant box, away from axes."""
    sv, sa = QUADRANT_SIGNS[emotion]
    return VAPoint(
        float(sv * rng.uniform(margin, spread)),
        float(sa * rng.uniform(margin, spread)),
    )


def generate_dataset(n_users: int, rows_per_user: int, seed: int,
                     noise_scale: float = 2.0, gain_scale: float = 1.0,
                     heterogeneity: float = 1.0, label_noise: float = 0.5,
                     fixed_va: VAPoint = None, row_seed: int = None) -> dict:
    """Labeled feature rows plus a parallel ground-truth table.

    Each row: draw a ground-truth emotion and VA point, synthesize raw
    windowed features as baseline + affine-in-VA signal + Gaussian
    estimator noise, and rate the stimulus on the 1-9 scales (optionally
    with rater noise). Ground truth is returned separately so training
    code cannot accidentally consume it.

    The population is a function of `seed` alone; passing a different
    row_seed redraws stimuli and noise for the same students, which is
    how held-out evaluation sets are made.
    """
    if n_users < 2:
        raise ValueError("need at least 2 users")
    if rows_per_user < 1:
        raise ValueError("rows_per_user must be positive")
    if noise_scale == 0.0 and gain_scale == 0.0:
        raise ValueError("degenerate config: zero noise and zero gain")
    students = make_population(
        n_users, np.random.default_rng(seed),
        heterogeneity=heterogeneity, gain_scale=gain_scale,
    )
    rng = np.random.default_rng(seed if row_seed is None else row_seed)
    users, stimuli, rows = [], [], []
    valence, arousal = [], []
    truth = []
    for student in students:
        for j in range(rows_per_user):
            emotion = EMOTIONS[int(rng.integers(len(EMOTIONS)))]
            va = fixed_va if fixed_va is not None else draw_va_for_emotion(emotion, rng)
            if fixed_va is not None:
                emotion = classify_emotion(va).label
            x = student.expected_features(va.valence, va.arousal)
            if noise_scale > 0:
                x = x + noise_scale * student.feature_noise_sd(va.valence, va.arousal) \
                    * rng.standard_normal(len(FEATURE_NAMES))
            v_rating = 5.0 + 4.0 * va.valence
            a_rating = 5.0 + 4.0 * va.arousal
            if label_noise > 0:
                v_rating += label_noise * rng.standard_normal()
                a_rating += label_noise * rng.standard_normal()
            users.append(student.student_id)
            stimuli.append(f"stim{j + 1}")
            rows.append(x)
            valence.append(float(np.clip(v_rating, 1.0, 9.0)))
            arousal.append(float(np.clip(a_rating, 1.0, 9.0)))
            truth.append({
                "user_id": student.student_id,
                "stimulus_id": f"stim{j + 1}",
                "true_valence": va.valence,
                "true_arousal": va.arousal,
                "true_emotion": emotion,
            })
    return {
        "users": users,
        "stimuli": stimuli,
        "X": np.asarray(rows),
        "valence": np.asarray(valence),
        "arousal": np.asarray(arousal),
        "truth": truth,
        "students": students,
    }


def save_truth(path, truth) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "stimulus_id", "true_valence", "true_arousal", "true_emotion"])
        for row in truth:
            writer.writerow([
                row["user_id"], row["stimulus_id"],
                f"{row['true_valence']:.4f}", f"{row['true_arousal']:.4f}",
                row["true_emotion"],
            ])


def load_truth(path) -> list:
    import csv

    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append({
                "user_id": row["user_id"],
                "stimulus_id": row["stimulus_id"],
                "true_valence": float(row["true_valence"]),
                "true_arousal": float(row["true_arousal"]),
                "true_emotion": row["true_emotion"],
            })
    return out


def step_student(student: SyntheticStudent, applied_action: str, dt_s: float,
                 transitions: dict, rng, start_ts_ms: int = 0,
                 latent_period_s: float = 30.0) -> tuple:
    """Advance one student dt_s seconds, emitting 1 Hz samples.

    The latent emotion transitions once per latent period according to
    the applied action's row; channels sample around the emotion's VA
    point. Returns (student, samples); the student is mutated in place.
    """
    if applied_action not in transitions:
        raise ValueError(f"unknown action {applied_action!r}")
    if dt_s <= 0:
        raise ValueError("dt_s must be positive")
    samples = []
    start_s = start_ts_ms // 1000
    for step in range(int(dt_s)):
        ts = int((start_s + step) * 1000)
        stats = student.channel_stats(student.va.valence, student.va.arousal)
        for channel in ("hr", "eda", "temp", "rr"):
            mean, sd = stats[channel]
            samples.append(SensorSample(
                student.student_id, ts, channel, float(mean + sd * rng.standard_normal())
            ))
        if latent_period_s > 0 and (start_s + step + 1) % int(latent_period_s) == 0:
            row = transitions[applied_action][student.emotion]
            probs = np.array([row[s] for s in STATES])
            student.emotion = STATES[int(rng.choice(len(STATES), p=probs))]
            student.va = draw_va_for_emotion(student.emotion, rng)
    return student, samples


@dataclass
class ScenarioConfig:
    students: int = 10
    minutes: float = 30.0
    controller: str = "on"          # on | off
    seed: int = 0
    preset: str = "decay_to_bored"

    def __post_init__(self):
        if self.students < 1 or self.minutes <= 0:
            raise ValueError("students and minutes must be positive")
        if self.controller not in ("on", "off"):
            raise ValueError("controller must be 'on' or 'off'")


def load_preset(name_or_path: str) -> dict:
    """Named packaged preset, or a JSON file path."""
    text = resources.files("affectloop").joinpath("config/sim_presets.json").read_text()
    presets = json.loads(text)
    if name_or_path in presets:
        return presets[name_or_path]
    with open(name_or_path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def train_population_model(students, seed: int, rows_per_user: int = 150,
                           label_noise: float = 0.35):
    """Fit the VA regressor on a dataset drawn from this population."""
    rng = np.random.default_rng(seed + 7)
    users, rows, val, aro = [], [], [], []
    for student in students:
        for _ in range(rows_per_user):
            emotion = EMOTIONS[int(rng.integers(len(EMOTIONS)))]
            va = draw_va_for_emotion(emotion, rng)
            x = student.expected_features(va.valence, va.arousal) \
                + student.feature_noise_sd(va.valence, va.arousal) \
                * rng.standard_normal(len(FEATURE_NAMES))
            users.append(student.student_id)
            rows.append(x)
            val.append(float(np.clip(5 + 4 * va.valence + label_noise * rng.standard_normal(), 1, 9)))
            aro.append(float(np.clip(5 + 4 * va.arousal + label_noise * rng.standard_normal(), 1, 9)))
    X_cal, _ = calibrate_rows(users, np.asarray(rows))
    model, report = train_regressor(X_cal, np.asarray(val), np.asarray(aro),
                                    seed=seed, grid=False, c=10.0)
    return model, report


def run_closed_loop(cfg: ScenarioConfig, model=None, mdp_model=None) -> dict:
    """Simulate a full session through the real engine.

    With the controller on, every emitted suggestion becomes the applied
    teaching action; with it off the action is pinned to no_change. The
    report carries both the engine's recognized metrics and the latent
    ground-truth dwell, plus the full event log. Deterministic per seed.
    """
    preset = load_preset(cfg.preset)
    seq = np.random.SeedSequence(cfg.seed)
    pop_rng, noise_rng, latent_rng = [np.random.default_rng(s) for s in seq.spawn(3)]

    students = make_population(cfg.students, pop_rng)
    if model is None:
        model, _ = train_population_model(students, cfg.seed)
    if mdp_model is None:
        mdp_model = default_mdp_model()

    engine_cfg = EngineConfig(
        tick_period_s=float(preset.get("tick_period_s", 10.0)),
        stability_ticks=int(preset.get("stability_ticks", 3)),
        min_calibration_samples=int(preset.get("min_calibration_samples", 50)),
        calibration_warmup_s=float(preset.get("calibration_warmup_s", 240.0)),
    )
    session = Session(
        session_id=f"sim-{cfg.seed}-{cfg.controller}",
        roster={s.student_id: StudentPreferences() for s in students},
        model=model,
        mdp_model=mdp_model,
        config=engine_cfg,
    )

    transitions = preset["latent_dynamics"]
    latent_period = float(preset.get("latent_period_s", 30.0))
    warmup_s = int(engine_cfg.calibration_warmup_s)
    total_s = int(cfg.minutes * 60.0)
    initial = preset.get("initial_state", "curious")
    for student in students:
        student.emotion = initial
        student.va = draw_va_for_emotion(initial, latent_rng)

    applied_action = "no_change"
    latent_dwell = {e: 0.0 for e in EMOTIONS}
    applied_counts = {a: 0 for a in ACTIONS}
    segment = max(1, warmup_s // len(CALIBRATION_CORNERS))

    def emit_second(ts_s: int, va_by_student) -> None:
        ts_ms = ts_s * 1000
        for student in students:
            va = va_by_student(student)
            stats = student.channel_stats(va.valence, va.arousal)
            for channel in ("hr", "eda", "temp", "rr"):
                mean, sd = stats[channel]
                session.submit_sample(SensorSample(
                    student.student_id, ts_ms, channel,
                    float(mean + sd * noise_rng.standard_normal()),
                ))

    # calibration protocol: visit the affect-plane corners, like wide-range
    # elicitation stimuli, so extrema span the trained feature space
    for ts_s in range(warmup_s):
        corner = CALIBRATION_CORNERS[min(ts_s // segment, len(CALIBRATION_CORNERS) - 1)]
        emit_second(ts_s, lambda student: corner)
    session.go_live(warmup_s * 1000)

    for ts_s in range(warmup_s, total_s):
        emit_second(ts_s, lambda student: student.va)
        for student in students:
            latent_dwell[student.emotion] += 1.0
        suggestion = session.maybe_tick(ts_s * 1000)
        if suggestion is not None and cfg.controller == "on":
            applied_action = suggestion.action
        if (ts_s - warmup_s) > 0 and (ts_s - warmup_s) % int(latent_period) == 0:
            applied_counts[applied_action] += 1
            for student in students:
                row = transitions[applied_action][student.emotion]
                probs = np.array([row[s] for s in STATES])
                student.emotion = STATES[int(latent_rng.choice(len(STATES), p=probs))]
                student.va = draw_va_for_emotion(student.emotion, latent_rng)
    session.end(total_s * 1000)

    total_latent = sum(latent_dwell.values())
    return {
        "config": asdict(cfg),
        "metrics": session.metrics.to_dict(),
        "latent_dwell": dict(latent_dwell),
        "latent_dwell_fractions": {
            e: (s / total_latent if total_latent else 0.0) for e, s in latent_dwell.items()
        },
        "applied_action_periods": applied_counts,
        "events": session.events,
    }
