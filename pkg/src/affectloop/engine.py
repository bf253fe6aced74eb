"""Per-session control loop: sensing -> emotion -> collective -> decision.

A Session owns the student streams, calibration epoch, trained VA model
and decision policy. Every state mutation flows through an append-only
event list, and SessionMetrics is produced exclusively by folding those
events, so replaying a stored event log reconstructs the metrics exactly.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field

from .affect import DEFAULT_FUZZY, EMOTIONS, EmotionState, FuzzyConfig, VAPoint, classify_emotion, predict_va
from .calibration import CalibrationState
from .errors import CalibrationRequiredError, SessionError, WarmupError
from .features import extract_features
from .ingest import StreamSet
from .mdp import Policy, TransitionLog, lookup_action, value_iteration

PACE_ACTIONS = ("increase_pace", "decrease_pace")

EVENT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class StudentPreferences:
    """Pre-lecture questionnaire answers."""

    pace_preference: str = "medium"        # slow | medium | fast
    content_style: str = "descriptions"    # illustrations | descriptions

    def __post_init__(self):
        if self.pace_preference not in ("slow", "medium", "fast"):
            raise ValueError(f"bad pace_preference {self.pace_preference!r}")
        if self.content_style not in ("illustrations", "descriptions"):
            raise ValueError(f"bad content_style {self.content_style!r}")


@dataclass(frozen=True)
class Suggestion:
    """One controller output: an action plus the tier that produced it."""

    action: str
    rank: str               # optimal | suboptimal | best_feasible
    label: str              # collective emotion at emission
    confidence: float
    ts_ms: int
    rationale: str

    def to_dict(self) -> dict:
        return {
            "action": self.action,
            "rank": self.rank,
            "label": self.label,
            "confidence": self.confidence,
            "ts_ms": self.ts_ms,
            "rationale": self.rationale,
        }


@dataclass
class CollectiveState:
    """Classroom-level affect aggregated from per-student VA points."""

    counts: dict
    students: dict          # sid -> {"valence", "arousal", "weight", "label"}
    centroid: VAPoint
    collective: EmotionState
    n_emotions: int

    @property
    def label(self) -> str:
        return self.collective.label

    def to_dict(self) -> dict:
        return {
            "counts": dict(self.counts),
            "students": {sid: dict(info) for sid, info in self.students.items()},
            "centroid": {"valence": self.centroid.valence, "arousal": self.centroid.arousal},
            "collective": {
                "label": self.collective.label,
                "confidence": self.collective.confidence,
                "memberships": dict(self.collective.memberships),
            },
            "n_emotions": self.n_emotions,
        }


def aggregate(points: dict, fuzzy: FuzzyConfig = DEFAULT_FUZZY) -> CollectiveState:
    """Weighted VA centroid of the reporting students, then classified.

    `points` maps student id -> (VAPoint, weight). Aggregation happens in
    the continuous plane (the only space where averaging emotions is
    well-defined); per-label counts are reported alongside.
    """
    if not points:
        raise SessionError("no reporting students to aggregate")
    total_w = 0.0
    sum_v = 0.0
    sum_a = 0.0
    students = {}
    counts = Counter({e: 0 for e in EMOTIONS})
    # fixed iteration order makes the centroid exactly permutation-invariant
    for sid in sorted(points):
        point, weight = points[sid]
        if weight <= 0:
            raise ValueError(f"weight for {sid!r} must be positive")
        label = classify_emotion(point, fuzzy).label
        counts[label] += 1
        students[sid] = {
            "valence": point.valence,
            "arousal": point.arousal,
            "weight": weight,
            "label": label,
        }
        total_w += weight
        sum_v += weight * point.valence
        sum_a += weight * point.arousal
    centroid = VAPoint(sum_v / total_w, sum_a / total_w)
    collective = classify_emotion(centroid, fuzzy)
    return CollectiveState(
        counts=dict(counts),
        students=students,
        centroid=centroid,
        collective=collective,
        n_emotions=sum(1 for c in counts.values() if c > 0),
    )


def aggregate_preferences(roster: dict) -> dict:
    """Plurality pace and style across a roster; ties yield None."""

    def plurality(values):
        tally = Counter(values).most_common()
        if not tally or (len(tally) > 1 and tally[0][1] == tally[1][1]):
            return None
        return tally[0][0]

    return {
        "pace": plurality([p.pace_preference for p in roster.values()]),
        "style": plurality([p.content_style for p in roster.values()]),
    }


def apply_preferences(policy: Policy, prefs: dict, bias_fraction: float = 0.05) -> Policy:
    """Bias the Q table toward the class's preferred actions and re-rank.

    The trained model is untouched: a bias of bias_fraction * max|Q| is
    added to the pace action matching the majority pace preference and to
    enrich_content when the majority prefers illustrations.
    """
    favored = set()
    if prefs.get("pace") == "fast":
        favored.add("increase_pace")
    elif prefs.get("pace") == "slow":
        favored.add("decrease_pace")
    if prefs.get("style") == "illustrations":
        favored.add("enrich_content")

    max_q = max((abs(q) for q in policy.q_values.values()), default=0.0)
    delta = bias_fraction * max_q
    adjusted = {
        (s, a): q + (delta if a in favored else 0.0)
        for (s, a), q in policy.q_values.items()
    }
    tb_rank = {a: i for i, a in enumerate(policy.actions)}
    optimal, suboptimal, values = {}, {}, {}
    for state in policy.states:
        ranked = sorted(policy.actions, key=lambda a: (-adjusted[(state, a)], tb_rank[a]))
        optimal[state] = ranked[0]
        suboptimal[state] = ranked[1] if len(ranked) > 1 else None
        values[state] = adjusted[(state, ranked[0])]
    return Policy(
        states=policy.states,
        actions=policy.actions,
        optimal=optimal,
        suboptimal=suboptimal,
        q_values=adjusted,
        value_function=values,
        iterations=policy.iterations,
        residual=policy.residual,
        converged=policy.converged,
    )


@dataclass
class EngineConfig:
    tick_period_s: float = 10.0
    stability_ticks: int = 3
    min_calibration_samples: int = 50
    calibration_warmup_s: float = 300.0   # recommended epoch length at 1 Hz
    preference_bias_fraction: float = 0.05
    feature_window: int = 50
    fuzzy: FuzzyConfig = field(default_factory=FuzzyConfig)


class SessionMetrics:
    """Fold of the session event log; never written to directly."""

    def __init__(self):
        self.ticks = 0
        self.observed_s = 0.0
        self.dwell = {}              # sid -> {emotion: seconds}
        self.collective_dwell = {e: 0.0 for e in EMOTIONS}
        self.suggestion_count = 0
        self.intervention_count = 0
        self.latency_ms = []
        self.skipped_student_ticks = 0

    def apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "tick":
            self.ticks += 1
            self.latency_ms.append(event["latency_ms"])
            self.skipped_student_ticks += len(event.get("skipped", ()))
            dt = event["dt_s"]
            self.observed_s += dt
            collective = event["collective"]
            self.collective_dwell[collective["collective"]["label"]] += dt
            for sid, info in collective["students"].items():
                per = self.dwell.setdefault(sid, {e: 0.0 for e in EMOTIONS})
                per[info["label"]] += dt
        elif kind == "suggestion":
            self.suggestion_count += 1
        elif kind == "intervention":
            self.intervention_count += 1

    @classmethod
    def from_events(cls, events) -> "SessionMetrics":
        metrics = cls()
        for event in events:
            metrics.apply(event)
        return metrics

    def interventions_per_minute(self, n_students: int = None) -> float:
        if self.observed_s <= 0:
            return 0.0
        rate = self.intervention_count / (self.observed_s / 60.0)
        if n_students:
            rate /= n_students
        return rate

    def dwell_fractions(self) -> dict:
        total = sum(self.collective_dwell.values())
        if total <= 0:
            return {e: 0.0 for e in EMOTIONS}
        return {e: s / total for e, s in self.collective_dwell.items()}

    def to_dict(self) -> dict:
        reporting = len(self.dwell)
        return {
            "ticks": self.ticks,
            "observed_s": self.observed_s,
            "dwell": {sid: dict(d) for sid, d in self.dwell.items()},
            "collective_dwell": dict(self.collective_dwell),
            "collective_dwell_fractions": self.dwell_fractions(),
            "suggestion_count": self.suggestion_count,
            "intervention_count": self.intervention_count,
            "interventions_per_minute": self.interventions_per_minute(),
            "interventions_per_minute_per_student": self.interventions_per_minute(
                reporting or None
            ),
            "latency_ms": list(self.latency_ms),
            "skipped_student_ticks": self.skipped_student_ticks,
        }


class Session:
    """One classroom session wired end to end."""

    def __init__(self, session_id, roster, model, mdp_model, config: EngineConfig = None,
                 weights=None, created_ms: int = 0):
        self.session_id = session_id
        self.roster = {
            sid: (prefs if isinstance(prefs, StudentPreferences) else StudentPreferences(**prefs))
            for sid, prefs in roster.items()
        }
        if not self.roster:
            raise ValueError("roster must not be empty")
        self.model = model
        self.mdp_model = mdp_model
        self.config = config or EngineConfig()
        self.weights = dict(weights or {})
        self.status = "calibrating"
        self.created_ms = created_ms
        self.ended_ms = None

        self.streams = StreamSet(roster=self.roster.keys())
        self.calibration = CalibrationState(min_samples=self.config.min_calibration_samples)
        self.base_policy = value_iteration(mdp_model)
        self.policy = apply_preferences(
            self.base_policy,
            aggregate_preferences(self.roster),
            self.config.preference_bias_fraction,
        )
        self.infeasible = set()
        self.transition_log = TransitionLog(mdp_model.states, mdp_model.actions)

        self.events = []
        self.metrics = SessionMetrics()
        self._listeners = []

        self._last_tick_ms = None
        self._prev_label = None
        self._streak_label = None
        self._streak = 0
        self._standing = None          # last emitted Suggestion
        self._pending_action = None    # action assumed applied since last tick
        self._last_calib_ts = {}       # throttle extrema updates to one per second

        self._emit({
            "event": "session_created",
            "ts_ms": created_ms,
            "schema_version": EVENT_SCHEMA_VERSION,
            "session_id": session_id,
            "roster": {
                sid: {"pace_preference": p.pace_preference, "content_style": p.content_style}
                for sid, p in self.roster.items()
            },
        })

    # -- event plumbing ----------------------------------------------------

    def _emit(self, event: dict) -> None:
        self.events.append(event)
        self.metrics.apply(event)
        for listener in list(self._listeners):
            listener(event)

    def add_listener(self, callback) -> None:
        self._listeners.append(callback)

    def remove_listener(self, callback) -> None:
        if callback in self._listeners:
            self._listeners.remove(callback)

    # -- ingestion ----------------------------------------------------------

    def _require_active(self):
        if self.status == "ended":
            raise SessionError(f"session {self.session_id!r} has ended")

    def submit_sample(self, sample) -> None:
        """Buffer one validated sample; during calibration, grow extrema."""
        self._require_active()
        self.streams.ingest_sample(sample)
        if self.status == "calibrating":
            sid = sample.student_id
            if self._last_calib_ts.get(sid) == sample.ts_ms:
                return  # extrema already folded for this second
            try:
                fv = extract_features(self.streams.stream(sid), self.config.feature_window)
            except WarmupError:
                return
            self.calibration.update_extrema(sid, fv)
            self._last_calib_ts[sid] = sample.ts_ms

    def ingest_lines(self, lines, now_ms: int = 0) -> dict:
        """Parse and buffer NDJSON lines; per-line accept/reject report."""
        self._require_active()
        accepted = 0
        rejected = []
        for index, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                from .ingest import parse_sample

                self.submit_sample(parse_sample(line))
                accepted += 1
            except Exception as exc:  # report and continue: partial accept
                rejected.append({"line": index, "reason": str(exc)})
        self._emit({
            "event": "samples_ingested",
            "ts_ms": now_ms,
            "accepted": accepted,
            "rejected": len(rejected),
        })
        return {"accepted": accepted, "rejected": rejected}

    # -- lifecycle -----------------------------------------------------------

    def calibration_shortfall(self) -> dict:
        minimum = self.config.min_calibration_samples
        return {
            sid: minimum - self.calibration.count(sid)
            for sid in self.roster
            if self.calibration.count(sid) < minimum
        }

    def go_live(self, now_ms: int = 0) -> None:
        self._require_active()
        if self.status == "live":
            raise SessionError("session is already live")
        shortfall = self.calibration_shortfall()
        if shortfall:
            raise CalibrationRequiredError(
                "calibration incomplete: "
                + ", ".join(f"{sid} needs {n} more" for sid, n in sorted(shortfall.items()))
            )
        self.calibration.freeze()
        self.status = "live"
        self._emit({"event": "went_live", "ts_ms": now_ms})

    def end(self, now_ms: int = 0) -> None:
        self._require_active()
        self.status = "ended"
        self.ended_ms = now_ms
        self._emit({"event": "session_ended", "ts_ms": now_ms})

    # -- the decision loop ----------------------------------------------------

    def maybe_tick(self, now_ms: int):
        """Run the loop if the session is live and the cadence elapsed."""
        if self.status != "live":
            return None
        if (
            self._last_tick_ms is not None
            and now_ms - self._last_tick_ms < self.config.tick_period_s * 1000.0
        ):
            return None
        return self.tick(now_ms)

    def tick(self, now_ms: int):
        """One pass: features -> VA -> classify -> aggregate -> lookup.

        Emits a Suggestion only once the collective label has been stable
        for stability_ticks consecutive ticks and the looked-up action
        differs from the standing suggestion (so a feasibility change
        re-triggers, steady state does not repeat itself).
        """
        t0 = time.perf_counter()
        points = {}
        skipped = []
        for sid in self.roster:
            try:
                fv = extract_features(self.streams.stream(sid), self.config.feature_window)
                calibrated, _ = self.calibration.normalize(sid, fv)
                points[sid] = (
                    predict_va(self.model, calibrated),
                    self.weights.get(sid, 1.0),
                )
            except (WarmupError, CalibrationRequiredError):
                skipped.append(sid)
        if not points:
            return None

        collective = aggregate(points, self.config.fuzzy)
        label = collective.label
        latency_ms = (time.perf_counter() - t0) * 1000.0
        dt_s = (
            (now_ms - self._last_tick_ms) / 1000.0 if self._last_tick_ms is not None else 0.0
        )

        transition = None
        if self._pending_action is not None and self._prev_label is not None:
            self.transition_log.append(self._prev_label, self._pending_action, label, now_ms)
            transition = {"from": self._prev_label, "action": self._pending_action, "to": label}
            self._pending_action = None

        if label == self._streak_label:
            self._streak += 1
        else:
            self._streak_label = label
            self._streak = 1

        self._emit({
            "event": "tick",
            "ts_ms": now_ms,
            "collective": collective.to_dict(),
            "latency_ms": latency_ms,
            "dt_s": dt_s,
            "skipped": skipped,
            "transition": transition,
        })

        action, rank = lookup_action(self.policy, label, self.infeasible)
        suggestion = None
        if self._streak >= self.config.stability_ticks and (
            self._standing is None or self._standing.action != action
        ):
            suggestion = Suggestion(
                action=action,
                rank=rank,
                label=label,
                confidence=collective.collective.confidence,
                ts_ms=now_ms,
                rationale=(
                    f"collective emotion {label} stable for {self._streak} ticks; "
                    f"{rank} action is {action}"
                ),
            )
            self._emit({"event": "suggestion", "ts_ms": now_ms, **suggestion.to_dict()})
            self._standing = suggestion
            # assume the teacher applies the suggestion unless overridden
            self._pending_action = action

        self._prev_label = label
        self._last_tick_ms = now_ms
        return suggestion

    # -- teacher feedback -------------------------------------------------------

    def record_action(self, action: str, source: str, now_ms: int = 0) -> None:
        """Teacher feedback: applied, override, or infeasible."""
        self._require_active()
        if action not in self.mdp_model.actions:
            raise ValueError(f"unknown action {action!r}")
        if source not in ("applied", "override", "infeasible"):
            raise ValueError(f"unknown action source {source!r}")
        if source == "infeasible":
            if len(self.infeasible | {action}) >= len(self.mdp_model.actions):
                raise ValueError("cannot mark every action infeasible")
            self.infeasible.add(action)
        else:
            self._pending_action = action
        self._emit({"event": "action", "ts_ms": now_ms, "action": action, "source": source})
        if source == "override":
            kind = "pace" if action in PACE_ACTIONS else "content"
            self.record_intervention(kind, now_ms)

    def record_intervention(self, kind: str, now_ms: int = 0) -> SessionMetrics:
        self._require_active()
        if kind not in ("pace", "content"):
            raise ValueError(f"intervention kind must be pace or content, got {kind!r}")
        self._emit({"event": "intervention", "ts_ms": now_ms, "kind": kind})
        return self.metrics

    # -- views ---------------------------------------------------------------

    def latest_collective(self) -> dict:
        for event in reversed(self.events):
            if event["event"] == "tick":
                return event["collective"]
        return None

    def snapshot(self) -> dict:
        return {
            "session_id": self.session_id,
            "status": self.status,
            "collective": self.latest_collective(),
            "suggestion": self._standing.to_dict() if self._standing else None,
            "infeasible": sorted(self.infeasible),
            "metrics": self.metrics.to_dict(),
            "classifier": {
                "centers": {
                    emotion: {"valence": c[0], "arousal": c[1]}
                    for emotion, c in self.config.fuzzy.centers.items()
                },
                "sigma": self.config.fuzzy.sigma,
            },
            "actions": list(self.mdp_model.actions),
        }
