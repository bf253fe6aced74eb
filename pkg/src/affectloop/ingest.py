"""Sample ingestion: wire parsing, per-student ring buffers, file replay.

Wire format is NDJSON, one object per sample:
    {"student_id": "s1", "ts_ms": 1000, "channel": "hr", "value": 72.0}
"""

from __future__ import annotations

import json
import math
import time
from collections import deque
from dataclasses import dataclass

from .errors import OrderingError, ParseError, RangeError, SchemaError, SessionError

# Accepted channels and their open (exclusive) physiological bounds.
# Out-of-range samples are rejected, never clamped, so artifacts cannot
# skew calibration extrema.
CHANNEL_BOUNDS = {
    "hr": (20.0, 250.0),     # beats/min
    "rr": (200.0, 3000.0),   # inter-beat interval, ms
    "eda": (0.0, 100.0),     # skin conductance, microsiemens
    "temp": (20.0, 45.0),    # skin temperature, degC
}

CHANNELS = tuple(CHANNEL_BOUNDS)

DEFAULT_CAPACITY = 128  # >= 2x the 50-sample feature window

_REQUIRED_FIELDS = ("student_id", "ts_ms", "channel", "value")


@dataclass(frozen=True)
class SensorSample:
    """One timestamped reading of one physiological channel for one student."""

    student_id: str
    ts_ms: int
    channel: str
    value: float


def validate_sample(sample: SensorSample) -> SensorSample:
    """Check field types and physiological bounds; raise on violation."""
    if not isinstance(sample.student_id, str) or not sample.student_id:
        raise SchemaError("field 'student_id' must be a non-empty string")
    if isinstance(sample.ts_ms, bool) or not isinstance(sample.ts_ms, int):
        raise SchemaError("field 'ts_ms' must be an integer")
    if sample.channel not in CHANNEL_BOUNDS:
        raise SchemaError(
            f"field 'channel' must be one of {sorted(CHANNEL_BOUNDS)}, got {sample.channel!r}"
        )
    value = sample.value
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise SchemaError("field 'value' must be a number")
    if not math.isfinite(value):
        raise RangeError("value", f"field 'value' must be finite, got {value!r}")
    lo, hi = CHANNEL_BOUNDS[sample.channel]
    if not lo < value < hi:
        raise RangeError(
            "value",
            f"field 'value'={value} outside ({lo}, {hi}) for channel {sample.channel!r}",
        )
    return sample


def parse_sample(line: str) -> SensorSample:
    """Parse one NDJSON record into a validated SensorSample.

    Unknown fields are ignored. Raises ParseError for malformed JSON,
    SchemaError for a missing or mistyped field, RangeError for an
    out-of-range value.
    """
    try:
        obj = json.loads(line)
    except (json.JSONDecodeError, TypeError) as exc:
        raise ParseError(f"malformed JSON record: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError("record must be a JSON object")
    for field in _REQUIRED_FIELDS:
        if field not in obj:
            raise SchemaError(f"missing field {field!r}")
    sample = SensorSample(
        student_id=obj["student_id"],
        ts_ms=obj["ts_ms"],
        channel=obj["channel"],
        value=obj["value"],
    )
    validate_sample(sample)
    # normalize value to float so render/parse round-trips exactly
    return SensorSample(sample.student_id, sample.ts_ms, sample.channel, float(sample.value))


def render_sample(sample: SensorSample) -> str:
    """Inverse of parse_sample: one NDJSON line."""
    return json.dumps(
        {
            "student_id": sample.student_id,
            "ts_ms": sample.ts_ms,
            "channel": sample.channel,
            "value": sample.value,
        },
        separators=(",", ":"),
    )


class StudentStream:
    """Per-channel ring buffers of the most recent samples for one student.

    Buffers preserve arrival order; when full the oldest sample is evicted.
    Appends for a given (student, channel) are single-writer; readers take
    list() snapshots which are atomic under the GIL.
    """

    def __init__(self, student_id: str, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.student_id = student_id
        self.capacity = capacity
        self.buffers = {ch: deque(maxlen=capacity) for ch in CHANNELS}
        self.last_seen_ms = None

    def append(self, sample: SensorSample) -> None:
        buf = self.buffers[sample.channel]
        if buf and sample.ts_ms < buf[-1][0]:
            raise OrderingError(
                f"ts_ms {sample.ts_ms} precedes {buf[-1][0]} on "
                f"({self.student_id}, {sample.channel})"
            )
        buf.append((sample.ts_ms, sample.value))
        if self.last_seen_ms is None or sample.ts_ms > self.last_seen_ms:
            self.last_seen_ms = sample.ts_ms

    def values(self, channel: str) -> list:
        """Snapshot of (ts_ms, value) pairs in arrival order."""
        return list(self.buffers[channel])

    def channel_values(self, channel: str) -> list:
        return [v for _, v in self.buffers[channel]]


class StreamSet:
    """All student streams for one session.

    With a roster, samples from unknown students are rejected; without
    one, streams are created on first sight.
    """

    def __init__(self, roster=None, capacity: int = DEFAULT_CAPACITY):
        self.capacity = capacity
        self.roster = set(roster) if roster is not None else None
        self.streams: dict[str, StudentStream] = {}
        if self.roster:
            for sid in self.roster:
                self.streams[sid] = StudentStream(sid, capacity)

    def stream(self, student_id: str) -> StudentStream:
        if student_id not in self.streams:
            if self.roster is not None:
                raise SessionError(f"student {student_id!r} is not on the session roster")
            self.streams[student_id] = StudentStream(student_id, self.capacity)
        return self.streams[student_id]

    def ingest_sample(self, sample: SensorSample) -> StudentStream:
        """Append a validated sample to its (student, channel) buffer."""
        stream = self.stream(sample.student_id)
        stream.append(sample)
        return stream

    def ingest_line(self, line: str) -> SensorSample:
        """Parse, validate and buffer one NDJSON record."""
        sample = parse_sample(line)
        self.ingest_sample(sample)
        return sample


def replay_file(path, speed_factor: float = 0.0):
    """Yield samples from an NDJSON file, paced at real-time/speed_factor.

    speed_factor 0 means as fast as possible. The file must be sorted by
    ts_ms; the generator raises OrderingError after the last valid record.
    """
    if speed_factor < 0:
        raise ValueError("speed_factor must be >= 0")
    start_wall = time.monotonic()
    first_ts = None
    prev_ts = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            sample = parse_sample(line)
            if prev_ts is not None and sample.ts_ms < prev_ts:
                raise OrderingError(
                    f"line {lineno}: ts_ms {sample.ts_ms} precedes {prev_ts}; emission halted"
                )
            prev_ts = sample.ts_ms
            if first_ts is None:
                first_ts = sample.ts_ms
            if speed_factor > 0:
                due = start_wall + (sample.ts_ms - first_ts) / 1000.0 / speed_factor
                delay = due - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            yield sample
