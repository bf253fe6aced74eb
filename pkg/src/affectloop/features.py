"""Six physiological features over sliding windows of the per-student streams.

Levels (SCL, STL, HR) are moving averages; responses (SCR, STR, HRV) are
running deviations, with HRV computed as RMSSD over the RR stream. All
statistics use the most recent min(window, available) samples, so partial
windows still produce output during warm-up.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, WarmupError

DEFAULT_WINDOW = 50

# Canonical feature order, matching the dataset CSV columns.
FEATURE_NAMES = ("scr", "scl", "hr", "hrv", "str", "stl")


@dataclass(frozen=True)
class FeatureVector:
    """Snapshot of the six features at the end of a window."""

    scr: float        # skin conductance response: running deviation of eda (uS)
    scl: float        # skin conductance level: moving average of eda (uS)
    hr: float         # moving-average heart rate (beats/min)
    hrv: float        # RMSSD over rr intervals (ms)
    str_resp: float   # skin temperature response: running deviation of temp (degC)
    stl: float        # skin temperature level: moving average of temp (degC)
    window_end_ts: int
    sample_counts: dict

    def as_array(self) -> np.ndarray:
        """Features in FEATURE_NAMES order."""
        return np.array(
            [self.scr, self.scl, self.hr, self.hrv, self.str_resp, self.stl], dtype=float
        )


def moving_average(values, window: int = DEFAULT_WINDOW) -> float:
    """Arithmetic mean of the most recent min(window, available) values."""
    if window < 1:
        raise ValueError("window must be >= 1")
    tail = np.asarray(values, dtype=float)[-window:]
    if tail.size == 0:
        raise InsufficientDataError("moving_average needs at least 1 value")
    return float(tail.mean())


def running_deviation(values, window: int = DEFAULT_WINDOW) -> float:
    """Sample standard deviation (n-1 denominator) of the most recent window."""
    if window < 2:
        raise ValueError("window must be >= 2")
    tail = np.asarray(values, dtype=float)[-window:]
    if tail.size < 2:
        raise InsufficientDataError("running_deviation needs at least 2 values")
    if tail.min() == tail.max():
        return 0.0  # exactly zero on constant input, no rounding residue
    return float(tail.std(ddof=1))


def rmssd(rr_intervals, window: int = DEFAULT_WINDOW) -> float:
    """Root mean square of successive differences over the most recent window (ms)."""
    if window < 2:
        raise ValueError("window must be >= 2")
    tail = np.asarray(rr_intervals, dtype=float)[-window:]
    if tail.size < 2:
        raise InsufficientDataError("rmssd needs at least 2 rr values")
    diffs = np.diff(tail)
    return float(np.sqrt(np.mean(diffs * diffs)))


def extract_features(stream, window: int = DEFAULT_WINDOW) -> FeatureVector:
    """Compute the six-feature snapshot from a StudentStream.

    Raises WarmupError naming the first channel that is still short of its
    minimum (2 samples for deviation channels, 1 for hr). Expected during
    roughly the first window at 1 Hz.
    """
    minimums = {"eda": 2, "hr": 1, "rr": 2, "temp": 2}
    values = {}
    for channel, minimum in minimums.items():
        vals = stream.channel_values(channel)
        if len(vals) < minimum:
            raise WarmupError(channel)
        values[channel] = vals

    counts = {ch: min(len(v), window) for ch, v in values.items()}
    end_ts = stream.last_seen_ms if stream.last_seen_ms is not None else 0
    return FeatureVector(
        scr=running_deviation(values["eda"], window),
        scl=moving_average(values["eda"], window),
        hr=moving_average(values["hr"], window),
        hrv=rmssd(values["rr"], window),
        str_resp=running_deviation(values["temp"], window),
        stl=moving_average(values["temp"], window),
        window_end_ts=end_ts,
        sample_counts=counts,
    )
