"""Per-student min-max normalization of raw features.

Each student's running extrema map their physiology into a common space:
f' = (f - f_min) / (f_max - f_min), clamped to [0, 1]. Extrema accumulate
during a calibration epoch and are then frozen for the session so a
mid-lecture spike cannot silently re-scale the space.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import CalibrationRequiredError
from .features import FEATURE_NAMES, FeatureVector

DEFAULT_MIN_SAMPLES = 50


class CalibrationState:
    """Running per-student, per-feature extrema plus sample counts.

    output_range "unit" maps to [0, 1] (the printed min-max formula);
    "symmetric" remaps to 2f'-1 for [-1, 1].
    """

    def __init__(self, min_samples: int = DEFAULT_MIN_SAMPLES, output_range: str = "unit"):
        if output_range not in ("unit", "symmetric"):
            raise ValueError("output_range must be 'unit' or 'symmetric'")
        self.min_samples = min_samples
        self.output_range = output_range
        # student -> feature -> {"f_min", "f_max", "count", "frozen"}
        self.students: dict[str, dict] = {}

    def _entries(self, student_id):
        return self.students.setdefault(
            student_id,
            {
                name: {"f_min": None, "f_max": None, "count": 0, "frozen": False}
                for name in FEATURE_NAMES
            },
        )

    def update_extrema(self, student_id: str, vector) -> None:
        """Fold one feature vector into the student's running extrema.

        Frozen entries are left untouched (the epoch has ended).
        """
        values = vector.as_array() if isinstance(vector, FeatureVector) else np.asarray(vector, dtype=float)
        if values.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"expected {len(FEATURE_NAMES)} features, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must be finite")
        entries = self._entries(student_id)
        for name, value in zip(FEATURE_NAMES, values):
            entry = entries[name]
            if entry["frozen"]:
                continue
            value = float(value)
            if entry["f_min"] is None or value < entry["f_min"]:
                entry["f_min"] = value
            if entry["f_max"] is None or value > entry["f_max"]:
                entry["f_max"] = value
            entry["count"] += 1

    def count(self, student_id: str) -> int:
        entries = self.students.get(student_id)
        if not entries:
            return 0
        return min(entry["count"] for entry in entries.values())

    def freeze(self, student_id: str = None) -> None:
        """End the calibration epoch for one student (or all of them)."""
        targets = [student_id] if student_id is not None else list(self.students)
        for sid in targets:
            for entry in self.students[sid].values():
                entry["frozen"] = True

    def is_calibrated(self, student_id: str) -> bool:
        return self.count(student_id) >= self.min_samples

    def normalize(self, student_id: str, vector):
        """Map a feature vector through the student's extrema.

        Returns (calibrated array in the output range, low_variance flags).
        A degenerate feature (f_max == f_min) maps to the midpoint and sets
        its low-variance flag.
        """
        entries = self.students.get(student_id)
        if entries is None:
            raise CalibrationRequiredError(f"student {student_id!r} has no calibration data")
        count = self.count(student_id)
        if count < self.min_samples:
            raise CalibrationRequiredError(
                f"student {student_id!r} calibrated over {count} samples; "
                f"{self.min_samples} required"
            )
        values = vector.as_array() if isinstance(vector, FeatureVector) else np.asarray(vector, dtype=float)
        out = np.empty(len(FEATURE_NAMES), dtype=float)
        low_variance = np.zeros(len(FEATURE_NAMES), dtype=bool)
        for i, (name, value) in enumerate(zip(FEATURE_NAMES, values)):
            entry = entries[name]
            span = entry["f_max"] - entry["f_min"]
            if span == 0.0:
                out[i] = 0.5
                low_variance[i] = True
            else:
                out[i] = min(1.0, max(0.0, (float(value) - entry["f_min"]) / span))
        if self.output_range == "symmetric":
            out = 2.0 * out - 1.0
        return out, low_variance

    def to_json(self) -> str:
        return json.dumps(self.students, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, min_samples: int = DEFAULT_MIN_SAMPLES,
                  output_range: str = "unit") -> "CalibrationState":
        state = cls(min_samples=min_samples, output_range=output_range)
        state.students = json.loads(text)
        return state


def calibrate_rows(user_ids, features, min_samples: int = 1, per_user: bool = True):
    """Batch-calibrate dataset rows (rows x 6 features array).

    per_user=True gives each user their own extrema; per_user=False pools
    extrema across all users (the non-personalized ablation). Extrema come
    from the dataset itself, so this is an offline calibration epoch.
    """
    features = np.asarray(features, dtype=float)
    state = CalibrationState(min_samples=min_samples)
    keys = list(user_ids) if per_user else ["__pooled__"] * len(user_ids)
    for key, row in zip(keys, features):
        state.update_extrema(key, row)
    state.freeze()
    out = np.empty_like(features)
    for i, (key, row) in enumerate(zip(keys, features)):
        out[i], _ = state.normalize(key, row)
    return out, state
