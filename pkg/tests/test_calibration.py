import numpy as np
import pytest

from affectloop.calibration import CalibrationState, calibrate_rows
from affectloop.errors import CalibrationRequiredError
from affectloop.features import FEATURE_NAMES


def _vec(hr=70.0, scr=0.5, scl=2.0, hrv=20.0, str_=0.1, stl=33.0):
    return np.array([scr, scl, hr, hrv, str_, stl])


def test_first_observation_sets_both_extrema():
    state = CalibrationState(min_samples=1)
    state.update_extrema("s1", _vec(hr=70))
    entry = state.students["s1"]["hr"]
    assert entry["f_min"] == entry["f_max"] == 70.0
    assert entry["count"] == 1


def test_extrema_expand_and_hold():
    state = CalibrationState(min_samples=1)
    state.update_extrema("s1", _vec(hr=60))
    state.update_extrema("s1", _vec(hr=80))
    state.update_extrema("s1", _vec(hr=85))
    assert state.students["s1"]["hr"]["f_max"] == 85.0
    state.update_extrema("s1", _vec(hr=70))
    assert state.students["s1"]["hr"]["f_min"] == 60.0
    assert state.students["s1"]["hr"]["f_max"] == 85.0


def test_normalize_midpoint_and_endpoints():
    state = CalibrationState(min_samples=2)
    state.update_extrema("s1", np.zeros(6))
    state.update_extrema("s1", np.full(6, 10.0))
    mid, flags = state.normalize("s1", np.full(6, 5.0))
    assert np.allclose(mid, 0.5)
    assert not flags.any()
    lo, _ = state.normalize("s1", np.zeros(6))
    hi, _ = state.normalize("s1", np.full(6, 10.0))
    assert np.allclose(lo, 0.0)
    assert np.allclose(hi, 1.0)


def test_normalize_clamps_out_of_range_values():
    state = CalibrationState(min_samples=2)
    state.update_extrema("s1", np.zeros(6))
    state.update_extrema("s1", np.full(6, 10.0))
    out, _ = state.normalize("s1", np.full(6, 25.0))
    assert np.allclose(out, 1.0)
    out, _ = state.normalize("s1", np.full(6, -3.0))
    assert np.allclose(out, 0.0)


def test_degenerate_feature_maps_to_midpoint_with_flag():
    state = CalibrationState(min_samples=2)
    state.update_extrema("s1", _vec(stl=33.0, hr=60))
    state.update_extrema("s1", _vec(stl=33.0, hr=80))
    out, flags = state.normalize("s1", _vec(stl=33.0, hr=70))
    stl_idx = FEATURE_NAMES.index("stl")
    assert out[stl_idx] == 0.5
    assert flags[stl_idx]
    assert not flags[FEATURE_NAMES.index("hr")]


def test_uncalibrated_student_raises():
    state = CalibrationState(min_samples=50)
    with pytest.raises(CalibrationRequiredError):
        state.normalize("ghost", np.zeros(6))
    state.update_extrema("s1", np.zeros(6))
    with pytest.raises(CalibrationRequiredError):
        state.normalize("s1", np.zeros(6))


def test_normalize_monotone_in_feature_value():
    rng = np.random.default_rng(3)
    state = CalibrationState(min_samples=2)
    for _ in range(40):
        state.update_extrema("s1", rng.uniform(0, 10, size=6))
    values = np.sort(rng.uniform(-2, 12, size=50))
    hr_idx = FEATURE_NAMES.index("hr")
    outs = []
    for v in values:
        vec = np.full(6, 5.0)
        vec[hr_idx] = v
        out, _ = state.normalize("s1", vec)
        outs.append(out[hr_idx])
    assert all(b >= a for a, b in zip(outs, outs[1:]))
    assert all(0.0 <= o <= 1.0 for o in outs)


def test_symmetric_output_range():
    state = CalibrationState(min_samples=2, output_range="symmetric")
    state.update_extrema("s1", np.zeros(6))
    state.update_extrema("s1", np.full(6, 10.0))
    out, _ = state.normalize("s1", np.full(6, 7.5))
    assert np.allclose(out, 0.5)  # 2*0.75 - 1
    lo, _ = state.normalize("s1", np.zeros(6))
    assert np.allclose(lo, -1.0)


def test_affine_distortion_invariance():
    # the testable core of the calibration claim: alpha*f + beta with
    # alpha > 0 leaves calibrated outputs identical once extrema are
    # recomputed on the distorted stream
    rng = np.random.default_rng(11)
    for _ in range(60):
        n = int(rng.integers(3, 60))
        raw = rng.uniform(-30, 90, size=(n, 6))
        alpha = rng.uniform(0.5, 2.0, size=6)
        beta = rng.uniform(-10.0, 10.0, size=6)
        distorted = raw * alpha + beta

        plain = CalibrationState(min_samples=2)
        warped = CalibrationState(min_samples=2)
        for row in raw:
            plain.update_extrema("u", row)
        for row in distorted:
            warped.update_extrema("u", row)
        for row, drow in zip(raw, distorted):
            a, _ = plain.normalize("u", row)
            b, _ = warped.normalize("u", drow)
            assert np.allclose(a, b, atol=1e-12)


def test_frozen_entries_stop_updating():
    state = CalibrationState(min_samples=1)
    state.update_extrema("s1", np.zeros(6))
    state.freeze("s1")
    state.update_extrema("s1", np.full(6, 99.0))
    assert state.students["s1"]["hr"]["f_max"] == 0.0
    assert state.students["s1"]["hr"]["count"] == 1


def test_json_round_trip_field_names():
    state = CalibrationState(min_samples=1)
    state.update_extrema("s1", _vec())
    state.freeze("s1")
    text = state.to_json()
    restored = CalibrationState.from_json(text, min_samples=1)
    assert restored.students == state.students
    entry = restored.students["s1"]["hr"]
    assert set(entry) == {"f_min", "f_max", "count", "frozen"}
    assert entry["frozen"] is True


def test_calibrate_rows_per_user_vs_pooled():
    rng = np.random.default_rng(21)
    users = ["a"] * 100 + ["b"] * 100
    base = np.concatenate([np.zeros((100, 6)), np.full((100, 6), 50.0)])
    signal = rng.uniform(0, 1, size=(200, 6))
    rows = base + signal
    per_user, _ = calibrate_rows(users, rows, per_user=True)
    pooled, _ = calibrate_rows(users, rows, per_user=False)
    assert per_user.min() >= 0 and per_user.max() <= 1
    # per-user calibration removes the 50-unit baseline gap; pooled keeps it
    gap_per_user = abs(per_user[:100].mean() - per_user[100:].mean())
    gap_pooled = abs(pooled[:100].mean() - pooled[100:].mean())
    assert gap_per_user < 0.1
    assert gap_pooled > 0.5
