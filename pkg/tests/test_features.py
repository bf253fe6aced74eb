import math

import numpy as np
import pytest

from affectloop.errors import InsufficientDataError, WarmupError
from affectloop.features import (
    FeatureVector,
    extract_features,
    moving_average,
    rmssd,
    running_deviation,
)
from affectloop.ingest import SensorSample, StudentStream


# brute-force oracles: whole-sequence recomputation straight from the
# definitions, independent of any incremental path

def oracle_mean(values, window):
    tail = values[-window:]
    return sum(tail) / len(tail)


def oracle_std(values, window):
    tail = values[-window:]
    m = sum(tail) / len(tail)
    return math.sqrt(sum((v - m) ** 2 for v in tail) / (len(tail) - 1))


def oracle_rmssd(values, window):
    tail = values[-window:]
    diffs = [b - a for a, b in zip(tail, tail[1:])]
    return math.sqrt(sum(d * d for d in diffs) / len(diffs))


def test_moving_average_examples():
    assert moving_average([1, 1, 1, 1], 50) == 1.0
    assert moving_average([1, 2, 3], 2) == 2.5
    with pytest.raises(InsufficientDataError):
        moving_average([], 50)


def test_running_deviation_examples():
    assert running_deviation([5, 5, 5]) == 0.0
    assert running_deviation([1, 3]) == pytest.approx(math.sqrt(2), abs=1e-12)
    with pytest.raises(InsufficientDataError):
        running_deviation([7])


def test_rmssd_examples():
    assert rmssd([800, 800, 800]) == 0.0
    assert rmssd([800, 810, 790]) == pytest.approx(math.sqrt(250), abs=1e-12)
    assert rmssd([800, 810, 790]) == pytest.approx(15.811388300841896, abs=1e-9)
    with pytest.raises(InsufficientDataError):
        rmssd([1000])


def test_statistics_match_brute_force_oracles():
    rng = np.random.default_rng(123)
    for _ in range(200):
        n = int(rng.integers(2, 400))
        window = int(rng.integers(2, 80))
        values = (rng.standard_normal(n) * rng.uniform(0.5, 50) + rng.uniform(-100, 100)).tolist()
        assert moving_average(values, window) == pytest.approx(
            oracle_mean(values, window), rel=1e-9
        )
        assert running_deviation(values, window) == pytest.approx(
            oracle_std(values, window), rel=1e-9, abs=1e-9
        )
        assert rmssd(values, window) == pytest.approx(
            oracle_rmssd(values, window), rel=1e-9, abs=1e-9
        )


def test_rmssd_shift_invariance():
    rng = np.random.default_rng(5)
    for _ in range(50):
        x = rng.uniform(600, 1000, size=int(rng.integers(2, 120)))
        c = rng.uniform(-500, 500)
        assert rmssd(x + c, 50) == pytest.approx(rmssd(x, 50), abs=1e-9)


def test_deviations_nonnegative_and_zero_on_constants():
    rng = np.random.default_rng(9)
    for _ in range(50):
        x = rng.uniform(-10, 10, size=int(rng.integers(2, 60)))
        assert running_deviation(x, 50) >= 0.0
        assert rmssd(x, 50) >= 0.0
    assert running_deviation([4.2] * 30, 50) == 0.0
    assert rmssd([812.0] * 30, 50) == 0.0


def _stream_with(eda=(), hr=(), rr=(), temp=()):
    stream = StudentStream("s1")
    t = 0
    for ch, vals in (("eda", eda), ("hr", hr), ("rr", rr), ("temp", temp)):
        for i, v in enumerate(vals):
            stream.append(SensorSample("s1", t + i * 1000, ch, float(v)))
    return stream


def test_extract_constant_streams():
    stream = _stream_with(eda=[2.0] * 10, hr=[70.0] * 10, rr=[850.0] * 10, temp=[33.0] * 10)
    fv = extract_features(stream)
    assert isinstance(fv, FeatureVector)
    assert fv.scr == 0.0
    assert fv.scl == 2.0
    assert fv.hr == 70.0
    assert fv.hrv == 0.0
    assert fv.str_resp == 0.0
    assert fv.stl == 33.0


def test_extract_partial_window_uses_available():
    stream = _stream_with(eda=range(1, 11), hr=[70] * 10, rr=[850] * 10, temp=[33] * 10)
    fv = extract_features(stream, window=50)
    assert fv.scl == pytest.approx(5.5)  # mean of 1..10
    assert fv.sample_counts["eda"] == 10


def test_extract_window_limits_lookback():
    stream = _stream_with(
        eda=[9.0] * 30 + [1.0] * 50, hr=[70] * 80, rr=[850] * 80, temp=[33] * 80
    )
    fv = extract_features(stream, window=50)
    assert fv.scl == 1.0
    assert fv.scr == 0.0


def test_extract_warmup_error_names_channel():
    stream = _stream_with(eda=[2.0], hr=[70] * 5, rr=[850] * 5, temp=[33] * 5)
    with pytest.raises(WarmupError) as exc:
        extract_features(stream)
    assert exc.value.channel == "eda"


def test_feature_vector_array_order():
    fv = FeatureVector(
        scr=1, scl=2, hr=3, hrv=4, str_resp=5, stl=6, window_end_ts=0, sample_counts={}
    )
    assert fv.as_array().tolist() == [1, 2, 3, 4, 5, 6]
