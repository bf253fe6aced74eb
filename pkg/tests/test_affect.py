import json
import math

import numpy as np
import pytest

from affectloop.affect import (
    DATASET_HEADER,
    DEFAULT_KERNEL_SCALE,
    EMOTIONS,
    FuzzyConfig,
    VaModel,
    VAPoint,
    classify_emotion,
    knn_predict_va,
    load_dataset,
    predict_va,
    rescale_label,
    save_dataset,
    train_regressor,
)
from affectloop.svr import SvrModel, check_kkt, fit_svr, gaussian_kernel, smo_train


def test_kernel_scale_default_matches_fine_gaussian_convention():
    assert DEFAULT_KERNEL_SCALE == pytest.approx(math.sqrt(6) / 4)


# --- SVR core -------------------------------------------------------------

def test_smo_two_point_closed_form():
    # symmetric two-point problem: beta = (d - eps) / (1 - k), residual
    # pinned at the tube edge
    X = np.zeros((2, 6))
    X[1, 0] = 0.5
    scale = 0.6
    k = math.exp(-0.25 / (2 * scale**2))
    d = 0.5
    eps = 0.1
    K = gaussian_kernel(X, X, scale)
    fit = smo_train(K, np.array([d, -d]), c=100.0, epsilon=eps, tol=1e-6)
    expected = (d - eps) / (1.0 - k)
    assert fit.beta[0] == pytest.approx(expected, abs=1e-4)
    assert fit.beta[1] == pytest.approx(-expected, abs=1e-4)
    assert fit.bias == pytest.approx(0.0, abs=1e-4)


def test_smo_constant_target_is_exact_zero():
    rng = np.random.default_rng(2)
    X = rng.uniform(0, 1, size=(40, 6))
    K = gaussian_kernel(X, X, 0.6)
    fit = smo_train(K, np.zeros(40), c=1.0, epsilon=0.1)
    assert np.all(fit.beta == 0.0)
    assert fit.bias == 0.0


def test_smo_kkt_certificate_random_problems():
    # KKT within tolerance certifies global optimality of the convex dual
    rng = np.random.default_rng(7)
    for trial in range(8):
        n = int(rng.integers(30, 150))
        X = rng.uniform(0, 1, size=(n, 6))
        y = np.clip(
            0.7 * np.sin(3 * X[:, 0]) + 0.4 * X[:, 1] - 0.3 * X[:, 2]
            + 0.05 * rng.standard_normal(n),
            -1, 1,
        )
        c = float(rng.choice([0.5, 1.0, 10.0]))
        K = gaussian_kernel(X, X, 0.6)
        fit = smo_train(K, y, c=c, epsilon=0.1, tol=1e-3)
        assert check_kkt(K, y, fit.beta, fit.bias, c, 0.1) <= 1e-3
        assert abs(fit.beta.sum()) < 1e-9


def test_fit_svr_interpolating_fit_stays_in_tube():
    # noise-free smooth target with generous C: every training residual
    # within epsilon plus slack
    rng = np.random.default_rng(4)
    X = rng.uniform(0, 1, size=(80, 6))
    y = 0.5 * X[:, 0] - 0.4 * X[:, 4] + 0.2
    model = fit_svr(X, y, scale=0.6, c=100.0, epsilon=0.1)
    err = np.abs(model.predict(X) - y)
    assert err.max() <= 0.1 + 0.05


def test_svr_model_json_round_trip():
    rng = np.random.default_rng(5)
    X = rng.uniform(0, 1, size=(50, 6))
    y = np.clip(X[:, 0] - 0.5, -1, 1)
    model = fit_svr(X, y, scale=0.6, c=1.0, epsilon=0.05)
    restored = SvrModel.from_dict(json.loads(json.dumps(model.to_dict())))
    x_new = rng.uniform(0, 1, size=(10, 6))
    assert np.allclose(model.predict(x_new), restored.predict(x_new), atol=0)


# --- training pipeline ----------------------------------------------------

def _smooth_rows(n, rng):
    X = rng.uniform(0, 1, size=(n, 6))
    v = np.clip(1.6 * X[:, 0] - 0.8, -1, 1)
    a = np.clip(1.6 * X[:, 1] - 0.8, -1, 1)
    return X, 5 + 4 * v, 5 + 4 * a


def test_train_constant_labels_predicts_zero():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 1, size=(60, 6))
    model, report = train_regressor(X, np.full(60, 5.0), np.full(60, 5.0), seed=0, grid=False)
    preds = model.predict(X)
    assert np.abs(preds).max() <= 0.1  # within epsilon of 0
    assert report["rmse"]["valence"]["test"] <= 0.1


def test_train_too_few_rows():
    X = np.random.default_rng(0).uniform(0, 1, size=(10, 6))
    with pytest.raises(ValueError):
        train_regressor(X, np.full(10, 5.0), np.full(10, 5.0))


def test_train_rejects_out_of_scale_labels():
    X = np.random.default_rng(0).uniform(0, 1, size=(40, 6))
    with pytest.raises(ValueError):
        train_regressor(X, np.full(40, 11.0), np.full(40, 5.0))


def test_train_recovers_smooth_map():
    rng = np.random.default_rng(1)
    X, val, aro = _smooth_rows(300, rng)
    model, report = train_regressor(X, val, aro, seed=0, grid=False, c=10.0)
    for target in ("valence", "arousal"):
        assert report["rmse"][target]["test"] <= 0.15


def test_predict_va_determinism_and_bounds():
    rng = np.random.default_rng(3)
    X, val, aro = _smooth_rows(80, rng)
    model, _ = train_regressor(X, val, aro, seed=0, grid=False)
    x = rng.uniform(0, 1, size=6)
    p1 = predict_va(model, x)
    p2 = predict_va(model, x)
    assert p1 == p2
    assert -1 <= p1.valence <= 1 and -1 <= p1.arousal <= 1


def test_predict_va_rejects_out_of_range_input():
    rng = np.random.default_rng(3)
    X, val, aro = _smooth_rows(60, rng)
    model, _ = train_regressor(X, val, aro, seed=0, grid=False)
    bad = np.full(6, 0.5)
    bad[2] = 1.7
    with pytest.raises(ValueError):
        predict_va(model, bad)


def test_model_file_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    X, val, aro = _smooth_rows(60, rng)
    model, _ = train_regressor(X, val, aro, seed=0, grid=False)
    path = tmp_path / "model.json"
    model.save(path)
    restored = VaModel.load(path)
    x_new = rng.uniform(0, 1, size=(20, 6))
    assert np.array_equal(model.predict(x_new), restored.predict(x_new))
    obj = json.loads(path.read_text())
    assert obj["feature_space"] == model.feature_space
    assert {"kernel_scale", "c", "epsilon", "targets"} <= set(obj)


# --- fuzzy emotion mapping ------------------------------------------------

def test_quadrant_centers_classify_to_their_emotion():
    assert classify_emotion(VAPoint(0.5, 0.5)).label == "curious"
    assert classify_emotion(VAPoint(-0.5, -0.5)).label == "bored"
    assert classify_emotion(VAPoint(0.5, -0.5)).label == "satisfied"
    assert classify_emotion(VAPoint(-0.5, 0.5)).label == "confused"


def test_origin_ties_break_to_bored():
    state = classify_emotion(VAPoint(0.0, 0.0))
    assert state.label == "bored"
    for m in state.memberships.values():
        assert m == pytest.approx(0.25, abs=1e-12)


def test_memberships_normalized_and_positive():
    rng = np.random.default_rng(8)
    for _ in range(200):
        p = VAPoint(rng.uniform(-1, 1), rng.uniform(-1, 1))
        state = classify_emotion(p)
        vals = list(state.memberships.values())
        assert sum(vals) == pytest.approx(1.0, abs=1e-9)
        assert all(0 < m < 1 for m in vals)
        assert state.confidence == pytest.approx(max(vals))


def test_quadrant_consistency_away_from_axes():
    rng = np.random.default_rng(9)
    quadrant_emotion = {
        (1, 1): "curious", (1, -1): "satisfied", (-1, 1): "confused", (-1, -1): "bored",
    }
    for _ in range(300):
        sv, sa = rng.choice([-1, 1]), rng.choice([-1, 1])
        v = sv * rng.uniform(0.3, 1.0)
        a = sa * rng.uniform(0.3, 1.0)
        assert classify_emotion(VAPoint(v, a)).label == quadrant_emotion[(sv, sa)]


def test_label_invariant_under_monotone_membership_transform():
    # argmax of raw memberships decides the label; renormalization or any
    # strictly increasing transform cannot change it
    rng = np.random.default_rng(10)
    cfg = FuzzyConfig()
    for _ in range(100):
        p = VAPoint(rng.uniform(-1, 1), rng.uniform(-1, 1))
        state = classify_emotion(p, cfg)
        raw = {
            e: math.exp(
                -((p.valence - cfg.centers[e][0]) ** 2 + (p.arousal - cfg.centers[e][1]) ** 2)
                / (2 * cfg.sigma**2)
            )
            for e in EMOTIONS
        }
        transformed = {e: math.log(m) * 3.0 + 7.0 for e, m in raw.items()}
        best = max(EMOTIONS, key=lambda e: (transformed[e], -EMOTIONS.index(e)))
        assert state.label == best


def test_classify_rejects_out_of_bounds_point():
    with pytest.raises(ValueError):
        classify_emotion(VAPoint(1.5, 0.0))


def test_custom_fuzzy_config_is_respected():
    flipped = FuzzyConfig(
        centers={
            "bored": (0.5, 0.5), "satisfied": (-0.5, 0.5),
            "curious": (-0.5, -0.5), "confused": (0.5, -0.5),
        }
    )
    assert classify_emotion(VAPoint(0.5, 0.5), flipped).label == "bored"


# --- dataset io and baseline ----------------------------------------------

def test_dataset_csv_round_trip(tmp_path):
    rng = np.random.default_rng(12)
    users = [f"u{i%3}" for i in range(30)]
    stim = [f"img{i}" for i in range(30)]
    X = rng.uniform(0, 50, size=(30, 6))
    val = rng.uniform(1, 9, size=30).round(4)
    aro = rng.uniform(1, 9, size=30).round(4)
    path = tmp_path / "data.csv"
    save_dataset(path, users, stim, X, val, aro)
    u2, s2, X2, v2, a2 = load_dataset(path)
    assert u2 == users and s2 == stim
    assert np.allclose(X2, X, atol=1e-6)
    assert np.allclose(v2, val, atol=1e-4) and np.allclose(a2, aro, atol=1e-4)
    assert path.read_text().splitlines()[0] == ",".join(DATASET_HEADER)


def test_rescale_label_endpoints():
    assert rescale_label(5.0) == 0.0
    assert rescale_label(1.0) == -1.0
    assert rescale_label(9.0) == 1.0


def test_knn_baseline_interpolates():
    rng = np.random.default_rng(13)
    X = rng.uniform(0, 1, size=(200, 6))
    val = 5 + 4 * np.clip(X[:, 0] - 0.5, -1, 1)
    aro = 5 + 4 * np.clip(X[:, 1] - 0.5, -1, 1)
    pred = knn_predict_va(X, val, aro, X[:10], k=5)
    truth = np.stack([rescale_label(val[:10]), rescale_label(aro[:10])], axis=1)
    assert np.abs(pred - truth).max() < 0.25
