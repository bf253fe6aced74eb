"""
From features to emotions
=========================

Generates a heterogeneous synthetic population, trains the two
Gaussian-kernel support vector regressors (valence and arousal), and
scores end-to-end 4-class emotion recognition on held-out rows, with
and without per-student calibration.
"""

import numpy as np

from affectloop.affect import VAPoint, classify_emotion, train_regressor
from affectloop.calibration import calibrate_rows
from affectloop.simulator import generate_dataset

train = generate_dataset(6, 120, seed=3)
check = generate_dataset(6, 120, seed=3, row_seed=77)  # same students, new stimuli
truth = [row["true_emotion"] for row in check["truth"]]


def accuracy(model, X):
    preds = model.predict(X)
    labels = [classify_emotion(VAPoint(v, a)).label for v, a in preds]
    return np.mean([p == t for p, t in zip(labels, truth)])


x_train, _ = calibrate_rows(train["users"], train["X"])
x_check, _ = calibrate_rows(check["users"], check["X"])
model, report = train_regressor(x_train, train["valence"], train["arousal"],
                                seed=0, grid=False, c=10.0)
print("validation RMSE (rescaled space):",
      {t: round(report["rmse"][t]["validation"], 3) for t in report["rmse"]})
print("support vectors:", report["n_support"])
print(f"held-out 4-class accuracy, calibrated: {accuracy(model, x_check):.3f}")

raw_model, _ = train_regressor(train["X"], train["valence"], train["arousal"],
                               seed=0, grid=False, c=10.0)
print(f"held-out 4-class accuracy, raw:        {accuracy(raw_model, check['X']):.3f}")

print("\nA single prediction walk-through:")
x = x_check[0]
va = model.predict(x)[0]
state = classify_emotion(VAPoint(*va))
print(f"  calibrated features -> VA ({va[0]:+.2f}, {va[1]:+.2f}) -> {state.label} "
      f"(confidence {state.confidence:.2f})")
print(f"  ground truth: {truth[0]}")
