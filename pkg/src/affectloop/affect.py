"""Valence/arousal regression and fuzzy mapping to learning emotions.

Two Gaussian-kernel SVRs (one per axis) map calibrated six-feature
vectors into the continuous valence-arousal plane; Gaussian memberships
around the four quadrant centers then yield a soft emotion state.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError
from .features import FEATURE_NAMES
from .svr import SvrModel, check_kkt, fit_svr, gaussian_kernel

# Fixed enum order; argmax ties resolve to the earliest entry.
EMOTIONS = ("bored", "satisfied", "curious", "confused")

# Fine-Gaussian convention for d predictors: scale = sqrt(d) / 4.
DEFAULT_KERNEL_SCALE = math.sqrt(len(FEATURE_NAMES)) / 4.0
DEFAULT_C = 1.0
DEFAULT_EPSILON = 0.1

FEATURE_SPACE_TAG = "calibrated-minmax-v1"

DATASET_HEADER = ["user_id", "stimulus_id"] + list(FEATURE_NAMES) + ["valence", "arousal"]

MIN_TRAINING_ROWS = 30


@dataclass(frozen=True)
class VAPoint:
    """A coordinate in the normalized affect plane, both axes in [-1, 1]."""

    valence: float
    arousal: float


@dataclass(frozen=True)
class EmotionState:
    """Fuzzy memberships over the four learning emotions plus a crisp label."""

    memberships: dict
    label: str
    confidence: float


@dataclass(frozen=True)
class FuzzyConfig:
    """Quadrant centers and membership width for classify_emotion.

    Default placement follows the circumplex convention: positive valence
    right, high arousal up; curious is active-pleasant, confused
    active-unpleasant, satisfied calm-pleasant, bored calm-unpleasant.
    """

    centers: dict = field(
        default_factory=lambda: {
            "bored": (-0.5, -0.5),
            "satisfied": (0.5, -0.5),
            "curious": (0.5, 0.5),
            "confused": (-0.5, 0.5),
        }
    )
    sigma: float = 0.35


DEFAULT_FUZZY = FuzzyConfig()


def classify_emotion(p: VAPoint, config: FuzzyConfig = DEFAULT_FUZZY) -> EmotionState:
    """Soft-assign a VA point to the four emotions.

    Membership of emotion e is exp(-||p - c_e||^2 / (2 sigma^2)),
    normalized to sum 1; the label is the argmax with ties broken by
    EMOTIONS order.
    """
    if not (-1.0 <= p.valence <= 1.0 and -1.0 <= p.arousal <= 1.0):
        raise ValueError(f"VA point out of bounds: {p}")
    raw = np.empty(len(EMOTIONS))
    for idx, emotion in enumerate(EMOTIONS):
        cv, ca = config.centers[emotion]
        dist_sq = (p.valence - cv) ** 2 + (p.arousal - ca) ** 2
        raw[idx] = math.exp(-dist_sq / (2.0 * config.sigma**2))
    total = raw.sum()
    memberships = raw / total
    winner = int(np.argmax(memberships))
    return EmotionState(
        memberships={e: float(m) for e, m in zip(EMOTIONS, memberships)},
        label=EMOTIONS[winner],
        confidence=float(memberships[winner]),
    )


def rescale_label(rating: float) -> float:
    """Map a 1-9 affective rating onto [-1, 1]."""
    return (rating - 5.0) / 4.0


def rating_from_va(value: float) -> float:
    """Inverse of rescale_label."""
    return 5.0 + 4.0 * value


@dataclass
class VaModel:
    """The trained feature-to-VA mapping: one SVR per axis."""

    valence: SvrModel
    arousal: SvrModel
    feature_space: str = FEATURE_SPACE_TAG

    def predict(self, X) -> np.ndarray:
        """Rows of (valence, arousal), clamped to [-1, 1]."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.stack([self.valence.predict(X), self.arousal.predict(X)], axis=1)
        return np.clip(out, -1.0, 1.0)

    def to_json(self) -> str:
        return json.dumps(
            {
                "feature_space": self.feature_space,
                "kernel_scale": self.valence.scale,
                "c": self.valence.c,
                "epsilon": self.valence.epsilon,
                "targets": {
                    "valence": self.valence.to_dict(),
                    "arousal": self.arousal.to_dict(),
                },
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "VaModel":
        obj = json.loads(text)
        return cls(
            valence=SvrModel.from_dict(obj["targets"]["valence"]),
            arousal=SvrModel.from_dict(obj["targets"]["arousal"]),
            feature_space=obj.get("feature_space", FEATURE_SPACE_TAG),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "VaModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def predict_va(model: VaModel, x) -> VAPoint:
    """Predict one VA point from a calibrated 6-vector in [0, 1]^6."""
    x = np.asarray(x, dtype=float)
    if x.shape != (len(FEATURE_NAMES),):
        raise ValueError(f"expected {len(FEATURE_NAMES)} features, got shape {x.shape}")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError(f"calibrated features must lie in [0, 1], got {x}")
    v, a = model.predict(x)[0]
    return VAPoint(valence=float(v), arousal=float(a))


def _split_indices(n: int, split, rng) -> tuple:
    ratios = np.asarray(split, dtype=float)
    if ratios.size != 3 or np.any(ratios <= 0) or abs(ratios.sum() - 1.0) > 1e-9:
        raise ValueError("split must be three positive ratios summing to 1")
    order = rng.permutation(n)
    n_train = max(1, int(round(ratios[0] * n)))
    n_val = max(1, int(round(ratios[1] * n)))
    n_train = min(n_train, n - 2)
    n_val = min(n_val, n - n_train - 1)
    return order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:]


def _rmse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def train_regressor(X, valence, arousal, split=(0.70, 0.15, 0.15),
                    kernel_scale: float = None, c: float = None,
                    epsilon: float = None, seed: int = 0,
                    grid: bool = True):
    """Train the VA regressors on calibrated rows with 1-9 labels.

    Rows are shuffled and split train/validation/test by `split`. Unless
    hyperparameters are pinned, a small grid around the defaults is scored
    on the validation split (summed RMSE over both axes). Returns
    (VaModel, report) where the report carries per-split RMSE per target.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n < MIN_TRAINING_ROWS:
        raise ValueError(f"need at least {MIN_TRAINING_ROWS} rows, got {n}")
    labels = {"valence": np.asarray(valence, dtype=float),
              "arousal": np.asarray(arousal, dtype=float)}
    for name, vals in labels.items():
        if vals.shape != (n,):
            raise ValueError(f"{name} labels must have one value per row")
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"{name} labels must be finite")
        if np.any(vals < 1.0) or np.any(vals > 9.0):
            raise ValueError(f"{name} labels must lie in [1, 9]")

    targets = {name: rescale_label(vals) for name, vals in labels.items()}
    rng = np.random.default_rng(seed)
    idx_train, idx_val, idx_test = _split_indices(n, split, rng)

    scale0 = kernel_scale if kernel_scale is not None else DEFAULT_KERNEL_SCALE
    c0 = c if c is not None else DEFAULT_C
    eps0 = epsilon if epsilon is not None else DEFAULT_EPSILON

    if grid and kernel_scale is None:
        scales = [0.5 * scale0, scale0, 2.0 * scale0]
    else:
        scales = [scale0]
    if grid and c is None:
        cs = [c0, 10.0 * c0]
    else:
        cs = [c0]

    X_train, X_val = X[idx_train], X[idx_val]
    best = None
    for scale in scales:
        K_train = gaussian_kernel(X_train, X_train, scale)
        for c_try in cs:
            val_rmse = 0.0
            fits = {}
            for name in ("valence", "arousal"):
                m = fit_svr(X_train, targets[name][idx_train], scale,
                            c=c_try, epsilon=eps0, K=K_train)
                fits[name] = m
                val_rmse += _rmse(m.predict(X_val), targets[name][idx_val])
            if best is None or val_rmse < best[0]:
                best = (val_rmse, scale, c_try, fits)

    _, scale, c_sel, fits = best
    model = VaModel(valence=fits["valence"], arousal=fits["arousal"])

    report = {
        "rows": n,
        "split_sizes": [len(idx_train), len(idx_val), len(idx_test)],
        "kernel_scale": scale,
        "c": c_sel,
        "epsilon": eps0,
        "rmse": {},
        "n_support": {
            "valence": int(model.valence.coefficients.size),
            "arousal": int(model.arousal.coefficients.size),
        },
    }
    for name in ("valence", "arousal"):
        m = fits[name]
        report["rmse"][name] = {
            "train": _rmse(m.predict(X_train), targets[name][idx_train]),
            "validation": _rmse(m.predict(X_val), targets[name][idx_val]),
            "test": _rmse(m.predict(X[idx_test]), targets[name][idx_test]),
        }
    return model, report


def kkt_report(X, labels_19, model: SvrModel) -> float:
    """Max KKT violation of a trained SVR against its training rows."""
    X = np.asarray(X, dtype=float)
    K = gaussian_kernel(X, X, model.scale)
    # reconstruct the full dual vector from the stored support set
    beta = np.zeros(X.shape[0])
    # match support vectors back to rows by nearest identity
    used = np.zeros(model.support_vectors.shape[0], dtype=bool)
    for j, sv in enumerate(model.support_vectors):
        dists = np.sum((X - sv) ** 2, axis=1)
        i = int(np.argmin(dists))
        beta[i] += model.coefficients[j]
        used[j] = True
    y = rescale_label(np.asarray(labels_19, dtype=float))
    return check_kkt(K, y, beta, model.bias, model.c, model.epsilon)


def load_dataset(path):
    """Read the training CSV; returns (user_ids, stimulus_ids, X_raw, valence, arousal)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != DATASET_HEADER:
            raise SchemaError(
                f"dataset header must be {','.join(DATASET_HEADER)}, got {header}"
            )
        users, stimuli, feats, val, aro = [], [], [], [], []
        for row in reader:
            if not row:
                continue
            if len(row) != len(DATASET_HEADER):
                raise SchemaError(f"row has {len(row)} columns, expected {len(DATASET_HEADER)}")
            users.append(row[0])
            stimuli.append(row[1])
            feats.append([float(v) for v in row[2:8]])
            val.append(float(row[8]))
            aro.append(float(row[9]))
    return (
        users,
        stimuli,
        np.asarray(feats, dtype=float),
        np.asarray(val, dtype=float),
        np.asarray(aro, dtype=float),
    )


def save_dataset(path, user_ids, stimulus_ids, X_raw, valence, arousal) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DATASET_HEADER)
        for u, s, x, v, a in zip(user_ids, stimulus_ids, np.asarray(X_raw), valence, arousal):
            writer.writerow([u, s] + [f"{f:.6f}" for f in x] + [f"{v:.4f}", f"{a:.4f}"])


def knn_predict_va(X_train, valence, arousal, X_query, k: int = 5) -> np.ndarray:
    """Plain k-nearest-neighbor VA prediction, the optional eval baseline."""
    X_train = np.asarray(X_train, dtype=float)
    X_query = np.atleast_2d(np.asarray(X_query, dtype=float))
    t = np.stack([rescale_label(np.asarray(valence, dtype=float)),
                  rescale_label(np.asarray(arousal, dtype=float))], axis=1)
    out = np.empty((X_query.shape[0], 2))
    for i, q in enumerate(X_query):
        dists = np.sum((X_train - q) ** 2, axis=1)
        nearest = np.argsort(dists)[:k]
        out[i] = t[nearest].mean(axis=0)
    return np.clip(out, -1.0, 1.0)
