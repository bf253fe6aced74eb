"""Operator entry points: data generation, training, evaluation, simulation,
replay, serving, and MDP analysis."""

from __future__ import annotations

import json
import sys
import urllib.request
from pathlib import Path

import click
import numpy as np

from .affect import (
    EMOTIONS,
    VaModel,
    VAPoint,
    classify_emotion,
    knn_predict_va,
    load_dataset,
    save_dataset,
    train_regressor,
)
from .calibration import calibrate_rows
from .engine import EngineConfig
from .errors import AffectLoopError
from .mdp import (
    MdpModel,
    check_ergodicity,
    default_mdp_model,
    load_mdp_config,
    policy_chain,
    stationary_distribution,
    value_iteration,
)
from .simulator import ScenarioConfig, generate_dataset, load_truth, run_closed_loop, save_truth


def _fail(category: str, message: str) -> None:
    click.echo(f"error: {category}: {message}", err=True)
    sys.exit(1)


def _guard(fn):
    """Uniform one-line machine-parsable failures."""
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except AffectLoopError as exc:
            _fail(type(exc).__name__, str(exc))
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            _fail(type(exc).__name__, str(exc))

    return wrapper


@click.group()
def cli():
    """Affective learning feedback engine."""


@cli.command("gen-data")
@click.option("--users", type=int, required=True, help="Number of synthetic users (>= 2).")
@click.option("--rows", type=int, required=True, help="Rows per user.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--truth", "truth_path", type=click.Path(dir_okay=False), required=True)
@_guard
def gen_data(users, rows, seed, out_path, truth_path):
    """Generate a labeled dataset plus its ground-truth table."""
    data = generate_dataset(users, rows, seed=seed)
    save_dataset(out_path, data["users"], data["stimuli"], data["X"],
                 data["valence"], data["arousal"])
    save_truth(truth_path, data["truth"])
    click.echo(json.dumps({"rows": len(data["users"]), "out": out_path, "truth": truth_path}))


def _parse_split(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"split must look like 70:15:15, got {text!r}")
    values = [float(p) for p in parts]
    total = sum(values)
    if total <= 0:
        raise ValueError("split ratios must be positive")
    return tuple(v / total for v in values)


@cli.command("train")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--c", "c", type=float, default=None, help="Box constraint; default grid-searched.")
@click.option("--epsilon", type=float, default=None, help="Tube width; default 0.1.")
@click.option("--kernel-scale", type=float, default=None,
              help="Gaussian scale; default grid-searched around sqrt(6)/4.")
@click.option("--split", default="70:15:15", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_guard
def train(data_path, out_path, c, epsilon, kernel_scale, split, seed):
    """Calibrate per user, fit the valence/arousal regressors, save the model."""
    users, _, X_raw, valence, arousal = load_dataset(data_path)
    X_cal, _ = calibrate_rows(users, X_raw)
    model, report = train_regressor(
        X_cal, valence, arousal,
        split=_parse_split(split),
        kernel_scale=kernel_scale, c=c, epsilon=epsilon, seed=seed,
    )
    model.save(out_path)
    click.echo(json.dumps({"model": out_path, "report": report}))


def _predicted_labels(preds):
    return [classify_emotion(VAPoint(float(v), float(a))).label for v, a in preds]


def _confusion(true_labels, pred_labels):
    """Row-normalized proportions, true-label rows by predicted columns."""
    counts = {t: {p: 0 for p in EMOTIONS} for t in EMOTIONS}
    for t, p in zip(true_labels, pred_labels):
        counts[t][p] += 1
    matrix = {}
    for t in EMOTIONS:
        row_total = sum(counts[t].values())
        matrix[t] = {
            p: (counts[t][p] / row_total if row_total else 0.0) for p in EMOTIONS
        }
    return matrix


@cli.command("eval")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--truth", "truth_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--confusion", "confusion_path", type=click.Path(dir_okay=False), required=True)
@click.option("--baseline", type=click.Choice(["knn"]), default=None)
@_guard
def eval_cmd(model_path, data_path, truth_path, confusion_path, baseline):
    """End-to-end 4-class evaluation against ground truth."""
    model = VaModel.load(model_path)
    users, stimuli, X_raw, valence, arousal = load_dataset(data_path)
    truth = load_truth(truth_path)
    if len(truth) != len(users):
        raise ValueError(
            f"dataset has {len(users)} rows but truth file has {len(truth)}"
        )
    X = X_raw
    if model.feature_space.startswith("calibrated"):
        X, _ = calibrate_rows(users, X_raw)
    preds = model.predict(X)
    pred_labels = _predicted_labels(preds)
    true_labels = [row["true_emotion"] for row in truth]
    accuracy = float(np.mean([p == t for p, t in zip(pred_labels, true_labels)]))

    matrix = _confusion(true_labels, pred_labels)
    with open(confusion_path, "w", encoding="utf-8") as fh:
        fh.write("," + ",".join(EMOTIONS) + "\n")
        for t in EMOTIONS:
            fh.write(t + "," + ",".join(f"{matrix[t][p]:.4f}" for p in EMOTIONS) + "\n")

    out = {"accuracy": accuracy, "rows": len(users), "confusion": confusion_path}
    if baseline == "knn":
        # leave-one-out nearest neighbors on the same calibrated rows
        pred_knn = []
        for i in range(X.shape[0]):
            mask = np.arange(X.shape[0]) != i
            pred_knn.append(
                knn_predict_va(X[mask], valence[mask], arousal[mask], X[i])[0]
            )
        knn_labels = _predicted_labels(np.asarray(pred_knn))
        out["accuracy_knn"] = float(
            np.mean([p == t for p, t in zip(knn_labels, true_labels)])
        )
    click.echo(json.dumps(out))


@cli.command("simulate")
@click.option("--students", type=int, required=True)
@click.option("--minutes", type=float, required=True)
@click.option("--controller", type=click.Choice(["on", "off"]), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--preset", default="decay_to_bored", show_default=True)
@click.option("--report", "report_path", type=click.Path(dir_okay=False), required=True)
@_guard
def simulate(students, minutes, controller, seed, preset, report_path):
    """Closed-loop classroom simulation through the full engine."""
    cfg = ScenarioConfig(students=students, minutes=minutes,
                         controller=controller, seed=seed, preset=preset)
    result = run_closed_loop(cfg)
    metrics = {k: v for k, v in result["metrics"].items() if k != "latency_ms"}
    report = {
        "config": result["config"],
        "metrics": metrics,
        "latent_dwell": result["latent_dwell"],
        "latent_dwell_fractions": result["latent_dwell_fractions"],
        "applied_action_periods": result["applied_action_periods"],
    }
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    click.echo(json.dumps({
        "report": report_path,
        "curious_dwell_fraction": result["latent_dwell_fractions"]["curious"],
        "suggestions": metrics["suggestion_count"],
    }))


@cli.command("replay")
@click.option("--file", "file_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--speed", type=float, default=0.0, show_default=True,
              help="Real-time multiplier; 0 replays as fast as possible.")
@click.option("--session", "session_url", required=True,
              help="Base session URL, e.g. http://host:8000/sessions/sess-000001")
@_guard
def replay(file_path, speed, session_url):
    """Replay a recorded NDJSON sample file into a running session."""
    from .ingest import render_sample, replay_file

    url = session_url.rstrip("/") + "/ingest"
    batch = []
    batch_ts = None
    sent = 0
    rejected = 0

    def flush():
        nonlocal sent, rejected
        if not batch:
            return
        body = "\n".join(render_sample(s) for s in batch).encode()
        req = urllib.request.Request(url, data=body, method="POST")
        with urllib.request.urlopen(req) as resp:
            report = json.loads(resp.read())
        sent += report["accepted"]
        rejected += len(report["rejected"])
        batch.clear()

    for sample in replay_file(file_path, speed_factor=speed):
        if batch_ts is not None and sample.ts_ms != batch_ts:
            flush()
        batch_ts = sample.ts_ms
        batch.append(sample)
    flush()
    click.echo(json.dumps({"sent": sent, "rejected": rejected}))


@cli.command("serve")
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--storage", "storage_dir", type=click.Path(file_okay=False), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--mdp-config", "mdp_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Defaults to the packaged configuration.")
@click.option("--token", default=None, help="Static bearer token; default open.")
@_guard
def serve(port, storage_dir, model_path, mdp_path, token):
    """Host the session service."""
    import uvicorn

    from .service import create_app, start_tick_thread

    model = VaModel.load(model_path)
    mdp_model = load_mdp_config(mdp_path) if mdp_path else default_mdp_model()
    Path(storage_dir).mkdir(parents=True, exist_ok=True)
    app = create_app(storage_dir, model, mdp_model, engine_config=EngineConfig(), token=token)
    start_tick_thread(app)
    uvicorn.run(app, host="0.0.0.0", port=port, log_level="info")


@cli.command("mdp-analyze")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Defaults to the packaged configuration.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_guard
def mdp_analyze(config_path, report_path, seed):
    """Value iteration, ergodicity checks, and the policy table."""
    model = load_mdp_config(config_path) if config_path else default_mdp_model()
    policy = value_iteration(model, seed=seed)
    chain = policy_chain(model, policy.optimal)
    ergodicity = check_ergodicity(chain)
    stationary = None
    stationary_error = None
    try:
        pi = stationary_distribution(chain)
        stationary = {s: float(p) for s, p in zip(model.states, pi)}
    except AffectLoopError as exc:
        stationary_error = str(exc)

    report = {
        "policy": policy.to_dict(),
        "ergodicity": {
            "irreducible": ergodicity.irreducible,
            "aperiodic": ergodicity.aperiodic,
            "spectral_gap": ergodicity.spectral_gap,
        },
        "stationary_distribution": stationary,
        "stationary_error": stationary_error,
    }
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")

    width = max(len(s) for s in model.states)
    a_width = max(len(a) for a in model.actions)
    click.echo(f"{'state':<{width}}  {'optimal':<{a_width}}  sub-optimal")
    for state in model.states:
        click.echo(
            f"{state:<{width}}  {policy.optimal[state]:<{a_width}}  {policy.suboptimal[state]}"
        )
    if not policy.converged:
        click.echo(f"warning: value iteration residual {policy.residual:.3e}", err=True)


def main():
    cli(prog_name="affectloop")


if __name__ == "__main__":
    main()
