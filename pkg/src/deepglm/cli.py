"""Command-line entry point: training, evaluation, and experiment runs.

Every run resolves its configuration (defaults <- JSON config file <- CLI
flags, unknown keys rejected), writes all outputs into one directory, and
finishes by writing config.resolved.json plus a manifest.json listing every
file produced.  Exit codes: 0 success, 1 usage error, 2 data/config error,
3 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import bayes, geom, identities, metrics, nnet, optim, report, tree
from .bayes import GaussianMeanModel, VariationalGaussian
from .nnet import Layer, LossSpec, Network, init_network
from .optim import ConditioningError, DivergenceError, OptimizerState, Schedule
from .pipeline import train_booking_model
from .rng import Rng
from .synth import synth_bookings
from .tabular import (Table, TableError, categorical_column, read_csv,
                      write_csv)


class UsageError(Exception):
    pass


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


DEFAULTS = {
    "train": {
        "seed": 0, "out": "runs/train", "users": "", "sessions": "",
        "labels": "", "n_users": 20000, "epochs": 20, "batch_size": 256,
        "holdout_frac": 0.1, "hidden": [64, 64], "method": "adagrad",
        "rate": 0.05, "k": 5,
    },
    "evaluate": {
        "seed": 0, "out": "runs/evaluate", "truths": "", "predictions": "",
        "k": 5,
    },
    "synth": {
        "seed": 0, "out": "runs/synth", "n_users": 10000,
    },
    "ball": {
        "seed": 0, "out": "runs/experiment-ball", "n_scatter": 1000,
        "p_scatter": 50, "n": 10000, "p_hist": [100, 200, 300, 400],
        "maxwell_p": [10, 400],
    },
    "partition": {
        "seed": 0, "out": "runs/experiment-partition", "neurons": 3,
        "lines_max": 6, "data_n": 600, "data_noise": 0.15, "cart_depth": 4,
        "net_epochs": 1500, "net_rate": 0.05,
    },
    "dropout-ridge": {
        "seed": 0, "out": "runs/experiment-dropout-ridge",
        "p_list": [0.2, 0.5, 0.8], "n_masks": 100000, "n_features": 3,
        "n_obs": 8, "n_outputs": 2,
    },
    "vi-toy": {
        "seed": 0, "out": "runs/experiment-vi-toy", "n_obs": 20,
        "steps": 1500, "mc_draws": 64, "grad_draws": 10000,
    },
    "identities": {
        "seed": 0, "out": "runs/experiment-identities", "trials": 10000,
    },
    "optzoo": {
        "seed": 0, "out": "runs/experiment-optzoo", "steps": 100,
        "rate": 0.01, "newton_steps": 100,
    },
}

EXPERIMENTS = ("ball", "partition", "dropout-ridge", "vi-toy", "identities",
               "optzoo")


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------

def _parse_flag_value(key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, list):
            elem = default[0] if default else 0
            cast = int if isinstance(elem, int) else float
            return [cast(part) for part in raw.split(",") if part != ""]
        return raw
    except ValueError as err:
        raise ConfigError(f"flag --{key}: {err}") from None


def _check_type(key: str, value, default):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value)
    elif isinstance(default, list):
        elem = default[0] if default else 0
        cast = (int,) if isinstance(elem, int) else (int, float)
        ok = isinstance(value, list) and all(
            isinstance(v, cast) and not isinstance(v, bool) for v in value)
    else:
        ok = isinstance(value, str)
    if not ok:
        raise ConfigError(f"config key {key!r}: expected a value like "
                          f"{default!r}, got {value!r}")
    return value


def load_config(command: str, config_path: str, overrides: dict) -> dict:
    """defaults <- JSON file <- flags, rejecting unknown keys."""
    defaults = DEFAULTS[command]
    resolved = dict(defaults)
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {config_path}: {err}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in doc.items():
            if key not in defaults:
                raise ConfigError(f"unknown config key {key!r}")
            resolved[key] = _check_type(key, value, defaults[key])
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r}")
        resolved[key] = _check_type(key, value, defaults[key])
    return resolved


class RunDir:
    """Output directory that tracks every file written into it."""

    def __init__(self, path: str):
        self.path = path
        os.makedirs(path, exist_ok=True)
        self.files = []

    def file(self, name: str) -> str:
        full = os.path.join(self.path, name)
        self.files.append(name)
        return full

    def note_pair(self, svg_path: str, csv_path: str) -> None:
        self.files.append(os.path.basename(csv_path))

    def write_rows(self, name: str, header, rows) -> str:
        full = self.file(name)
        with open(full, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        return full

    def finish(self, config: dict) -> None:
        with open(self.file("config.resolved.json"), "w", encoding="utf-8") as fh:
            json.dump(config, fh, indent=2, sort_keys=True)
            fh.write("\n")
        manifest = os.path.join(self.path, "manifest.json")
        with open(manifest, "w", encoding="utf-8") as fh:
            json.dump({"files": sorted(set(self.files))}, fh, indent=2)
            fh.write("\n")


def _fmt(x) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# train / evaluate / synth
# ---------------------------------------------------------------------------

def cmd_train(config: dict) -> int:
    run = RunDir(config["out"])
    if config["users"] or config["sessions"] or config["labels"]:
        if not (config["users"] and config["sessions"] and config["labels"]):
            raise ConfigError("train needs all of users, sessions and labels "
                              "paths (or none, to use synthetic data)")
        users = read_csv(config["users"], types={"user_id": "categorical"})
        sessions = read_csv(config["sessions"], types={"user_id": "categorical"})
        labels_table = read_csv(config["labels"], types={"destination": "categorical"})
        labels = [str(v) for v in labels_table.column("destination").values]
    else:
        users, sessions, labels = synth_bookings(config["n_users"], config["seed"])

    result = train_booking_model(
        users, sessions, labels, epochs=config["epochs"],
        batch_size=config["batch_size"], holdout_frac=config["holdout_frac"],
        seed=config["seed"], hidden=tuple(config["hidden"]),
        method=config["method"], rate=config["rate"], k=config["k"])

    run.write_rows("ndcg_trace.csv",
                   ["epoch", "objective", "metric_name", "metric_value"],
                   [(r["epoch"], _fmt(r["objective"]), r["metric_name"],
                     _fmt(r["metric_value"]) if r["metric_name"] else "")
                    for r in result.trace])
    run.write_rows("metrics.csv", ["metric", "value"], [
        ("holdout_ndcg", _fmt(result.holdout_ndcg)),
        ("baseline_constant_ndcg", _fmt(result.baseline_constant_ndcg)),
        ("baseline_random_ndcg", _fmt(result.baseline_random_ndcg)),
    ])
    topk_rows = []
    for k in sorted(result.topk):
        table = result.topk[k]
        topk_rows.append(("overall", k, _fmt(table["overall"])))
        for cls, acc in table["per_class"].items():
            topk_rows.append((cls, k, _fmt(acc)))
    run.write_rows("topk_accuracy.csv", ["class", "k", "accuracy"], topk_rows)

    run.write_rows("ndcg_per_destination.csv", ["destination", "ndcg"],
                   [(cls, _fmt(v))
                    for cls, v in result.per_destination_ndcg.items()])
    with open(run.file("model.json"), "w", encoding="utf-8") as fh:
        fh.write(result.net.to_json())
        fh.write("\n")

    ndcg_series = [r["metric_value"] for r in result.trace if r["metric_name"]]
    obj_series = [r["objective"] for r in result.trace]
    svg, csvp = report.figure_trace(
        {"holdout_ndcg": ndcg_series}, run.file("ndcg_epochs.svg"),
        title="holdout ranking gain by epoch", xlabel="epoch", ylabel="ndcg@k")
    run.note_pair(svg, csvp)
    svg, csvp = report.figure_trace(
        {"objective": obj_series}, run.file("objective_epochs.svg"),
        title="training objective by epoch", xlabel="epoch", ylabel="mean objective")
    run.note_pair(svg, csvp)
    run.finish(config)
    print(f"train: holdout ndcg@{config['k']} = {result.holdout_ndcg:.4f} "
          f"(constant {result.baseline_constant_ndcg:.4f}, "
          f"random {result.baseline_random_ndcg:.4f}) -> {run.path}")
    return 0


def cmd_evaluate(config: dict) -> int:
    if not config["truths"] or not config["predictions"]:
        raise ConfigError("evaluate needs --truths and --predictions CSV paths")
    run = RunDir(config["out"])
    truths_table = read_csv(config["truths"], types={"destination": "categorical"})
    truths = [str(v) for v in truths_table.column("destination").values]
    preds_table = read_csv(config["predictions"])
    k = config["k"]
    rank_cols = [f"rank{i}" for i in range(1, k + 1)
                 if f"rank{i}" in preds_table.names]
    if not rank_cols:
        raise ConfigError("predictions CSV needs columns rank1..rankK")
    ranked = [[str(preds_table.column(c).values[i]) for c in rank_cols]
              for i in range(preds_table.n_rows)]
    if len(ranked) != len(truths):
        raise TableError("truths and predictions row counts differ")

    overall = metrics.ndcg(truths, ranked, k)
    per_class = {}
    for cls in sorted(set(truths)):
        rows = [i for i, t in enumerate(truths) if t == cls]
        per_class[cls] = float(np.mean(
            [metrics.dcg_at_k(truths[i], ranked[i], k) for i in rows]))
    run.write_rows("ndcg.csv", ["destination", "ndcg"],
                   [("overall", _fmt(overall))]
                   + [(c, _fmt(v)) for c, v in per_class.items()])
    topk_rows = []
    for kk in (1, 2, 3):
        table = metrics.topk_accuracy(truths, ranked, kk)
        topk_rows.append(("overall", kk, _fmt(table["overall"])))
        for cls, acc in table["per_class"].items():
            topk_rows.append((cls, kk, _fmt(acc)))
    run.write_rows("topk_accuracy.csv", ["class", "k", "accuracy"], topk_rows)
    svg, csvp = report.figure_trace(
        {"per_destination_ndcg": list(per_class.values())},
        run.file("ndcg_per_destination.svg"),
        title="mean gain by destination", xlabel="destination index",
        ylabel="ndcg")
    run.note_pair(svg, csvp)
    run.finish(config)
    print(f"evaluate: ndcg@{k} = {overall:.4f} -> {run.path}")
    return 0


def cmd_synth(config: dict) -> int:
    run = RunDir(config["out"])
    users, sessions, labels = synth_bookings(config["n_users"], config["seed"])
    write_csv(users, run.file("users.csv"))
    write_csv(sessions, run.file("sessions.csv"))
    truth = Table([
        categorical_column("user_id", [str(v) for v in
                                       users.column("user_id").values]),
        categorical_column("destination", labels),
    ])
    write_csv(truth, run.file("labels.csv"))
    run.finish(config)
    print(f"synth: {config['n_users']} users, {sessions.n_rows} sessions "
          f"-> {run.path}")
    return 0


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def exp_ball(config: dict) -> int:
    run = RunDir(config["out"])
    rng = Rng(config["seed"])

    # 2-D image of ball samples plus the equator-band fraction
    Y = geom.ball_sample(config["p_scatter"], 1.0, config["n_scatter"], rng)
    svg, csvp = report.figure_scatter(
        Y[0], Y[1], run.file("ball2d.svg"),
        title=f"two coordinates of uniform B_{config['p_scatter']} samples",
        xlabel="y1", ylabel="y2")
    run.note_pair(svg, csvp)

    w = np.zeros(config["p_scatter"])
    w[0] = w[1] = 1.0
    Yband = geom.ball_sample(config["p_scatter"], 1.0, config["n"], rng)
    band = geom.project(Yband, w)
    frac = float((np.abs(band) > 0.5).mean())
    svg, csvp = report.figure_histogram(
        band, run.file("projection_hist.svg"), bins=50,
        title="w'Y for w = (1,1,0,...)", xlabel="w'Y")
    run.note_pair(svg, csvp)

    var_rows = []
    for p in config["p_hist"]:
        p = int(p)
        Yp = geom.ball_sample(p, 1.0, config["n"], rng)
        marginal = Yp[0]
        svg, csvp = report.figure_histogram(
            marginal, run.file(f"marginal_p{p}.svg"), bins=50,
            title=f"first-coordinate marginal, p = {p}", xlabel="e1'Y")
        run.note_pair(svg, csvp)
        var_rows.append((p, _fmt(marginal.var()), _fmt(1.0 / (p + 2))))
    run.write_rows("marginal_variance.csv",
                   ["p", "sample_variance", "expected_1_over_p_plus_2"], var_rows)

    ks_rows = []
    for p in config["maxwell_p"]:
        p = int(p)
        ks = geom.maxwell_check(p, config["n"], rng.spawn(p))
        ks_rows.append((p, _fmt(ks)))
    run.write_rows("maxwell_ks.csv", ["p", "ks_to_standard_normal"], ks_rows)
    run.write_rows("summary.csv", ["quantity", "value"], [
        ("band_fraction_above_half", _fmt(frac)),
        ("band_variance", _fmt(band.var())),
        ("band_variance_expected", _fmt(2.0 / (config["p_scatter"] + 2))),
    ])
    run.finish(config)
    print(f"ball: band fraction {frac:.4f}, "
          f"KS {', '.join(f'p={p}: {v}' for p, v in ks_rows)} -> {run.path}")
    return 0


def _generic_relu_layer(neurons: int, seed: int) -> Network:
    """Random ReLU layer whose lines are pairwise generic (redrawn if not)."""
    for attempt in range(32):
        rng = Rng(seed + attempt * 7919)
        angles = [math.pi * (i + 0.2 + 0.6 * rng.uniform01(1)[0]) / neurons
                  for i in range(neurons)]
        W = np.array([[math.cos(a), math.sin(a)] for a in angles])
        b = np.array([-1.0 + 2.0 * rng.uniform01(1)[0] for _ in range(neurons)])
        net = Network(2, [Layer(W, b, "relu")])
        try:
            geom._check_generic_2d(geom.induced_arrangement(net))
            return net
        except ValueError:
            continue
    raise ConditioningError("could not draw a generic arrangement")


def exp_partition(config: dict) -> int:
    run = RunDir(config["out"])

    net = _generic_relu_layer(config["neurons"], config["seed"])
    count = geom.relu_regions(net)
    arr = geom.induced_arrangement(net)
    xs, ys, codes = geom.region_raster(arr)
    svg, csvp = report.figure_raster(
        codes, run.file("relu_regions.svg"),
        title=f"{config['neurons']} ReLU neurons: {count} regions")
    run.note_pair(svg, csvp)

    rows = []
    for n in range(1, config["lines_max"] + 1):
        sub = geom.Arrangement(arr.hyperplanes[:n]) if n <= config["neurons"] \
            else geom.induced_arrangement(_generic_relu_layer(n, config["seed"] + n))
        rows.append((n, geom.count_regions(sub, "grid"),
                     geom.count_regions(sub, "oracle")))
    run.write_rows("region_counts.csv", ["n_lines", "grid", "oracle"], rows)

    # tree vs tanh-net partitions on the three toy datasets
    arch = {"simple": (2, 2), "circle": (2, 3), "spiral": (2, 4)}
    acc_rows = []
    lim = 3.5
    axis = np.linspace(-lim, lim, 201)
    A, B = np.meshgrid(axis, axis, indexing="ij")
    grid_cols = np.vstack([A.ravel(), B.ravel()])
    for kind in geom.DATASET_KINDS:
        data = geom.gen_dataset2d(kind, config["data_n"], config["data_noise"],
                                  config["seed"])
        fitted = tree.cart_fit(data.points.T, data.labels,
                               max_depth=config["cart_depth"])
        tree_acc = tree.cart_accuracy(fitted, data.points.T, data.labels)
        tree_codes = tree.cart_predict_batch(fitted, grid_cols.T).reshape(201, 201)
        svg, csvp = report.figure_raster(
            tree_codes, run.file(f"tree_{kind}.svg"),
            extent=(-lim, lim, -lim, lim),
            title=f"CART partition, {kind} data")
        run.note_pair(svg, csvp)

        h1, h2 = arch[kind]
        tanh_net = init_network(2, [h1, h2, 2], ["tanh", "tanh", "softmax"],
                                seed=config["seed"])
        Y = np.zeros((2, config["data_n"]))
        Y[data.labels, np.arange(config["data_n"])] = 1.0
        cfg = optim.TrainConfig(epochs=config["net_epochs"],
                                batch_size=config["data_n"],
                                seed=config["seed"],
                                schedule=Schedule(a=config["net_rate"]))
        tanh_net, _ = optim.train(tanh_net, data.points, Y,
                                  LossSpec("cross_entropy"), cfg, method="adam")
        probs, _ = nnet.forward(tanh_net, data.points)
        net_acc = float((probs.argmax(axis=0) == data.labels).mean())
        net_codes = nnet.forward(tanh_net, grid_cols)[0].argmax(axis=0)
        svg, csvp = report.figure_raster(
            net_codes.reshape(201, 201), run.file(f"net_{kind}.svg"),
            extent=(-lim, lim, -lim, lim),
            title=f"tanh network partition, {kind} data")
        run.note_pair(svg, csvp)
        acc_rows.append((kind, _fmt(tree_acc), _fmt(net_acc)))
    run.write_rows("train_accuracy.csv", ["dataset", "cart", "tanh_net"],
                   acc_rows)

    # same-leaf kernel weight field around one anchor point (box support)
    circle = geom.gen_dataset2d("circle", config["data_n"],
                                config["data_noise"], config["seed"])
    kernel_tree = tree.cart_fit(circle.points.T, circle.labels,
                                max_depth=config["cart_depth"])
    anchor = circle.points[:, 0]
    weights = tree.kernel_map(kernel_tree, anchor, grid_cols.T)
    svg, csvp = report.figure_raster(
        weights.reshape(201, 201).astype(int), run.file("tree_kernel_map.svg"),
        extent=(-lim, lim, -lim, lim),
        title="same-leaf kernel around one point")
    run.note_pair(svg, csvp)

    run.write_rows("summary.csv", ["quantity", "value"],
                   [("region_count", count)])
    run.finish(config)
    print(f"partition: region_count = {count} -> {run.path}")
    return 0


def exp_dropout_ridge(config: dict) -> int:
    run = RunDir(config["out"])
    rng = Rng(config["seed"])
    d, n, outs = config["n_features"], config["n_obs"], config["n_outputs"]
    W = rng.std_normal(outs * d).reshape(outs, d)
    X = rng.std_normal(d * n).reshape(d, n)
    Y = rng.std_normal(outs * n).reshape(outs, n)

    rows = []
    for p in config["p_list"]:
        closed = bayes.dropout_marginal_objective(W, X, Y, p)
        draws = np.empty(config["n_masks"])
        mask_rng = rng.spawn(int(p * 1000))
        for s in range(config["n_masks"]):
            draws[s] = ((Y - W @ bayes.apply_dropout(X, p, mask_rng)) ** 2).sum()
        mc = float(draws.mean())
        se = float(draws.std(ddof=1) / math.sqrt(len(draws)))
        rows.append((p, _fmt(closed), _fmt(mc),
                     _fmt(abs(mc - closed) / closed), _fmt(se)))
    run.write_rows("equivalence.csv",
                   ["keep_prob", "closed_form", "monte_carlo",
                    "relative_error", "mc_standard_error"], rows)

    y = rng.std_normal(n)
    stat_rows = []
    for p in config["p_list"]:
        w_star = bayes.gprior_ridge_solve(X, y, p)
        gamma2 = bayes.gprior_scale(X) ** 2
        grad = -2 * p * X @ (y - p * (w_star @ X)) + 2 * p * (1 - p) * gamma2 * w_star
        stat_rows.append((p, _fmt(np.linalg.norm(grad))))
    run.write_rows("ridge_stationarity.csv", ["keep_prob", "gradient_norm"],
                   stat_rows)

    svg, csvp = report.figure_trace(
        {"relative_error": [float(r[3]) for r in rows]},
        run.file("equivalence_error.svg"),
        title="closed form vs Monte Carlo", xlabel="keep-probability index",
        ylabel="relative error", logy=True)
    run.note_pair(svg, csvp)
    run.finish(config)
    worst = max(float(r[3]) for r in rows)
    print(f"dropout-ridge: worst relative error {worst:.2e} -> {run.path}")
    return 0


def exp_vi_toy(config: dict) -> int:
    run = RunDir(config["out"])
    rng = Rng(config["seed"])
    y = rng.std_normal(config["n_obs"]) + 1.0
    model = GaussianMeanModel(y)
    posterior = model.exact_posterior()
    evidence = model.log_evidence()

    fit_rows = []
    traces = {}
    for kind in ("reparam", "score"):
        q0 = VariationalGaussian(np.zeros(1), np.zeros(1))
        q, trace = bayes.vi_fit(model, q0, steps=config["steps"], kind=kind,
                                schedule=Schedule(a=0.05, decay=0.002),
                                S=config["mc_draws"],
                                seed=config["seed"] + 13)
        traces[kind] = trace[:: max(1, len(trace) // 2000)]
        kl = bayes.kl_gaussians(q, posterior)
        fit_rows.append((kind, _fmt(q.mu[0]), _fmt(q.sigma[0]), _fmt(kl)))
    run.write_rows("fits.csv", ["estimator", "mu", "sigma", "kl_to_posterior"],
                   fit_rows)
    run.write_rows("posterior.csv", ["quantity", "value"], [
        ("posterior_mu", _fmt(posterior.mu[0])),
        ("posterior_sigma", _fmt(posterior.sigma[0])),
        ("log_evidence", _fmt(evidence)),
        ("bound_tightness_at_posterior", _fmt(abs(
            model.exact_elbo(posterior) - evidence))),
    ])

    q_probe = VariationalGaussian(np.array([0.5]), np.array([-0.2]))
    residual = abs(model.exact_elbo(q_probe)
                   + bayes.kl_gaussians(q_probe, posterior) - evidence)
    grad_rows = []
    for stream, kind in enumerate(("score", "reparam"), start=1):
        _, d_mu, _ = bayes.expectation_grad_samples(
            VariationalGaussian(np.array([1.5]), np.array([0.0])),
            lambda th: float(th[0] ** 2), lambda th: np.array([2.0 * th[0]]),
            config["grad_draws"], rng.spawn(stream), kind)
        grad_rows.append((kind, _fmt(d_mu.mean()),
                          _fmt(d_mu.std(ddof=1) / math.sqrt(len(d_mu))),
                          _fmt(d_mu.var(ddof=1))))
    run.write_rows("estimators.csv",
                   ["kind", "grad_mu_mean", "grad_mu_se", "grad_mu_variance"],
                   grad_rows)
    run.write_rows("summary.csv", ["quantity", "value"], [
        ("elbo_kl_decomposition_residual", _fmt(residual)),
        ("analytic_gradient_target", _fmt(3.0)),
    ])
    svg, csvp = report.figure_trace(traces, run.file("elbo_trace.svg"),
                                    title="ELBO ascent", xlabel="step",
                                    ylabel="ELBO estimate")
    run.note_pair(svg, csvp)
    run.finish(config)
    print(f"vi-toy: kl(reparam) = {float(fit_rows[0][3]):.2e}, "
          f"decomposition residual {residual:.2e} -> {run.path}")
    return 0


def exp_identities(config: dict) -> int:
    run = RunDir(config["out"])
    rng = Rng(config["seed"])
    rows = []
    all_errors = []
    for kind in identities.IDENTITY_KINDS:
        worst = 0.0
        for _ in range(config["trials"]):
            if kind == "max_sum":
                x = rng.uniform01(1 + rng.below(10)) * 10.0 - 5.0
            else:
                x = rng.uniform01(2) * 10.0 - 5.0
            lhs, rhs = identities.verify_identity(kind, x)
            err = abs(lhs - rhs) / (1.0 + abs(lhs))
            worst = max(worst, err)
            all_errors.append(err)
        rows.append((kind, config["trials"], _fmt(worst)))
    run.write_rows("identities.csv", ["kind", "trials", "max_relative_error"],
                   rows)
    svg, csvp = report.figure_histogram(
        np.log10(np.array(all_errors) + 1e-18), run.file("errors.svg"),
        bins=40, title="identity residuals", xlabel="log10 relative error")
    run.note_pair(svg, csvp)
    run.finish(config)
    worst = max(float(r[2]) for r in rows)
    print(f"identities: worst relative error {worst:.2e} -> {run.path}")
    return 0


def exp_optzoo(config: dict) -> int:
    run = RunDir(config["out"])
    A = np.diag([0.5, 1.0, 2.0])
    bvec = np.array([1.0, -2.0, 0.5])
    w_star = np.linalg.solve(A, bvec)
    f = lambda w: 0.5 * w @ A @ w - bvec @ w
    g = lambda w: A @ w - bvec

    traces = {}
    rows = []
    for method in optim.METHODS:
        rng = Rng(config["seed"])
        direction = rng.std_normal(3)
        direction /= np.linalg.norm(direction)
        w = w_star + 3.0 * direction
        state = OptimizerState(method, 3, mu=0.5, d=0.9)
        values = [f(w)]
        for k in range(config["steps"]):
            w = optim.step(state, w, g, k, Schedule(a=config["rate"]))
            values.append(f(w))
        gap = np.array(values) - f(w_star)
        traces[method] = gap.tolist()
        monotone = bool(np.all(np.diff(values) < 0.0))
        rows.append((method, monotone, _fmt(values[0] - values[-1])))
    run.write_rows("quadratic_battery.csv",
                   ["method", "strictly_decreasing", "total_decrease"], rows)
    svg, csvp = report.figure_trace(traces, run.file("descent.svg"),
                                    title="objective gap on the quadratic",
                                    xlabel="iteration", ylabel="f - f*",
                                    logy=True)
    run.note_pair(svg, csvp)

    one_step = optim.newton_step(g, np.array([5.0, 5.0, 5.0]), damping=0.0)

    def rosen(w):
        return (1 - w[0]) ** 2 + 100 * (w[1] - w[0] ** 2) ** 2

    def rosen_grad(w):
        return np.array([
            -2 * (1 - w[0]) - 400 * w[0] * (w[1] - w[0] ** 2),
            200 * (w[1] - w[0] ** 2)])

    w_end, rtrace = optim.newton_minimize(rosen, rosen_grad,
                                          np.array([-1.2, 1.0]),
                                          max_steps=config["newton_steps"])
    run.write_rows("newton.csv", ["quantity", "value"], [
        ("quadratic_one_step_error", _fmt(np.abs(one_step - w_star).max())),
        ("rosenbrock_final_error", _fmt(np.abs(w_end - 1.0).max())),
        ("rosenbrock_steps", len(rtrace) - 1),
    ])
    svg, csvp = report.figure_trace({"rosenbrock": rtrace},
                                    run.file("rosenbrock.svg"),
                                    title="damped Newton on Rosenbrock",
                                    xlabel="accepted step", ylabel="f",
                                    logy=False)
    run.note_pair(svg, csvp)

    # cycle-average unbiasedness of the mini-batch gradient
    rng = Rng(config["seed"] + 1)
    net = init_network(3, [2], ["identity"], seed=config["seed"])
    X = rng.std_normal(3 * 12).reshape(3, 12)
    Y = rng.std_normal(2 * 12).reshape(2, 12)
    spec = LossSpec("l2")
    full = nnet.flatten_grads(nnet.backprop(net, X, Y, spec)) / 12
    acc = np.zeros_like(full)
    for k in range(3):
        idx = optim.minibatch_indices(12, 4, k)
        acc += nnet.flatten_grads(nnet.backprop(net, X[:, idx], Y[:, idx],
                                                spec)) / 4
    residual = np.abs(acc / 3 - full).max()
    run.write_rows("minibatch_unbiasedness.csv", ["quantity", "value"],
                   [("cycle_average_residual", _fmt(residual))])
    run.finish(config)
    print(f"optzoo: all methods monotone = "
          f"{all(bool(r[1]) for r in rows)}, "
          f"newton rosenbrock error {np.abs(w_end - 1.0).max():.2e} "
          f"-> {run.path}")
    return 0


# ---------------------------------------------------------------------------
# argv wiring
# ---------------------------------------------------------------------------

def _add_flags(parser: argparse.ArgumentParser, command: str) -> None:
    parser.add_argument("--config", default="", help="JSON config file")
    for key, default in DEFAULTS[command].items():
        flag = "--" + key.replace("_", "-")
        parser.add_argument(flag, dest=f"cfg_{key}", default=None,
                            metavar=str(type(default).__name__).upper(),
                            help=f"override config key {key} "
                                 f"(default {default!r})")


def build_parser() -> _Parser:
    parser = _Parser(prog="deepglm",
                     description="train, evaluate, and reproduce the "
                                 "geometry/regularization experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in ("train", "evaluate", "synth"):
        _add_flags(sub.add_parser(command), command)
    exp = sub.add_parser("experiment")
    exp.add_argument("which", choices=EXPERIMENTS)
    # experiment flags are attached afterwards, once `which` is known
    exp.add_argument("rest", nargs=argparse.REMAINDER)
    return parser


HANDLERS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "synth": cmd_synth,
    "ball": exp_ball,
    "partition": exp_partition,
    "dropout-ridge": exp_dropout_ridge,
    "vi-toy": exp_vi_toy,
    "identities": exp_identities,
    "optzoo": exp_optzoo,
}


def run(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "experiment":
        key = args.which
        inner = _Parser(prog=f"deepglm experiment {key}")
        _add_flags(inner, key)
        args = inner.parse_args(args.rest)
    else:
        key = args.command
    overrides = {}
    for name, value in vars(args).items():
        if name.startswith("cfg_") and value is not None:
            cfg_key = name[4:]
            overrides[cfg_key] = _parse_flag_value(cfg_key, value,
                                                   DEFAULTS[key][cfg_key])
    config = load_config(key, args.config, overrides)
    return HANDLERS[key](config)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return run(argv)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except (ConfigError, TableError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (DivergenceError, ConditioningError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
