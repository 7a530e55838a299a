"""Reproducible experiment harness behind the ``run`` subcommand.

A manifest names one experiment, its hyperparameters, a base seed and a
replicate count.  Replicates run in a worker pool (capped by the
ROBOT_THREADS environment variable), each on a child stream derived from
``(seed, "rep", index)``, so scheduling never changes the numbers.  Each run
writes

    results.csv    one row per replicate (or per curve point), 17-digit floats
    summary.json   aggregate statistics for the experiment
    manifest.json  echo of the validated manifest
    figure.png     rendered overview of the run

and drops a FAILED marker (with partial rows flushed) if anything throws.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import figures
from .concentration import sigma_hat, threshold_clean, ConcentrationInputs
from .domain_adapt import DomainAdaptDataset, krr_fit, median_heuristic_bandwidth, robot_domain_adapt
from .errors import InvalidArgumentError
from .estimators import EstimationConfig, fit_merwe, fit_mewe
from .lambda_select import select_lambda_for_sample
from .measure import DiscreteMeasure, GroundMetric, _fmt
from .regression import RegressionDataset, ols_fit, robot_regression
from .robot import robot_value, sensitivity_curve
from .sampling import (
    ContaminationSpec,
    GenerativeModelSpec,
    child_rng,
    contaminate,
    derive_seed,
)

_EUCLID = GroundMetric("euclidean")

EXPERIMENT_IDS = (
    "table1",
    "table2",
    "sensitivity",
    "lambda-select",
    "regression",
    "adapt",
    "concentration-coverage",
)

_DEFAULTS: dict[str, dict] = {
    "table1": {
        "n": 200, "eps": 0.2, "eta": 4.0, "gamma": 0.0, "sigma": 1.0, "L": 10,
        "m": 1000, "k": 20, "lam": 5.0, "bounds": [-2.0, 2.0], "noise": "common",
    },
    "table2": {
        "n": 100, "alpha": 1.0, "beta": 0.0, "scale": 1.0, "delta": 0.0,
        "eps": 0.2, "eta": 4.0, "m": 1000, "k": 20, "lam": 5.0,
        "bounds": [-10.0, 10.0], "noise": "fresh", "optimizer": "golden-section",
    },
    "sensitivity": {
        "n": 1000, "lams": [3.0, 4.0, 5.0], "grid_lo": -20.0, "grid_hi": 20.0,
        "grid_n": 81, "include_w1": True,
    },
    "lambda-select": {
        "n": 200, "eps": 0.1, "eta": 4.0, "gamma": 0.0, "sigma": 1.0, "L": 10,
        "tau": 0.1, "t": 1.0, "iota": 0.001,
        "grid_min": 1.0, "grid_max": math.exp(6.0), "grid_n": 60,
    },
    "regression": {
        "n": 1000, "eps": 0.2, "eta": 8.0, "alpha": 1.0, "beta": 1.0,
        "sigma": 1.0, "lam": 1.0, "max_iters": 10, "n_test": 1000,
    },
    "adapt": {
        "n_source": 200, "n_target": 200, "outlier_frac": 0.1,
        "outlier_shift": 2.0, "noise_sd": 0.1, "lam": 1.0,
        "alpha_balance": 1.0, "ridge": 1e-3, "max_iters": 10,
    },
    "concentration-coverage": {
        "n": 200, "lam": 3.0, "t_values": [1.0, 2.0], "n_reference": 10_000,
    },
}

# "alpha" is deliberately unchecked: it is a slope for the regression
# experiment but a stability index for the heavy-tail benchmark.
_PARAM_CHECKS = {
    "eps": lambda v: 0.0 <= v < 1.0,
    "outlier_frac": lambda v: 0.0 <= v < 1.0,
    "tau": lambda v: 0.0 <= v < 1.0,
    "lam": lambda v: v > 0,
    "n": lambda v: int(v) >= 1,
    "m": lambda v: int(v) >= 1,
    "k": lambda v: int(v) >= 1,
    "sigma": lambda v: v > 0,
}


@dataclass(frozen=True)
class ExperimentManifest:
    experiment: str
    params: dict
    seed: int
    replicates: int
    output_dir: str | None = None
    warnings: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params,
            "seed": self.seed,
            "replicates": self.replicates,
            "output_dir": self.output_dir,
        }


def validate_manifest(payload: dict) -> tuple[ExperimentManifest | None, list[dict]]:
    """Schema and domain validation; returns (manifest or None, diagnostics)."""
    diags: list[dict] = []
    if not isinstance(payload, dict):
        return None, [{"level": "error", "message": "manifest must be a JSON object"}]
    exp = payload.get("experiment")
    if exp not in EXPERIMENT_IDS:
        diags.append({
            "level": "error",
            "message": f"unknown experiment {exp!r}; expected one of {list(EXPERIMENT_IDS)}",
        })
        return None, diags
    params = dict(_DEFAULTS[exp])
    user_params = payload.get("params", {})
    if not isinstance(user_params, dict):
        diags.append({"level": "error", "message": "params must be an object"})
        return None, diags
    for key, value in user_params.items():
        if key not in params:
            diags.append({"level": "warning", "message": f"ignoring unknown parameter {key!r}"})
            continue
        params[key] = value
    for key, check in _PARAM_CHECKS.items():
        if key in params:
            try:
                ok = check(params[key])
            except TypeError:
                ok = False
            if not ok:
                diags.append({"level": "error", "message": f"parameter {key!r} = {params[key]!r} out of domain"})
    warnings = []
    if "seed" not in payload:
        warnings.append("seed missing; defaulted to 0")
        diags.append({"level": "warning", "message": "seed missing; defaulted to 0"})
    seed = int(payload.get("seed", 0))
    replicates = int(payload.get("replicates", 1))
    if replicates < 0:
        diags.append({"level": "error", "message": "replicates must be >= 0"})
    if any(d["level"] == "error" for d in diags):
        return None, diags
    manifest = ExperimentManifest(
        experiment=exp,
        params=params,
        seed=seed,
        replicates=replicates,
        output_dir=payload.get("output_dir"),
        warnings=tuple(warnings),
    )
    return manifest, diags


def load_manifest(path) -> tuple[ExperimentManifest | None, list[dict]]:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        return None, [{"level": "error", "message": f"cannot parse manifest: {exc}"}]
    return validate_manifest(payload)


# --------------------------------------------------------------------------
# Replicate bodies (module level so the process pool can pickle them)
# --------------------------------------------------------------------------


def _lognormal_model(params: dict) -> GenerativeModelSpec:
    return GenerativeModelSpec(
        "lognormal-sum",
        {"gamma": params["gamma"], "sigma": params["sigma"], "L": params["L"]},
        "gamma",
    )


def _stable_model(params: dict) -> GenerativeModelSpec:
    return GenerativeModelSpec(
        "alpha-stable",
        {
            "alpha": params["alpha"],
            "beta": params["beta"],
            "gamma_scale": params["scale"],
            "delta": params["delta"],
        },
        "delta",
    )


def table_replicate(exp: str, params: dict, seed: int, rep: int) -> dict:
    """One paired robust/plain fit on a fresh contaminated sample.

    The ``noise`` parameter selects the replicate protocol: "common" freezes
    the synthetic noise across theta (deterministic objective), "fresh"
    redraws it per evaluation as in classical Monte-Carlo minimum-distance
    fitting.  The heavy-tail benchmark runs "fresh": the untrimmed objective
    is then tail-noise dominated while the capped one stays solvable, which
    is the contrast the benchmark exists to show.
    """
    model = _lognormal_model(params) if exp == "table1" else _stable_model(params)
    spec = ContaminationSpec(params["eps"], params["eta"], "location-shift")
    data_seed = derive_seed(seed, "rep", rep, "data")
    sample, _, _ = contaminate(model, spec, int(params["n"]), data_seed)
    data = DiscreteMeasure.from_points(sample)
    optimizer = params.get("optimizer", "golden-section")
    config = EstimationConfig(
        lam=params["lam"],
        m=int(params["m"]),
        k=int(params["k"]),
        bounds=tuple(params["bounds"]),
        seed=derive_seed(seed, "rep", rep, "fit"),
        fresh_noise=params.get("noise", "common") == "fresh",
        optimizer=optimizer,
        max_evals=int(params.get("grid_points", 200)) if optimizer == "grid" else 200,
    )
    robust = fit_merwe(data, model, config)
    plain = fit_mewe(data, model, config)
    truth = model.theta()
    return {
        "replicate": rep,
        "theta_true": truth,
        "theta_merwe": robust.theta_hat,
        "theta_mewe": plain.theta_hat,
        "err_merwe": robust.theta_hat - truth,
        "err_mewe": plain.theta_hat - truth,
        "evals_merwe": robust.evals,
        "evals_mewe": plain.evals,
    }


def sensitivity_rows(params: dict, seed: int, rep: int) -> list[dict]:
    rng = child_rng(seed, "rep", rep, "sample")
    sample = DiscreteMeasure.from_points(rng.standard_normal(int(params["n"])))
    grid = np.linspace(params["grid_lo"], params["grid_hi"], int(params["grid_n"]))
    rows = []
    lams = list(params["lams"]) + ([math.inf] if params.get("include_w1") else [])
    for lam in lams:
        for x, delta in sensitivity_curve(sample, grid, lam):
            rows.append({
                "replicate": rep,
                "lam": "inf" if math.isinf(lam) else lam,
                "x": x,
                "delta": delta,
            })
    return rows


def lambda_select_replicate(params: dict, seed: int, rep: int) -> dict:
    model = _lognormal_model(params)
    spec = ContaminationSpec(params["eps"], params["eta"], "location-shift")
    sample, _, _ = contaminate(model, spec, int(params["n"]), derive_seed(seed, "rep", rep))
    grid = np.exp(
        np.linspace(math.log(params["grid_min"]), math.log(params["grid_max"]), int(params["grid_n"]))
    )
    report = select_lambda_for_sample(
        DiscreteMeasure.from_points(sample),
        tau=params["tau"],
        t=params["t"],
        iota=params["iota"],
        grid=grid,
    )
    return {
        "replicate": rep,
        "lambda_star": report.lambda_star,
        "log_lambda_star": math.log(report.lambda_star),
        "warned": int(report.warned),
    }


def make_regression_sample(params: dict, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Contaminated linear-model sample; returns (x, y, outlier_idx)."""
    n = int(params["n"])
    rng = child_rng(seed, "xz")
    x = rng.uniform(0.0, 10.0, n)
    z = rng.normal(0.0, params["sigma"], n)
    y = params["alpha"] * x + params["beta"] + z
    n_out = int(round(params["eps"] * n))
    out_idx = np.sort(child_rng(seed, "positions").choice(n, size=n_out, replace=False))
    if n_out:
        shift = child_rng(seed, "shift").normal(params["eta"] + x[out_idx], 1.0)
        y = y.copy()
        y[out_idx] += shift
    return x, y, out_idx


def regression_replicate(params: dict, seed: int, rep: int) -> dict:
    rep_seed = derive_seed(seed, "rep", rep)
    x, y, out_idx = make_regression_sample(params, rep_seed)
    a_ols, b_ols, _ = ols_fit(x, y)
    report = robot_regression(
        RegressionDataset(x, y),
        lam=params["lam"],
        max_iters=int(params["max_iters"]),
        seed=derive_seed(rep_seed, "screen"),
    )
    test_rng = child_rng(rep_seed, "test")
    n_test = int(params["n_test"])
    x_t = test_rng.uniform(0.0, 10.0, n_test)
    y_t = params["alpha"] * x_t + params["beta"] + test_rng.normal(0.0, params["sigma"], n_test)
    mse_ols = float(np.mean((y_t - (a_ols * x_t + b_ols)) ** 2))
    mse_robot = float(np.mean((y_t - (report.alpha_hat * x_t + report.beta_hat)) ** 2))
    removed = report.final_removed
    inliers = np.setdiff1d(np.arange(x.shape[0]), out_idx)
    recall = float(np.isin(out_idx, removed).mean()) if out_idx.size else 1.0
    false_removal = float(np.isin(inliers, removed).mean()) if inliers.size else 0.0
    return {
        "replicate": rep,
        "alpha_ols": a_ols,
        "beta_ols": b_ols,
        "alpha_robot": report.alpha_hat,
        "beta_robot": report.beta_hat,
        "mse_ols": mse_ols,
        "mse_robot": mse_robot,
        "recall": recall,
        "false_removal": false_removal,
        "n_removed": int(removed.size),
        "iterations": report.iterations,
    }


def make_adapt_sample(params: dict, seed: int):
    """Two-bump source with shifted-label outliers, drifted target."""
    n_s, n_t = int(params["n_source"]), int(params["n_target"])
    sd = params["noise_sd"]
    rng = child_rng(seed, "source")
    xs = np.concatenate([
        rng.normal(-2.0, 1.0, n_s // 2),
        rng.normal(2.0, 1.0, n_s - n_s // 2),
    ])
    ys = np.sin(xs / 2.0) + rng.normal(0.0, sd, n_s)
    n_out = int(round(params["outlier_frac"] * n_s))
    if n_out:
        ys[n_s - n_out:] += params["outlier_shift"]
    rng_t = child_rng(seed, "target")
    xt = np.concatenate([
        rng_t.normal(-1.0, 1.0, n_t // 2),
        rng_t.normal(2.0, 1.0, n_t - n_t // 2),
    ])
    yt = np.sin((xt - 2.0) / 2.0) + rng_t.normal(0.0, sd, n_t)
    return xs[:, None], ys, xt[:, None], yt


def adapt_replicate(params: dict, seed: int, rep: int) -> dict:
    rep_seed = derive_seed(seed, "rep", rep)
    xs, ys, xt, yt = make_adapt_sample(params, rep_seed)
    data = DomainAdaptDataset(xs, ys, xt)
    bandwidth = median_heuristic_bandwidth(xs, xt)
    common = dict(
        alpha_balance=params["alpha_balance"],
        bandwidth=bandwidth,
        ridge=params["ridge"],
        max_iters=int(params["max_iters"]),
    )
    robust, _ = robot_domain_adapt(data, lam=params["lam"], **common)
    unrobust, _ = robot_domain_adapt(data, lam=math.inf, **common)
    plain = krr_fit(xs, ys, bandwidth, params["ridge"])
    return {
        "replicate": rep,
        "mse_robust": float(np.mean((yt - robust.predict(xt)) ** 2)),
        "mse_unrobust": float(np.mean((yt - unrobust.predict(xt)) ** 2)),
        "mse_plain": float(np.mean((yt - plain.predict(xt)) ** 2)),
    }


def coverage_reference(params: dict, seed: int) -> np.ndarray:
    return child_rng(seed, "reference").standard_normal(int(params["n_reference"]))


def coverage_replicate(params: dict, seed: int, rep: int) -> dict:
    rng = child_rng(seed, "rep", rep)
    sample = rng.standard_normal(int(params["n"]))
    value = robot_value(
        DiscreteMeasure.from_points(sample),
        DiscreteMeasure.from_points(coverage_reference(params, seed)),
        metric=_EUCLID,
        lam=params["lam"],
    )
    return {"replicate": rep, "w_value": value}


# --------------------------------------------------------------------------
# Driver
# --------------------------------------------------------------------------


def worker_count() -> int:
    env = os.environ.get("ROBOT_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidArgumentError(f"ROBOT_THREADS={env!r} is not an integer") from None
    return os.cpu_count() or 1


def _dispatch(task) -> list[dict]:
    exp, params, seed, rep = task
    if exp in ("table1", "table2"):
        return [table_replicate(exp, params, seed, rep)]
    if exp == "sensitivity":
        return sensitivity_rows(params, seed, rep)
    if exp == "lambda-select":
        return [lambda_select_replicate(params, seed, rep)]
    if exp == "regression":
        return [regression_replicate(params, seed, rep)]
    if exp == "adapt":
        return [adapt_replicate(params, seed, rep)]
    if exp == "concentration-coverage":
        return [coverage_replicate(params, seed, rep)]
    raise InvalidArgumentError(f"unknown experiment {exp!r}")


def run_replicates(manifest: ExperimentManifest, workers: int | None = None) -> list[dict]:
    """All replicate rows, sorted by replicate index."""
    tasks = [
        (manifest.experiment, manifest.params, manifest.seed, rep)
        for rep in range(manifest.replicates)
    ]
    workers = worker_count() if workers is None else workers
    rows: list[dict] = []
    if workers <= 1 or len(tasks) <= 1:
        for task in tasks:
            rows.extend(_dispatch(task))
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            for chunk in pool.map(_dispatch, tasks):
                rows.extend(chunk)
    rows.sort(key=lambda r: r["replicate"])
    return rows


def _quantiles(values: np.ndarray) -> dict:
    qs = np.quantile(values, [0.05, 0.25, 0.5, 0.75, 0.95])
    return {f"q{int(100 * p):02d}": float(v) for p, v in zip([0.05, 0.25, 0.5, 0.75, 0.95], qs)}


def summarize(manifest: ExperimentManifest, rows: list[dict]) -> dict:
    exp = manifest.experiment
    out: dict = {"experiment": exp, "replicates": manifest.replicates}
    if not rows:
        return out
    if exp in ("table1", "table2"):
        for tag in ("merwe", "mewe"):
            err = np.array([r[f"err_{tag}"] for r in rows])
            out[f"bias_{tag}"] = float(err.mean())
            out[f"mse_{tag}"] = float(np.mean(err**2))
            out.update({f"{k}_{tag}": v for k, v in _quantiles(err).items()})
        out["mse_ratio_mewe_over_merwe"] = (
            out["mse_mewe"] / out["mse_merwe"] if out["mse_merwe"] > 0 else float("inf")
        )
    elif exp == "lambda-select":
        logs = np.array([r["log_lambda_star"] for r in rows])
        out["mean_log_lambda_star"] = float(logs.mean())
        out.update(_quantiles(logs))
        out["n_warned"] = int(sum(r["warned"] for r in rows))
    elif exp == "regression":
        for key in ("mse_ols", "mse_robot", "recall", "false_removal"):
            out[f"mean_{key}"] = float(np.mean([r[key] for r in rows]))
        wins = sum(1 for r in rows if r["mse_robot"] <= r["mse_ols"])
        out["robot_beats_ols"] = int(wins)
    elif exp == "adapt":
        for key in ("mse_robust", "mse_unrobust", "mse_plain"):
            out[f"mean_{key}"] = float(np.mean([r[key] for r in rows]))
        ordered = sum(
            1 for r in rows if r["mse_robust"] < r["mse_unrobust"] < r["mse_plain"]
        )
        out["ordering_holds"] = int(ordered)
    elif exp == "concentration-coverage":
        values = np.array([r["w_value"] for r in rows])
        mean = float(values.mean())
        out["mean_w"] = mean
        reference = coverage_reference(manifest.params, manifest.seed)
        sigma = sigma_hat(DiscreteMeasure.from_points(reference), manifest.params["lam"])
        out["sigma_hat"] = sigma
        n = int(manifest.params["n"])
        for t in manifest.params["t_values"]:
            thr = threshold_clean(
                ConcentrationInputs(n=n, n_inliers=n, lam=manifest.params["lam"], t=t, sigma=sigma)
            )
            exceed = float(np.mean(np.abs(values - mean) > thr))
            out[f"threshold_t{t:g}"] = thr
            out[f"exceedance_t{t:g}"] = exceed
            out[f"bound_t{t:g}"] = float(2.0 * math.exp(-t))
    elif exp == "sensitivity":
        finite = [r for r in rows if r["lam"] != "inf"]
        if finite:
            out["max_delta"] = float(max(r["delta"] for r in finite))
    return out


def write_results_csv(path, rows: list[dict]) -> None:
    if not rows:
        Path(path).write_text("replicate\n")
        return
    keys = list(rows[0].keys())
    lines = [",".join(keys)]
    for row in rows:
        cells = []
        for key in keys:
            v = row[key]
            if isinstance(v, float):
                cells.append(_fmt(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def run_experiment(manifest: ExperimentManifest, out_dir, workers: int | None = None) -> Path:
    """Execute the manifest and write the artifact directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    rows: list[dict] = []
    try:
        rows = run_replicates(manifest, workers=workers)
        summary = summarize(manifest, rows)
        write_results_csv(out / "results.csv", rows)
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        figures.render(manifest.experiment, rows, summary, manifest.params, out / "figure.png")
    except Exception as exc:
        write_results_csv(out / "results.csv", rows)
        (out / "FAILED").write_text(f"{type(exc).__name__}: {exc}\n")
        raise
    return out
