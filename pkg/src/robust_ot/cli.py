"""Command-line frontend.

Subcommands: dist, sample, estimate, select-lambda, conc, regress, adapt,
predict, run, validate.  Every command emits machine-readable JSON (stdout,
or --out for file outputs); sample/predict additionally write CSV payloads.
Exit codes: 0 success, 2 invalid input, 3 solver or algorithm failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .concentration import ConcentrationInputs, sigma_hat, threshold_clean, threshold_contaminated
from .domain_adapt import (
    DomainAdaptDataset,
    KrrModel,
    median_heuristic_bandwidth,
    robot_domain_adapt,
)
from .errors import AlgorithmFailureError, InvalidArgumentError, SolverFailureError
from .estimators import EstimationConfig, fit_merwe, fit_mewe
from .experiments import load_manifest, run_experiment
from .lambda_select import select_lambda_for_sample
from .measure import (
    DiscreteMeasure,
    GroundMetric,
    load_measure_csv,
    save_measure_csv,
    _fmt,
)
from .regression import RegressionDataset, ols_fit, robot_regression
from .robot import merged_potential, recover_tv_modification, robot_distance, verify_dual
from .sampling import ContaminationSpec, GenerativeModelSpec, contaminate
from .solver import export_plan_csv


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
        print(json.dumps({"written": out}))
    else:
        sys.stdout.write(text)


def _cmd_dist(args) -> int:
    mu = load_measure_csv(args.mu)
    nu = load_measure_csv(args.nu)
    metric = GroundMetric(args.metric)
    solution = robot_distance(mu, nu, metric, args.lam)
    _, outliers = recover_tv_modification(solution, mu)
    psi = merged_potential(mu, nu, metric, args.lam, solution)
    feasible, dual_value, gap = verify_dual(mu, nu, metric, args.lam, psi)
    if args.plan_csv:
        export_plan_csv(args.plan_csv, solution.plan)
    _emit(
        {
            "value": solution.value,
            "lambda": args.lam,
            "trimmed_mass": solution.trimmed_mass,
            "outlier_indices": outliers.tolist(),
            "dual_value": dual_value,
            "dual_gap": gap,
            "dual_feasible": feasible,
        },
        args.out,
    )
    return 0


def _model_from_args(args) -> GenerativeModelSpec:
    if args.family == "lognormal-sum":
        params = {"gamma": args.gamma, "sigma": args.sigma, "L": args.L}
    elif args.family == "stable":
        return GenerativeModelSpec(
            "alpha-stable",
            {
                "alpha": args.alpha,
                "beta": args.beta,
                "gamma_scale": args.scale,
                "delta": args.loc,
            },
            "delta",
        )
    elif args.family == "gaussian":
        params = {"mean": args.mean, "sd": args.sd}
    else:
        params = {"a": args.a, "b": args.b}
    model = GenerativeModelSpec(
        "lognormal-sum" if args.family == "lognormal-sum" else args.family, params
    )
    if getattr(args, "param", None):
        model = GenerativeModelSpec(model.family, model.params, args.param)
    return model


def _cmd_sample(args) -> int:
    model = _model_from_args(args)
    spec = ContaminationSpec(args.eps, args.eta, args.mechanism)
    sample, inliers, outliers = contaminate(model, spec, args.n, args.seed)
    payload = {
        "n": args.n,
        "family": model.family,
        "n_outliers": int(outliers.size),
        "outlier_indices": outliers.tolist(),
        "seed": args.seed,
    }
    if args.out:
        save_measure_csv(args.out, DiscreteMeasure.from_points(sample), with_weights=False)
        payload["path"] = args.out
    else:
        payload["sample"] = [float(v) for v in sample]
    sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    return 0


def _cmd_estimate(args) -> int:
    data = load_measure_csv(args.data)
    model = _model_from_args(args)
    config = EstimationConfig(
        lam=args.lam,
        m=args.m,
        k=args.k,
        bounds=(args.bounds[0], args.bounds[1]),
        seed=args.seed,
        max_evals=args.max_evals,
        optimizer=args.optimizer,
        start=0.5 * (args.bounds[0] + args.bounds[1]) if args.optimizer == "nelder-mead" else None,
        fresh_noise=args.fresh_noise,
    )
    fit = fit_mewe(data, model, config) if args.estimator == "mewe" else fit_merwe(data, model, config)
    _emit(
        {
            "estimator": args.estimator,
            "parameter": model.param_of_interest,
            "theta_hat": fit.theta_hat,
            "objective_at_opt": fit.objective_at_opt,
            "evals": fit.evals,
            "warned": fit.warned,
            "lambda": args.lam,
            "m": args.m,
            "k": args.k,
            "seed": args.seed,
        },
        args.out,
    )
    return 0


def _cmd_select_lambda(args) -> int:
    data = load_measure_csv(args.data)
    grid = np.exp(np.linspace(math.log(args.grid_min), math.log(args.grid_max), args.grid_n))
    report = select_lambda_for_sample(data, tau=args.tau, t=args.t, iota=args.iota, grid=grid)
    _emit(report.to_dict(), args.out)
    return 0


def _cmd_conc(args) -> int:
    sigma = args.sigma
    if args.sigma_from:
        sigma = sigma_hat(load_measure_csv(args.sigma_from), args.lam)
    if sigma is None:
        raise InvalidArgumentError("provide --sigma or --sigma-from")
    n_out = int(round(args.tau * args.n))
    clean = threshold_clean(
        ConcentrationInputs(n=args.n, n_inliers=args.n, lam=args.lam, t=args.t, sigma=sigma)
    )
    contaminated = threshold_contaminated(
        ConcentrationInputs(
            n=args.n, n_inliers=args.n - n_out, lam=args.lam, t=args.t, sigma=sigma
        )
    )
    _emit(
        {
            "n": args.n,
            "tau": args.tau,
            "n_outliers": n_out,
            "lambda": args.lam,
            "t": args.t,
            "sigma": sigma,
            "threshold_clean": clean,
            "threshold_contaminated": contaminated.threshold,
            "threshold_contaminated_symmetrized": contaminated.symmetrized,
        },
        args.out,
    )
    return 0


def _load_xy_csv(path) -> tuple[np.ndarray, np.ndarray]:
    measure = load_measure_csv(path)
    if measure.dim != 2:
        raise InvalidArgumentError(f"{path}: expected two columns (x, y)")
    return measure.atoms[:, 0], measure.atoms[:, 1]


def _cmd_regress(args) -> int:
    x, y = _load_xy_csv(args.data)
    a0, b0, s0 = ols_fit(x, y)
    report = robot_regression(
        RegressionDataset(x, y), lam=args.lam, max_iters=args.max_iters, seed=args.seed
    )
    payload = report.to_dict()
    payload["ols"] = {"alpha_hat": a0, "beta_hat": b0, "sigma_tilde": s0}
    payload["lambda"] = args.lam
    payload["seed"] = args.seed
    _emit(payload, args.out)
    return 0


def _load_source_csv(path) -> tuple[np.ndarray, np.ndarray]:
    measure = load_measure_csv(path)
    if measure.dim < 2:
        raise InvalidArgumentError(f"{path}: need covariate columns plus a final label column")
    return measure.atoms[:, :-1], measure.atoms[:, -1]


def _cmd_adapt(args) -> int:
    xs, ys = _load_source_csv(args.source)
    xt = load_measure_csv(args.target).atoms
    data = DomainAdaptDataset(xs, ys, xt)
    bandwidth = args.bandwidth or median_heuristic_bandwidth(xs, xt)
    model, report = robot_domain_adapt(
        data,
        lam=args.lam,
        alpha_balance=args.alpha,
        bandwidth=bandwidth,
        ridge=args.ridge,
        max_iters=args.max_iters,
    )
    diag_path = args.diagnostics
    if diag_path is None and args.out:
        diag_path = str(Path(args.out).with_suffix(".diag.csv"))
    if diag_path:
        lines = ["iteration,n_removed,objective"]
        for row in report.to_rows():
            lines.append(f"{row['iteration']},{row['n_removed']},{_fmt(row['objective'])}")
        Path(diag_path).write_text("\n".join(lines) + "\n")
    payload = {
        "model": model.to_dict(),
        "iterations": report.iterations,
        "converged": report.converged,
        "n_removed_last": report.h_sizes[-1] if report.h_sizes else 0,
        "diagnostics": diag_path,
    }
    _emit(payload, args.out)
    return 0


def _cmd_predict(args) -> int:
    payload = json.loads(Path(args.model).read_text())
    model = KrrModel.from_dict(payload.get("model", payload))
    x = load_measure_csv(args.data).atoms
    pred = model.predict(x)
    if args.out:
        lines = ["prediction"] + [_fmt(v) for v in pred]
        Path(args.out).write_text("\n".join(lines) + "\n")
        print(json.dumps({"written": args.out, "n": int(pred.size)}))
    else:
        sys.stdout.write(json.dumps({"predictions": [float(v) for v in pred]}, indent=2) + "\n")
    return 0


def _cmd_run(args) -> int:
    manifest, diags = load_manifest(args.manifest)
    for diag in diags:
        print(json.dumps(diag), file=sys.stderr)
    if manifest is None:
        return 2
    out_dir = args.out_dir or manifest.output_dir or f"run-{manifest.experiment}"
    run_experiment(manifest, out_dir, workers=args.workers)
    print(json.dumps({"out_dir": str(out_dir), "experiment": manifest.experiment}))
    return 0


def _cmd_validate(args) -> int:
    manifest, diags = load_manifest(args.manifest)
    sys.stdout.write(json.dumps({"diagnostics": diags, "valid": manifest is not None}, indent=2) + "\n")
    return 0 if manifest is not None else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robot",
        description="Robust optimal transport: trimmed-cost distances, estimation, and applications.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", help="trimmed transport distance between two CSV measures")
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--metric", default="euclidean", choices=["euclidean", "absolute-difference"])
    p.add_argument("--plan-csv", default=None, help="export the optimal plan as (i, j, mass)")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_dist)

    p = sub.add_parser("sample", help="draw a contaminated sample to CSV")
    p.add_argument("--family", required=True, choices=["lognormal-sum", "stable", "gaussian", "uniform"])
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--L", type=int, default=10)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--loc", type=float, default=0.0)
    p.add_argument("--mean", type=float, default=0.0)
    p.add_argument("--sd", type=float, default=1.0)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--mechanism", default="location-shift",
                   choices=["location-shift", "point-mass", "stable-shift"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_sample)

    p = sub.add_parser("estimate", help="minimum-distance location fit")
    p.add_argument("--data", required=True)
    p.add_argument("--family", required=True, choices=["lognormal-sum", "stable", "gaussian", "uniform"])
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--L", type=int, default=10)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--loc", type=float, default=0.0)
    p.add_argument("--mean", type=float, default=0.0)
    p.add_argument("--sd", type=float, default=1.0)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--param", default=None, help="parameter of interest (family default otherwise)")
    p.add_argument("--estimator", default="merwe", choices=["merwe", "mewe"])
    p.add_argument("--lambda", dest="lam", type=float, default=5.0)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--bounds", type=float, nargs=2, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-evals", type=int, default=200)
    p.add_argument("--optimizer", default="golden-section",
                   choices=["golden-section", "grid", "nelder-mead"])
    p.add_argument("--fresh-noise", action="store_true",
                   help="redraw replicate noise per evaluation (classical protocol)")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_estimate)

    p = sub.add_parser("select-lambda", help="data-driven trimming level selection")
    p.add_argument("--data", required=True)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--iota", type=float, default=1e-3)
    p.add_argument("--grid-min", type=float, default=1.0)
    p.add_argument("--grid-max", type=float, default=math.exp(6.0))
    p.add_argument("--grid-n", type=int, default=60)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_select_lambda)

    p = sub.add_parser("conc", help="concentration thresholds")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--sigma-from", default=None, help="CSV sample for the sigma plug-in")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_conc)

    p = sub.add_parser("regress", help="outlier-screened simple regression")
    p.add_argument("--data", required=True, help="CSV with columns x, y")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--max-iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_regress)

    p = sub.add_parser("adapt", help="robust label transfer to an unlabeled target domain")
    p.add_argument("--source", required=True, help="CSV: covariates then a final label column")
    p.add_argument("--target", required=True, help="CSV: covariate columns")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--alpha", type=float, default=1.0, help="feature/label cost balance")
    p.add_argument("--bandwidth", type=float, default=None)
    p.add_argument("--ridge", type=float, default=1e-3)
    p.add_argument("--max-iters", type=int, default=20)
    p.add_argument("--diagnostics", default=None, help="per-iteration CSV path")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_adapt)

    p = sub.add_parser("predict", help="predict with a fitted adaptation model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_predict)

    p = sub.add_parser("run", help="run an experiment manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("validate", help="validate an experiment manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(fn=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (InvalidArgumentError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverFailureError, AlgorithmFailureError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
