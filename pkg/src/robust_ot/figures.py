"""Figure rendering for experiment artifacts.

Every ``run`` invocation drops a PNG next to its results.csv so a run can be
eyeballed without postprocessing.  All rendering goes through the Agg
backend; nothing here opens a window.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

_CURVE_STYLES = ["-", "--", "-.", ":"]


def render(experiment: str, rows: list[dict], summary: dict, params: dict, path) -> None:
    fn = _RENDERERS.get(experiment, _render_generic)
    fig = fn(rows, summary, params)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _render_generic(rows, summary, params):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.axis("off")
    lines = [f"{k} = {v}" for k, v in summary.items()]
    ax.text(0.02, 0.98, "\n".join(lines[:24]), va="top", family="monospace", fontsize=8)
    fig.tight_layout()
    return fig


def _render_table(rows, summary, params):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    if rows:
        err_r = [r["err_merwe"] for r in rows]
        err_p = [r["err_mewe"] for r in rows]
        ax1.boxplot([err_r, err_p], tick_labels=["robust", "plain"])
        ax1.axhline(0.0, color="red", lw=0.8)
        ax1.set_ylabel("estimation error")
        ax1.set_title("location error by estimator")
        ax2.bar(
            ["robust", "plain"],
            [summary.get("mse_merwe", 0.0), summary.get("mse_mewe", 0.0)],
            color=["tab:blue", "tab:orange"],
        )
        ax2.set_ylabel("MSE")
        ax2.set_title(f"MSE ({len(rows)} replicates)")
    fig.tight_layout()
    return fig


def _render_sensitivity(rows, summary, params):
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    by_lam: dict = {}
    for r in rows:
        if r["replicate"] != rows[0]["replicate"]:
            continue
        by_lam.setdefault(r["lam"], []).append((r["x"], r["delta"]))
    for i, (lam, pts) in enumerate(sorted(by_lam.items(), key=lambda kv: str(kv[0]))):
        pts.sort()
        xs = [p[0] for p in pts]
        ds = [p[1] for p in pts]
        label = "untrimmed" if lam == "inf" else f"cap 2*{lam:g}"
        ax.plot(xs, ds, _CURVE_STYLES[i % len(_CURVE_STYLES)], label=label)
    ax.set_xlabel("replacement value x")
    ax.set_ylabel("n * distance")
    ax.set_title("replacement sensitivity")
    ax.legend()
    fig.tight_layout()
    return fig


def _render_lambda_select(rows, summary, params):
    fig, ax = plt.subplots(figsize=(6, 4))
    logs = [r["log_lambda_star"] for r in rows]
    if logs:
        ax.hist(logs, bins=_safe_bins(logs), color="tab:blue", alpha=0.8)
    ax.set_xlabel("log(selected trimming level)")
    ax.set_ylabel("count")
    ax.set_title(f"selection over {len(logs)} replicates (tau={params.get('tau')})")
    fig.tight_layout()
    return fig


def _render_regression(rows, summary, params):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    if rows:
        ax1.boxplot(
            [[r["alpha_robot"] for r in rows], [r["alpha_ols"] for r in rows]],
            tick_labels=["screened", "OLS"],
        )
        ax1.axhline(params.get("alpha", 1.0), color="red", lw=0.8)
        ax1.set_title("slope estimates")
        ax2.boxplot(
            [[r["mse_robot"] for r in rows], [r["mse_ols"] for r in rows]],
            tick_labels=["screened", "OLS"],
        )
        ax2.set_title("clean-test MSE")
    fig.tight_layout()
    return fig


def _render_adapt(rows, summary, params):
    fig, ax = plt.subplots(figsize=(6, 4))
    if rows:
        data = [
            [r["mse_robust"] for r in rows],
            [r["mse_unrobust"] for r in rows],
            [r["mse_plain"] for r in rows],
        ]
        ax.boxplot(data, tick_labels=["robust", "plain OT", "source KRR"])
        ax.set_ylabel("target MSE")
        ax.set_title("domain adaptation")
    fig.tight_layout()
    return fig


def _safe_bins(values) -> int:
    """Bin count that degrades to 1 when the data have no spread."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2 or np.ptp(arr) == 0.0:
        return 1
    return max(5, int(math.sqrt(arr.size)))


def _render_coverage(rows, summary, params):
    fig, ax = plt.subplots(figsize=(6, 4))
    values = np.array([r["w_value"] for r in rows])
    if values.size:
        dev = np.abs(values - values.mean())
        ax.hist(dev, bins=_safe_bins(dev), color="tab:blue", alpha=0.8)
        for t in params.get("t_values", []):
            thr = summary.get(f"threshold_t{t:g}")
            if thr is not None:
                ax.axvline(thr, color="red", ls="--", label=f"threshold t={t:g}")
        ax.legend()
    ax.set_xlabel("|deviation from mean distance|")
    ax.set_ylabel("count")
    ax.set_title("concentration of the distance")
    fig.tight_layout()
    return fig


_RENDERERS = {
    "table1": _render_table,
    "table2": _render_table,
    "sensitivity": _render_sensitivity,
    "lambda-select": _render_lambda_select,
    "regression": _render_regression,
    "adapt": _render_adapt,
    "concentration-coverage": _render_coverage,
}
