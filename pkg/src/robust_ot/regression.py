"""Outlier-screened simple regression via trimmed-transport residual matching.

Each round fits least squares on the rows still in play, transports the
residuals onto a synthetic centered normal sample with the fitted residual
scale under the capped cost, and deletes the rows whose entire mass rides
capped pairs (they cannot be matched to any plausible residual).  The loop
stops when the coefficients settle or the round budget is spent.

Screening trades statistical guarantees for practicality: removal can mask
further outliers and inference after selection is conditional, which is why
the minimum-distance estimators exist alongside this procedure.
"""

from __future__ import annotations

import numpy as np

from ._fast1d import trimmed_plan_uniform
from .errors import AlgorithmFailureError, InvalidArgumentError
from .sampling import child_rng

COEF_TOL = 1e-6
MIN_ROWS = 3


class RegressionDataset:
    """Paired covariate/response sample with a kept-row mask."""

    def __init__(self, x, y):
        self.x = np.asarray(x, dtype=float).ravel()
        self.y = np.asarray(y, dtype=float).ravel()
        if self.x.shape != self.y.shape:
            raise InvalidArgumentError("x and y must have equal length")
        if self.x.shape[0] < MIN_ROWS:
            raise InvalidArgumentError(f"need at least {MIN_ROWS} rows")
        self.kept_mask = np.ones(self.x.shape[0], dtype=bool)

    @property
    def n(self) -> int:
        return self.x.shape[0]


class RobustFitReport:
    """Per-iteration trail of the screening loop plus the final fit.

    ``removed_indices[k]`` is the set flagged at round k + 1 (rounds re-screen
    every row, so the sets need not be nested); ``final_removed`` is the last
    round's set, whose complement is ``kept_mask`` and the final fit's data.
    """

    def __init__(self):
        self.alpha_hat = float("nan")
        self.beta_hat = float("nan")
        self.sigma_tilde: list[float] = []
        self.removed_indices: list[np.ndarray] = []
        self.iterations = 0
        self.kept_mask: np.ndarray | None = None

    @property
    def final_removed(self) -> np.ndarray:
        if not self.removed_indices:
            return np.array([], dtype=np.int64)
        return np.sort(np.asarray(self.removed_indices[-1], dtype=np.int64))

    def to_dict(self) -> dict:
        return {
            "alpha_hat": self.alpha_hat,
            "beta_hat": self.beta_hat,
            "sigma_tilde": list(self.sigma_tilde),
            "removed_indices": [idx.tolist() for idx in self.removed_indices],
            "iterations": self.iterations,
            "n_removed": int(self.final_removed.size),
        }


def ols_fit(x, y) -> tuple[float, float, float]:
    """Closed-form simple regression; returns (slope, intercept, residual sd)."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] < MIN_ROWS:
        raise InvalidArgumentError(f"need at least {MIN_ROWS} rows")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx <= 0.0:
        raise InvalidArgumentError("degenerate design: zero covariate variance")
    alpha = float(xc @ (y - y.mean())) / sxx
    beta = float(y.mean() - alpha * x.mean())
    residuals = y - alpha * x - beta
    sigma = float(np.std(residuals, ddof=1))
    return alpha, beta, sigma


def robot_outlier_step(
    residuals, sigma_tilde: float, lam: float, n_ref: int, seed: int, *labels
) -> np.ndarray:
    """One screening round: indices whose residual mass is fully capped.

    Transports the residuals onto a fresh N(0, sigma_tilde^2) sample of the
    same size under the capped absolute-difference cost; an index lands in H
    when its deleted mass saturates its weight (|s_i + 1/n| below tolerance,
    which for the permutation plans used here means its pair sits at the cap).
    """
    residuals = np.asarray(residuals, dtype=float).ravel()
    if residuals.shape[0] == 0:
        raise InvalidArgumentError("empty residual vector")
    if not (sigma_tilde > 0):
        raise InvalidArgumentError("sigma_tilde must be > 0")
    if n_ref != residuals.shape[0]:
        raise InvalidArgumentError("reference size must equal the residual count")
    reference = sigma_tilde * child_rng(seed, "reference", *labels).standard_normal(n_ref)
    _, _, trimmed_src, _ = trimmed_plan_uniform(residuals, reference, lam)
    return np.nonzero(trimmed_src)[0]


def robot_regression(
    data: RegressionDataset,
    lam: float,
    max_iters: int = 10,
    seed: int = 0,
    coef_tol: float = COEF_TOL,
) -> RobustFitReport:
    """Iterate fit -> screen -> refit until the coefficients settle.

    Every round screens the residuals of *all* rows against a fresh
    reference and refits on the complement of the current flagged set, so
    early over-removal (the first reference uses an outlier-inflated scale)
    self-corrects as the fitted scale tightens.  ``kept_mask`` reflects the
    final round's screening.
    """
    if max_iters < 1:
        raise InvalidArgumentError("max_iters must be >= 1")
    if not (lam > 0):
        raise InvalidArgumentError("lambda must be > 0")
    report = RobustFitReport()
    kept = np.ones(data.n, dtype=bool)
    alpha, beta, sigma = ols_fit(data.x, data.y)
    for iteration in range(1, max_iters + 1):
        report.sigma_tilde.append(sigma)
        if sigma <= 1e-12:
            # Perfect fit: nothing left to screen against.
            report.removed_indices.append(np.array([], dtype=np.int64))
            report.iterations = iteration
            break
        residuals = data.y - alpha * data.x - beta
        flagged = robot_outlier_step(
            residuals, sigma, lam, data.n, seed, "iter", iteration
        )
        report.removed_indices.append(flagged)
        kept = np.ones(data.n, dtype=bool)
        kept[flagged] = False
        if kept.sum() < MIN_ROWS:
            raise AlgorithmFailureError(
                f"screening removed {data.n - int(kept.sum())} of {data.n} rows"
            )
        new_alpha, new_beta, sigma = ols_fit(data.x[kept], data.y[kept])
        delta = max(abs(new_alpha - alpha), abs(new_beta - beta))
        alpha, beta = new_alpha, new_beta
        report.iterations = iteration
        if delta < coef_tol:
            break
    report.alpha_hat = alpha
    report.beta_hat = beta
    report.kept_mask = kept
    data.kept_mask = kept.copy()
    return report
