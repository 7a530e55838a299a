"""Data-driven trimming-level selection from concentration-threshold ratios.

For an assumed contamination share ``tau`` the ratio

    Q(n, tau, lam, t) = [sigma sqrt(2t/n) + 4 lam t / n]
                        / [sigma sqrt(1 - tau) sqrt(2t/n) + 4 lam t / n + 4 tau lam]

compares the clean and contaminated deviation thresholds at the same lam,
with ``sigma = sigma_hat(sample, lam)`` recomputed at every grid point.  Q
starts at 1-ish for tiny lam and flattens as lam grows; the selected level
is the first grid point after which every absolute slope of Q stays below a
user cutoff ``iota``: beyond it, loosening the cap no longer changes the
concentration picture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .concentration import sigma_hat
from .errors import InvalidArgumentError
from .measure import DiscreteMeasure

DEFAULT_TAU = 0.1
DEFAULT_T = 1.0
DEFAULT_IOTA = 1e-3
DEFAULT_GRID_MIN = 1.0          # e^0
DEFAULT_GRID_MAX = math.exp(6.0)
DEFAULT_GRID_N = 60


@dataclass(frozen=True)
class LambdaSelectionReport:
    grid: np.ndarray
    q_values: np.ndarray
    as_values: np.ndarray
    lambda_star: float
    tau: float
    t: float
    iota: float
    warned: bool = field(default=False)

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.tolist(),
            "q_values": self.q_values.tolist(),
            "as_values": self.as_values.tolist(),
            "lambda_star": self.lambda_star,
            "log_lambda_star": math.log(self.lambda_star),
            "tau": self.tau,
            "t": self.t,
            "iota": self.iota,
            "warned": self.warned,
        }


def q_ratio(n: int, tau: float, lam: float, t: float, sigma_of_lambda: float) -> float:
    """Clean-over-contaminated threshold ratio at one lam.

    ``sigma_of_lambda`` is the caller-supplied plug-in sigma_hat at this lam.
    """
    if not (0.0 <= tau < 1.0):
        raise InvalidArgumentError(f"tau must be in [0, 1), got {tau!r}")
    if not (lam > 0) or not (t > 0) or n < 1:
        raise InvalidArgumentError("need lam > 0, t > 0, n >= 1")
    if sigma_of_lambda < 0:
        raise InvalidArgumentError("sigma must be >= 0")
    root = math.sqrt(2.0 * t / n)
    num = sigma_of_lambda * root + 4.0 * lam * t / n
    den = sigma_of_lambda * math.sqrt(1.0 - tau) * root + 4.0 * lam * t / n + 4.0 * tau * lam
    if den == 0.0:
        raise InvalidArgumentError("degenerate ratio: zero denominator")
    return num / den


def absolute_slopes(grid, q_values) -> np.ndarray:
    """|Q_{k+1} - Q_k| / (lam_{k+1} - lam_k), attributed to the left endpoint."""
    grid = np.asarray(grid, dtype=float).ravel()
    q = np.asarray(q_values, dtype=float).ravel()
    if grid.shape != q.shape or grid.shape[0] < 2:
        raise InvalidArgumentError("grid and q_values must share length >= 2")
    steps = np.diff(grid)
    if np.any(steps <= 0):
        raise InvalidArgumentError("grid must be strictly increasing")
    return np.abs(np.diff(q)) / steps


def select_lambda(grid, as_values, iota: float) -> tuple[float, bool]:
    """Smallest grid point from which all later slopes stay at or below iota.

    Returns ``(lambda_star, warned)``; ``warned`` is True when no suffix
    qualifies and the last grid point is returned as a conservative default.
    """
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.shape[0] == 0:
        raise InvalidArgumentError("empty grid")
    if not (iota > 0):
        raise InvalidArgumentError(f"iota must be > 0, got {iota!r}")
    as_values = np.asarray(as_values, dtype=float).ravel()
    if as_values.shape[0] != grid.shape[0] - 1:
        raise InvalidArgumentError("need one slope per adjacent grid pair")
    ok = as_values <= iota
    # Suffix scan: first index k with ok[k:] all True.
    qualifies = np.logical_and.accumulate(ok[::-1])[::-1]
    hits = np.nonzero(qualifies)[0]
    if hits.size == 0:
        return float(grid[-1]), True
    return float(grid[hits[0]]), False


def log_grid(lo: float = DEFAULT_GRID_MIN, hi: float = DEFAULT_GRID_MAX, num: int = DEFAULT_GRID_N) -> np.ndarray:
    if not (0 < lo < hi) or num < 2:
        raise InvalidArgumentError("need 0 < lo < hi and num >= 2")
    return np.exp(np.linspace(math.log(lo), math.log(hi), num))


def select_lambda_for_sample(
    sample: DiscreteMeasure,
    tau: float = DEFAULT_TAU,
    t: float = DEFAULT_T,
    iota: float = DEFAULT_IOTA,
    grid=None,
) -> LambdaSelectionReport:
    """Full pipeline: sigma_hat per grid point, Q curve, slopes, selection."""
    lam_grid = log_grid() if grid is None else np.asarray(grid, dtype=float).ravel()
    if np.any(np.diff(lam_grid) <= 0):
        raise InvalidArgumentError("grid must be strictly increasing")
    q = np.array(
        [q_ratio(sample.n, tau, lam, t, sigma_hat(sample, lam)) for lam in lam_grid]
    )
    slopes = absolute_slopes(lam_grid, q)
    lam_star, warned = select_lambda(lam_grid, slopes, iota)
    return LambdaSelectionReport(
        grid=lam_grid,
        q_values=q,
        as_values=slopes,
        lambda_star=lam_star,
        tau=tau,
        t=t,
        iota=iota,
        warned=warned,
    )
