"""Closed-form concentration thresholds for the trimmed transport distance.

With inliers I and outliers O in a sample of size n, the distance between
the sampled and true measures concentrates about its mean within

    clean (O empty):    sigma * sqrt(2 t / |I|) + 4 lam t / |I|
    contaminated:       sigma * sqrt(|I|/n) * sqrt(2 t / n) + 4 lam t / n
                        + 2 lam |O| / n          (one-sided inlier centering)
    symmetrized mean:   same with 4 lam |O| / n  (centering at the full mean)

each holding with probability at least ``1 - 2 exp(-t)``.  The variance
proxy ``sigma^2`` caps squared deviations at ``(2 lam)^2``; the plug-in
estimate collapses the independent copy to the geometric median of the
sample.  The inlier distance is sandwiched by the contaminated one through
``(|I|/n) W_I -/+ 2 lam |O| / n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgumentError, SolverFailureError
from .measure import DiscreteMeasure

WEISZFELD_GRAD_TOL = 1e-8
WEISZFELD_MAX_ITER = 10_000


@dataclass(frozen=True)
class ConcentrationInputs:
    """Sample-split description feeding the threshold formulas."""

    n: int
    n_inliers: int
    lam: float
    t: float
    sigma: float

    def __post_init__(self):
        if self.n_inliers < 1 or self.n < self.n_inliers:
            raise InvalidArgumentError("need 1 <= |I| <= n")
        if not (self.lam > 0) or not (self.t > 0):
            raise InvalidArgumentError("lambda and t must be > 0")
        if self.sigma < 0:
            raise InvalidArgumentError("sigma must be >= 0")

    @property
    def n_outliers(self) -> int:
        return self.n - self.n_inliers


@dataclass(frozen=True)
class MeanRateInputs:
    """Ball radius, dimension, sample size and the free constant."""

    K: float
    d: int
    n: int
    C: float = 1.0

    def __post_init__(self):
        if self.d < 1:
            raise InvalidArgumentError("dimension must be >= 1")
        if not (self.K > 0) or not (self.C > 0):
            raise InvalidArgumentError("K and C must be > 0")
        if self.n < 2:
            raise InvalidArgumentError("n must be >= 2")


class ContaminatedThresholds(NamedTuple):
    threshold: float        # inlier-mean centering, 2 lam |O| / n term
    symmetrized: float      # full-mean centering, 4 lam |O| / n term


def geometric_median(points, grad_tol: float = WEISZFELD_GRAD_TOL) -> np.ndarray:
    """Minimizer of summed Euclidean distances (Weiszfeld iteration).

    d = 1 returns the coordinate median exactly.  For d >= 2 the iteration
    runs until the (sub)gradient norm drops below ``grad_tol``, treating
    iterates that land on data points by the standard subgradient test.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise InvalidArgumentError("no points")
    if pts.shape[1] == 1:
        return np.array([float(np.median(pts[:, 0]))])
    current = pts.mean(axis=0)
    for _ in range(WEISZFELD_MAX_ITER):
        diff = pts - current
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        at_point = dist < 1e-14
        if np.any(at_point):
            # Subgradient: the off-point pull must exceed the point's weight
            # (1 sample) for the iterate to move; otherwise it is optimal.
            away = ~at_point
            if not np.any(away):
                return current
            grad = -(diff[away] / dist[away, None]).sum(axis=0)
            pull = np.linalg.norm(grad)
            if pull <= np.count_nonzero(at_point):
                return current
            step = (pull - np.count_nonzero(at_point)) / pull
            inv = 1.0 / dist[away]
            candidate = (pts[away] * inv[:, None]).sum(axis=0) / inv.sum()
            current = current + step * (candidate - current)
            continue
        grad = -(diff / dist[:, None]).sum(axis=0)
        if np.linalg.norm(grad) <= grad_tol:
            return current
        inv = 1.0 / dist
        current = (pts * inv[:, None]).sum(axis=0) / inv.sum()
    raise SolverFailureError(
        f"geometric median did not converge in {WEISZFELD_MAX_ITER} iterations"
    )


def sigma_hat(sample: DiscreteMeasure, lam: float) -> float:
    """Plug-in variance-proxy root: capped squared deviations from the
    geometric median, averaged over atoms.

    Always at most ``2 * lam``.
    """
    if not (lam > 0):
        raise InvalidArgumentError(f"lambda must be > 0, got {lam!r}")
    center = geometric_median(sample.atoms)
    diff = sample.atoms - center[None, :]
    sq = np.einsum("ij,ij->i", diff, diff)
    capped = np.minimum(sq, (2.0 * lam) ** 2)
    return float(math.sqrt(float(capped @ sample.weights)))


def threshold_clean(inputs: ConcentrationInputs) -> float:
    """Deviation threshold for an uncontaminated sample."""
    if inputs.n_outliers != 0:
        raise InvalidArgumentError(
            "threshold_clean requires |O| = 0; use threshold_contaminated"
        )
    k = inputs.n_inliers
    return inputs.sigma * math.sqrt(2.0 * inputs.t / k) + 4.0 * inputs.lam * inputs.t / k


def threshold_contaminated(inputs: ConcentrationInputs) -> ContaminatedThresholds:
    """Deviation thresholds with outliers present (both centerings)."""
    n, k = inputs.n, inputs.n_inliers
    base = (
        inputs.sigma * math.sqrt(k / n) * math.sqrt(2.0 * inputs.t / n)
        + 4.0 * inputs.lam * inputs.t / n
    )
    extra = 2.0 * inputs.lam * inputs.n_outliers / n
    return ContaminatedThresholds(base + extra, base + 2.0 * extra)


def sandwich_bounds(
    w_inlier: float, lam: float, n: int, n_outliers: int
) -> tuple[float, float]:
    """Bounds on the full-sample distance given the inlier-sample distance."""
    if not (0.0 <= w_inlier <= 2.0 * lam + 1e-12):
        raise InvalidArgumentError("w_inlier must lie in [0, 2*lam]")
    if n_outliers < 0 or n_outliers >= n:
        raise InvalidArgumentError("need 0 <= |O| < n")
    frac_in = (n - n_outliers) / n
    slack = 2.0 * lam * n_outliers / n
    return frac_in * w_inlier - slack, frac_in * w_inlier + slack


def mean_rate_bound(inputs: MeanRateInputs, lam: float) -> float:
    """Dimension-dependent bound on the expected distance to the empirical
    measure of an n-sample supported in a radius-K ball."""
    if not (lam > 0):
        raise InvalidArgumentError(f"lambda must be > 0, got {lam!r}")
    K, d, n, C = inputs.K, inputs.d, inputs.n, inputs.C
    if d == 1:
        return C * math.sqrt(K * min(K, lam) / n)
    if d == 2:
        return C * K / math.sqrt(n) * math.log(math.sqrt(n) / K)
    return C * K / n ** (1.0 / d)
