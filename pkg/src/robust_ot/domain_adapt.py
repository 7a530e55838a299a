"""Label transfer across domains by trimmed joint-cost transport.

Source rows carry labels, target rows do not.  Each round builds the joint
cost ``alpha * d(x_s, x_t) + (y_s - f(x_t))^2`` for the current predictor f,
caps it at ``2 * lam``, transports uniform source mass onto uniform target
mass, and deletes source rows whose mass rides capped pairs (label outliers
or unmatched geometry).  Surviving plan columns are renormalized to weight
1 / N_t, pseudo-labels are the plan-weighted kept source labels, and f is
refit on the target covariates by Gaussian kernel ridge regression.

With uniform equal-size marginals every optimal basic plan is a
permutation, so a deleted row necessarily zeroes its matched column; those
targets keep their previous prediction for the round rather than receiving
a label from nothing.  ``lam = inf`` never deletes and is exactly the
plain transport-adaptation baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import AlgorithmFailureError, InvalidArgumentError, SolverFailureError
from .robot import TOL_H
from .solver import solve_plan

COEF_TOL = 1e-5
DEFAULT_RIDGE = 1e-3
DEFAULT_ALPHA_BALANCE = 1.0


@dataclass(frozen=True)
class DomainAdaptDataset:
    source_x: np.ndarray    # (N_s, d)
    source_y: np.ndarray    # (N_s,)
    target_x: np.ndarray    # (N_t, d)

    def __post_init__(self):
        sx = np.atleast_2d(np.asarray(self.source_x, dtype=float))
        sy = np.asarray(self.source_y, dtype=float).ravel()
        tx = np.atleast_2d(np.asarray(self.target_x, dtype=float))
        if sx.ndim != 2 or tx.ndim != 2 or sx.shape[1] != tx.shape[1]:
            raise InvalidArgumentError("source/target covariates must share one dimension")
        if sx.shape[0] == 0 or tx.shape[0] == 0:
            raise InvalidArgumentError("empty domain")
        if sy.shape[0] != sx.shape[0]:
            raise InvalidArgumentError("one label per source row required")
        object.__setattr__(self, "source_x", sx)
        object.__setattr__(self, "source_y", sy)
        object.__setattr__(self, "target_x", tx)

    @property
    def n_source(self) -> int:
        return self.source_x.shape[0]

    @property
    def n_target(self) -> int:
        return self.target_x.shape[0]


@dataclass(frozen=True)
class KrrModel:
    """Gaussian-kernel ridge regressor in dual form."""

    bandwidth: float
    ridge: float
    support: np.ndarray
    coef: np.ndarray

    def predict(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return _gauss_kernel(x, self.support, self.bandwidth) @ self.coef

    def to_dict(self) -> dict:
        return {
            "bandwidth": self.bandwidth,
            "ridge": self.ridge,
            "support": self.support.tolist(),
            "coef": self.coef.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "KrrModel":
        return cls(
            bandwidth=float(payload["bandwidth"]),
            ridge=float(payload["ridge"]),
            support=np.atleast_2d(np.asarray(payload["support"], dtype=float)),
            coef=np.asarray(payload["coef"], dtype=float).ravel(),
        )


@dataclass
class AdaptationReport:
    iterations: int = 0
    converged: bool = False
    h_sizes: list = field(default_factory=list)
    objectives: list = field(default_factory=list)

    def to_rows(self) -> list[dict]:
        return [
            {"iteration": i + 1, "n_removed": h, "objective": obj}
            for i, (h, obj) in enumerate(zip(self.h_sizes, self.objectives))
        ]


def _gauss_kernel(a: np.ndarray, b: np.ndarray, bandwidth: float) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return np.exp(-sq / (2.0 * bandwidth**2))


def median_heuristic_bandwidth(*point_sets) -> float:
    """Median pairwise distance over the pooled points (nonzero-guarded)."""
    pooled = np.vstack([np.atleast_2d(np.asarray(p, dtype=float)) for p in point_sets])
    diff = pooled[:, None, :] - pooled[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    upper = dist[np.triu_indices(pooled.shape[0], k=1)]
    med = float(np.median(upper))
    return med if med > 0 else 1.0


def krr_fit(x, y, bandwidth: float, ridge: float) -> KrrModel:
    """Solve (K + ridge I) coef = y over the Gaussian kernel at the inputs."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise InvalidArgumentError("x and y must be nonempty with equal length")
    if not (bandwidth > 0) or ridge < 0:
        raise InvalidArgumentError("need bandwidth > 0 and ridge >= 0")
    K = _gauss_kernel(x, x, bandwidth)
    system = K + ridge * np.eye(x.shape[0])
    try:
        if ridge > 0:
            coef = linalg.solve(system, y, assume_a="pos")
        else:
            coef = linalg.solve(system, y)
    except linalg.LinAlgError as exc:
        raise SolverFailureError(f"kernel system is singular: {exc}") from None
    if not np.all(np.isfinite(coef)):
        raise SolverFailureError("kernel system produced non-finite coefficients")
    return KrrModel(bandwidth=float(bandwidth), ridge=float(ridge), support=x.copy(), coef=coef)


def joint_cost(alpha_balance: float, xs, ys, xt, f_of_xt) -> np.ndarray:
    """Feature-plus-label cost: alpha * d(x_s, x_t) + squared label gap."""
    if alpha_balance < 0:
        raise InvalidArgumentError("alpha_balance must be >= 0")
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    xt = np.atleast_2d(np.asarray(xt, dtype=float))
    ys = np.asarray(ys, dtype=float).ravel()
    f_of_xt = np.asarray(f_of_xt, dtype=float).ravel()
    if xs.shape[1] != xt.shape[1]:
        raise InvalidArgumentError("covariate dimensions differ")
    if ys.shape[0] != xs.shape[0] or f_of_xt.shape[0] != xt.shape[0]:
        raise InvalidArgumentError("label vectors do not match row counts")
    diff = xs[:, None, :] - xt[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    gap = ys[:, None] - f_of_xt[None, :]
    return alpha_balance * d + gap * gap


def renormalize_columns(plan: np.ndarray, target_mass: float) -> tuple[np.ndarray, np.ndarray]:
    """Scale surviving columns back to ``target_mass``; flag dead ones."""
    sums = plan.sum(axis=0)
    alive = sums > 0
    out = plan.copy()
    out[:, alive] *= target_mass / sums[alive]
    return out, alive


def robot_domain_adapt(
    data: DomainAdaptDataset,
    lam: float,
    alpha_balance: float = DEFAULT_ALPHA_BALANCE,
    bandwidth: float | None = None,
    ridge: float = DEFAULT_RIDGE,
    max_iters: int = 20,
    coef_tol: float = COEF_TOL,
) -> tuple[KrrModel, AdaptationReport]:
    """Alternate trimmed transport and kernel-ridge refits (see module doc)."""
    if not (lam > 0):
        raise InvalidArgumentError("lambda must be > 0")
    if max_iters < 1:
        raise InvalidArgumentError("max_iters must be >= 1")
    if bandwidth is None:
        bandwidth = median_heuristic_bandwidth(data.source_x, data.target_x)
    n_s, n_t = data.n_source, data.n_target
    a = np.full(n_s, 1.0 / n_s)
    b = np.full(n_t, 1.0 / n_t)
    model = krr_fit(data.source_x, data.source_y, bandwidth, ridge)
    report = AdaptationReport()
    prev_coef = None
    predictions = model.predict(data.target_x)
    for iteration in range(1, max_iters + 1):
        raw = joint_cost(alpha_balance, data.source_x, data.source_y, data.target_x, predictions)
        capped = raw if math.isinf(lam) else np.minimum(raw, 2.0 * lam)
        plan, _ = solve_plan(capped, a, b)
        trimmed_set = raw >= 2.0 * lam
        s = -(plan * trimmed_set).sum(axis=1)
        h_mask = np.abs(a + s) <= TOL_H
        if np.all(h_mask):
            raise AlgorithmFailureError("every source row was deleted")
        kept_plan = plan.copy()
        kept_plan[h_mask, :] = 0.0
        kept_plan, alive = renormalize_columns(kept_plan, 1.0 / n_t)
        pseudo = n_t * (kept_plan.T @ data.source_y)
        pseudo[~alive] = predictions[~alive]
        model = krr_fit(data.target_x, pseudo, bandwidth, ridge)
        predictions = model.predict(data.target_x)
        report.iterations = iteration
        report.h_sizes.append(int(h_mask.sum()))
        report.objectives.append(float(np.mean((pseudo - predictions) ** 2)))
        if prev_coef is not None:
            delta = float(np.max(np.abs(model.coef - prev_coef)))
            if delta < coef_tol:
                report.converged = True
                break
        prev_coef = model.coef
    return model, report
