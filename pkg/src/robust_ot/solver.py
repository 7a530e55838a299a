"""Exact discrete optimal transport: primal plans, dual potentials, values.

The transport linear program

    min <C, P>   s.t.  P 1 = a,  P^T 1 = b,  P >= 0

is solved by HiGHS dual simplex (vertex solutions, hence plans with at most
n + m - 1 positive entries) which also certifies optimality through its
equality-constraint duals.  Two fast paths cover the workhorse cases:

* equal-size uniform marginals reduce to a linear assignment problem (the
  Birkhoff polytope's vertices are permutations);
* 1-D uniform samples go through the trimmed-matching kernels in
  ``_fast1d`` when only a value is needed (see that module).

Costs stay in double precision throughout; neither backend needs the
integral-capacity scaling that a flow solver would.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog

from ._fast1d import w1_sorted
from .errors import InvalidArgumentError, SolverFailureError
from .measure import DiscreteMeasure, GroundMetric

MARGINAL_TOL = 1e-9
DUALITY_TOL = 1e-8
FEASIBILITY_SLACK = 1e-9


@dataclass(frozen=True)
class TransportPlan:
    """Nonnegative coupling with prescribed marginals."""

    matrix: np.ndarray
    row_marginals: np.ndarray
    col_marginals: np.ndarray

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "TransportPlan":
        matrix = np.asarray(matrix, dtype=float)
        return cls(matrix, matrix.sum(axis=1), matrix.sum(axis=0))

    def check(self, source_weights: np.ndarray, target_weights: np.ndarray) -> None:
        """Validate marginals and nonnegativity against the given weights."""
        if np.any(self.matrix < -FEASIBILITY_SLACK):
            raise SolverFailureError("negative plan entries")
        if np.max(np.abs(self.row_marginals - source_weights)) > MARGINAL_TOL:
            raise SolverFailureError("row marginal violation")
        if np.max(np.abs(self.col_marginals - target_weights)) > MARGINAL_TOL:
            raise SolverFailureError("column marginal violation")

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.matrix > 1e-12))


@dataclass(frozen=True)
class DualPotentials:
    """Equality-constraint duals: psi per source atom, phi per target atom.

    Feasibility means psi_i + phi_j <= c_ij (within slack); complementary
    slackness holds wherever the plan is strictly positive.
    """

    psi: np.ndarray
    phi: np.ndarray
    objective: float

    def feasible(self, cost: np.ndarray, slack: float = FEASIBILITY_SLACK) -> bool:
        return bool(np.all(self.psi[:, None] + self.phi[None, :] <= cost + slack))


def _validate_inputs(cost, source_weights, target_weights):
    cost = np.asarray(cost, dtype=float)
    a = np.asarray(source_weights, dtype=float).ravel()
    b = np.asarray(target_weights, dtype=float).ravel()
    if cost.ndim != 2 or cost.shape != (a.shape[0], b.shape[0]):
        raise InvalidArgumentError(
            f"cost shape {cost.shape} does not match weights ({a.shape[0]}, {b.shape[0]})"
        )
    if not np.all(np.isfinite(cost)) or np.any(cost < 0):
        raise InvalidArgumentError("cost entries must be finite and >= 0")
    if np.any(a < 0) or np.any(b < 0):
        raise InvalidArgumentError("weights must be >= 0")
    if abs(a.sum() - b.sum()) > 1e-8:
        raise InvalidArgumentError(
            f"infeasible weights: sums differ by {abs(a.sum() - b.sum()):.3e}"
        )
    return cost, a, b


def _is_uniform(w: np.ndarray) -> bool:
    return bool(np.all(w == w[0]))


def solve_exact(cost, source_weights, target_weights):
    """Solve the transport LP exactly.

    Returns ``(plan, duals, value)`` with a strong-duality certificate:
    primal and dual objectives agree within ``DUALITY_TOL``.

    Raises ``InvalidArgumentError`` for inconsistent inputs and
    ``SolverFailureError`` when the backend stops without an optimum.
    """
    cost, a, b = _validate_inputs(cost, source_weights, target_weights)
    n, m = cost.shape
    if n == m and _is_uniform(a) and _is_uniform(b) and a[0] > 0:
        matrix, value = _solve_assignment(cost, a[0])
        psi, phi = _duals_from_assignment(cost, matrix)
    else:
        matrix, value, psi, phi = _solve_lp(cost, a, b)
    plan = TransportPlan.from_matrix(matrix)
    plan.check(a, b)
    duals = DualPotentials(psi, phi, float(psi @ a + phi @ b))
    gap = abs(duals.objective - value)
    if gap > DUALITY_TOL or not duals.feasible(cost):
        raise SolverFailureError(f"duality certificate failed (gap {gap:.3e})")
    return plan, duals, value


def solve_value(cost, source_weights, target_weights) -> float:
    """Optimal transport value only (skips dual recovery on the fast path)."""
    cost, a, b = _validate_inputs(cost, source_weights, target_weights)
    n, m = cost.shape
    if n == m and _is_uniform(a) and _is_uniform(b) and a[0] > 0:
        return _solve_assignment(cost, a[0])[1]
    return _solve_lp(cost, a, b)[1]


def solve_plan(cost, source_weights, target_weights) -> tuple[np.ndarray, float]:
    """Optimal plan and value without the dual certificate (iterative loops)."""
    cost, a, b = _validate_inputs(cost, source_weights, target_weights)
    n, m = cost.shape
    if n == m and _is_uniform(a) and _is_uniform(b) and a[0] > 0:
        return _solve_assignment(cost, a[0])
    matrix, value, _, _ = _solve_lp(cost, a, b)
    return matrix, value


def _solve_assignment(cost: np.ndarray, mass: float) -> tuple[np.ndarray, float]:
    rows, cols = linear_sum_assignment(cost)
    matrix = np.zeros_like(cost)
    matrix[rows, cols] = mass
    return matrix, float(cost[rows, cols].sum() * mass)


def _solve_lp(cost, a, b):
    n, m = cost.shape
    # Row-sum and column-sum constraints as one sparse block.
    row_idx = np.repeat(np.arange(n), m)
    col_idx = n + np.tile(np.arange(m), n)
    flat = np.arange(n * m)
    A_eq = sparse.csr_matrix(
        (
            np.ones(2 * n * m),
            (np.concatenate([row_idx, col_idx]), np.concatenate([flat, flat])),
        ),
        shape=(n + m, n * m),
    )
    res = linprog(
        cost.ravel(),
        A_eq=A_eq,
        b_eq=np.concatenate([a, b]),
        bounds=(0, None),
        method="highs",
        options={"maxiter": max(1000, 50 * (n + m))},
    )
    if res.status == 1:
        raise SolverFailureError(
            f"iteration cap hit after {res.nit} pivots on a {n}x{m} instance"
        )
    if not res.success:
        raise SolverFailureError(f"LP backend failed: status {res.status} ({res.message})")
    duals = res.eqlin.marginals
    return res.x.reshape(n, m), float(res.fun), duals[:n].copy(), duals[n:].copy()


def _duals_from_assignment(cost: np.ndarray, matrix: np.ndarray):
    """Recover optimal duals from a permutation plan.

    With u_i + v_j <= c_ij and equality on the assignment sigma, v solves the
    difference constraints v_j - v_{sigma(i)} <= c_ij - c_{i, sigma(i)}; the
    pointwise-minimal solution is a shortest-path fixed point, reached here by
    vectorized Bellman-Ford rounds (no negative cycles at an optimum).
    """
    n = cost.shape[0]
    sigma = np.argmax(matrix > 0, axis=1)
    reduced = cost - cost[np.arange(n), sigma][:, None]  # row i: c_ij - c_{i,sigma(i)}
    order = np.empty(n, dtype=int)
    order[sigma] = np.arange(n)  # order[k] = source row assigned to column k
    edges = reduced[order]       # edges[k, j]: weight of k -> j
    v = np.zeros(n)
    for _ in range(n):
        relaxed = np.min(v[:, None] + edges, axis=0)
        new_v = np.minimum(v, relaxed)
        if np.allclose(new_v, v, rtol=0.0, atol=1e-15):
            v = new_v
            break
        v = new_v
    u = cost[np.arange(n), sigma] - v[sigma]
    return u, v


def w1_distance(mu: DiscreteMeasure, nu: DiscreteMeasure, metric: GroundMetric) -> float:
    """Untrimmed first-order transport distance between two measures.

    For d = 1 this uses the order-statistics coupling (exact, O(n log n));
    otherwise the LP value on the raw distance matrix.
    """
    if mu.dim != nu.dim:
        raise InvalidArgumentError("measures have different dimensions")
    if mu.dim == 1:
        xs = mu.atoms[:, 0]
        ys = nu.atoms[:, 0]
        ox = np.argsort(xs, kind="stable")
        oy = np.argsort(ys, kind="stable")
        return w1_sorted(xs[ox], mu.weights[ox], ys[oy], nu.weights[oy])
    cost = metric.pairwise(mu.atoms, nu.atoms)
    return solve_value(cost, mu.weights, nu.weights)


def export_plan_csv(path, plan: TransportPlan) -> None:
    """Dump positive plan entries as (i, j, mass) rows for debugging."""
    with open(path, "w", newline="") as fh:
        fh.write("i,j,mass\n")
        rows, cols = np.nonzero(plan.matrix > 0)
        for i, j in zip(rows, cols):
            fh.write(f"{i},{j},{format(plan.matrix[i, j], '.17g')}\n")
