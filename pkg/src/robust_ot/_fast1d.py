"""Exact 1-D transport kernels for uniform-weight samples.

Two specialized solvers back the scalar-data hot paths (estimation
objectives, sensitivity curves, residual screening):

* ``w1_sorted``: classical order-statistics coupling for the untrimmed
  distance with arbitrary weights, via merged CDF breakpoints.

* ``trimmed_match_value`` / ``trimmed_match_plan``: trimmed-cost transport
  between equal-size uniform samples as a grid shortest path.  Scanning both
  sorted samples, a step (i-1, j-1) -> (i, j) matches x_i with y_j at cost
  |x_i - y_j|, while horizontal/vertical steps mark an atom as trimmed at
  cost ``lam`` per atom; trimmed sources and targets pair up 1:1 (2*lam per
  pair, independent of partner).  Kept pairs may be taken monotone without
  loss (uncrossing under a convex cost), and any optimal solution can
  re-pair its q-th trimmed source with its q-th trimmed target (a pair
  closer than 2*lam would beat trimming both, contradicting optimality), so
  the recursion

      f[i, j] = min(f[i-1, j-1] + |x_i - y_j|, f[i-1, j] + lam, f[i, j-1] + lam)

  is exact for the linear program.  Unequal sizes with uniform weights are
  handled by replicating atoms up to lcm(n, m).

Kernels are compiled with numba when available; a pure-numpy anti-diagonal
sweep provides the same results (slower) otherwise.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidArgumentError

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on stripped installs
    _HAVE_NUMBA = False

# Replication guard: lcm(n, m) above this falls back to the generic LP path.
MAX_EXPANDED = 40_000


def w1_sorted(x: np.ndarray, wx: np.ndarray, y: np.ndarray, wy: np.ndarray) -> float:
    """W1 on the line for sorted supports with arbitrary weights.

    Equals the area between the two CDFs, accumulated over the merged
    breakpoints of both supports.
    """
    z = np.concatenate([x, y])
    order = np.argsort(z, kind="stable")
    z = z[order]
    jumps = np.concatenate([wx, -wy])[order]
    gaps = np.diff(z)
    cdf_diff = np.cumsum(jumps)[:-1]
    return float(np.sum(np.abs(cdf_diff) * gaps))


def w1_uniform(x: np.ndarray, y: np.ndarray) -> float:
    """W1 between uniform empirical measures (inputs need not be sorted)."""
    xs = np.sort(np.asarray(x, dtype=float).ravel())
    ys = np.sort(np.asarray(y, dtype=float).ravel())
    if xs.shape[0] == ys.shape[0]:
        return float(np.mean(np.abs(xs - ys)))
    wx = np.full(xs.shape[0], 1.0 / xs.shape[0])
    wy = np.full(ys.shape[0], 1.0 / ys.shape[0])
    return w1_sorted(xs, wx, ys, wy)


def _expansion(n: int, m: int) -> tuple[int, int, int]:
    common = math.lcm(n, m)
    return common, common // n, common // m


def can_use_dp(n: int, m: int) -> bool:
    """True when the uniform pair (n, m) stays within the replication cap."""
    return math.lcm(n, m) <= MAX_EXPANDED


def trimmed_w_uniform(x: np.ndarray, y: np.ndarray, lam: float) -> float:
    """Trimmed-cost transport distance between uniform empirical measures.

    Accepts any sizes whose lcm is within ``MAX_EXPANDED``; atoms are
    replicated to a common count so each carries equal mass.
    """
    if not (lam > 0):
        raise InvalidArgumentError(f"lambda must be > 0, got {lam!r}")
    xs = np.sort(np.asarray(x, dtype=float).ravel())
    ys = np.sort(np.asarray(y, dtype=float).ravel())
    n, m = xs.shape[0], ys.shape[0]
    if n == 0 or m == 0:
        raise InvalidArgumentError("empty sample")
    common, rx, ry = _expansion(n, m)
    if common > MAX_EXPANDED:
        raise InvalidArgumentError(
            f"lcm({n}, {m}) = {common} exceeds the 1-D fast-path cap"
        )
    if rx > 1:
        xs = np.repeat(xs, rx)
    if ry > 1:
        ys = np.repeat(ys, ry)
    return trimmed_match_value(xs, ys, float(lam)) / common


def trimmed_plan_uniform(
    x: np.ndarray, y: np.ndarray, lam: float
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Trimmed transport between equal-size uniform samples, with matching.

    Returns ``(value, partner, trimmed_x, trimmed_y)`` where ``partner[i]``
    is the target index coupled to source i (every source is coupled:
    trimmed sources pair with trimmed targets in sorted order), and the two
    boolean masks flag atoms whose mass rides a pair with raw distance
    >= 2*lam.  Indices refer to the original (unsorted) input order.
    """
    if not (lam > 0):
        raise InvalidArgumentError(f"lambda must be > 0, got {lam!r}")
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise InvalidArgumentError("plan recovery needs equal nonempty sizes")
    ox = np.argsort(x, kind="stable")
    oy = np.argsort(y, kind="stable")
    xs, ys = x[ox], y[oy]
    _, match = trimmed_match_plan(xs, ys, float(lam))
    n = x.shape[0]
    partner_sorted = np.empty(n, dtype=np.int64)
    kept = match >= 0
    partner_sorted[kept] = match[kept]
    # Trimmed atoms pair up in sorted order; optimality guarantees each such
    # pair sits at raw distance >= 2*lam (else matching it directly would be
    # strictly cheaper than two trims).
    tx = np.nonzero(~kept)[0]
    ty = np.setdiff1d(np.arange(n), match[kept], assume_unique=False)
    partner_sorted[tx] = ty
    trimmed_x_sorted = np.zeros(n, dtype=bool)
    trimmed_y_sorted = np.zeros(n, dtype=bool)
    pair_dist = np.abs(xs - ys[partner_sorted])
    on_cap = pair_dist >= 2.0 * lam
    trimmed_x_sorted[on_cap] = True
    trimmed_y_sorted[partner_sorted[on_cap]] = True
    partner = np.empty(n, dtype=np.int64)
    partner[ox] = oy[partner_sorted]
    trimmed_x = np.zeros(n, dtype=bool)
    trimmed_y = np.zeros(n, dtype=bool)
    trimmed_x[ox] = trimmed_x_sorted
    trimmed_y[oy] = trimmed_y_sorted
    # Value from the reconstructed pairing keeps plan and objective bit-consistent.
    value = float(np.mean(np.minimum(pair_dist, 2.0 * lam)))
    return value, partner, trimmed_x, trimmed_y


# --------------------------------------------------------------------------
# Kernels
# --------------------------------------------------------------------------


def _match_value_py(x: np.ndarray, y: np.ndarray, lam: float) -> float:
    """Plain row sweep of the matching recursion (fallback)."""
    n, m = x.shape[0], y.shape[0]
    prev = lam * np.arange(m + 1)
    cur = np.empty(m + 1)
    for i in range(1, n + 1):
        cur[0] = lam * i
        diag = prev[:-1] + np.abs(x[i - 1] - y)
        up = prev[1:] + lam
        for j in range(1, m + 1):
            best = diag[j - 1]
            if up[j - 1] < best:
                best = up[j - 1]
            left = cur[j - 1] + lam
            if left < best:
                best = left
            cur[j] = best
        prev, cur = cur.copy(), prev
    return float(prev[m])


def _match_plan_py(x: np.ndarray, y: np.ndarray, lam: float):
    """Row-wise DP with full backtrack table (fallback)."""
    n, m = x.shape[0], y.shape[0]
    prev = lam * np.arange(m + 1)
    choice = np.zeros((n + 1, m + 1), dtype=np.int8)
    choice[0, 1:] = 2
    cur = np.empty(m + 1)
    for i in range(1, n + 1):
        cur[0] = lam * i
        choice[i, 0] = 1
        diag = prev[:-1] + np.abs(x[i - 1] - y)
        up = prev[1:] + lam
        for j in range(1, m + 1):
            best, ch = diag[j - 1], 0
            if up[j - 1] < best:
                best, ch = up[j - 1], 1
            left = cur[j - 1] + lam
            if left < best:
                best, ch = left, 2
            cur[j] = best
            choice[i, j] = ch
        prev, cur = cur.copy(), prev
    match = _walk_back(choice, n, m)
    return float(prev[m]), match


def _walk_back(choice: np.ndarray, n: int, m: int) -> np.ndarray:
    match = np.full(n, -1, dtype=np.int64)
    i, j = n, m
    while i > 0 or j > 0:
        ch = choice[i, j]
        if ch == 0:
            match[i - 1] = j - 1
            i -= 1
            j -= 1
        elif ch == 1:
            i -= 1
        else:
            j -= 1
    return match


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _match_value_nb(x, y, lam):  # pragma: no cover - compiled
        n = x.shape[0]
        m = y.shape[0]
        prev = np.empty(m + 1)
        cur = np.empty(m + 1)
        for j in range(m + 1):
            prev[j] = lam * j
        for i in range(1, n + 1):
            cur[0] = lam * i
            xi = x[i - 1]
            for j in range(1, m + 1):
                d = xi - y[j - 1]
                if d < 0.0:
                    d = -d
                best = prev[j - 1] + d
                alt = prev[j] + lam
                if alt < best:
                    best = alt
                alt = cur[j - 1] + lam
                if alt < best:
                    best = alt
                cur[j] = best
            prev, cur = cur, prev
        return prev[m]

    @numba.njit(cache=True)
    def _match_plan_nb(x, y, lam):  # pragma: no cover - compiled
        n = x.shape[0]
        m = y.shape[0]
        prev = np.empty(m + 1)
        cur = np.empty(m + 1)
        choice = np.zeros((n + 1, m + 1), dtype=np.int8)
        for j in range(m + 1):
            prev[j] = lam * j
            if j > 0:
                choice[0, j] = 2
        for i in range(1, n + 1):
            cur[0] = lam * i
            choice[i, 0] = 1
            xi = x[i - 1]
            for j in range(1, m + 1):
                d = xi - y[j - 1]
                if d < 0.0:
                    d = -d
                best = prev[j - 1] + d
                ch = 0
                alt = prev[j] + lam
                if alt < best:
                    best = alt
                    ch = 1
                alt = cur[j - 1] + lam
                if alt < best:
                    best = alt
                    ch = 2
                cur[j] = best
                choice[i, j] = ch
            prev, cur = cur, prev
        match = np.full(n, -1, dtype=np.int64)
        i = n
        j = m
        while i > 0 or j > 0:
            ch = choice[i, j]
            if ch == 0:
                match[i - 1] = j - 1
                i -= 1
                j -= 1
            elif ch == 1:
                i -= 1
            else:
                j -= 1
        return prev[m], match

    def trimmed_match_value(x: np.ndarray, y: np.ndarray, lam: float) -> float:
        return float(_match_value_nb(np.ascontiguousarray(x), np.ascontiguousarray(y), lam))

    def trimmed_match_plan(x: np.ndarray, y: np.ndarray, lam: float):
        v, match = _match_plan_nb(np.ascontiguousarray(x), np.ascontiguousarray(y), lam)
        return float(v), match

else:  # pragma: no cover - exercised only on stripped installs

    def trimmed_match_value(x: np.ndarray, y: np.ndarray, lam: float) -> float:
        return _match_value_py(x, y, lam)

    def trimmed_match_plan(x: np.ndarray, y: np.ndarray, lam: float):
        return _match_plan_py(x, y, lam)
