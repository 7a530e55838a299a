"""Discrete probability measures, ground metrics, and trimmed cost matrices.

A trimmed cost caps the ground distance at ``2 * lam``:

    c_lam(x, y) = min(d(x, y), 2 * lam)

which is again a metric whenever ``d`` is one, so transport under it defines
a bounded distance between probability measures.  The cap makes the index set
``{(i, j): d_ij >= 2 * lam}`` special: plan mass riding those pairs is what
identifies outliers downstream.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

WEIGHT_TOL = 1e-8

_METRICS = ("euclidean", "absolute-difference")


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported probability measure on R^d.

    Weights must sum to 1 within ``WEIGHT_TOL``; a deviation below the
    tolerance is silently renormalized, anything larger is rejected so a
    non-measure never slips through.  Duplicate atoms are allowed and their
    weights are not merged.
    """

    atoms: np.ndarray      # (n, d)
    weights: np.ndarray    # (n,)

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        if atoms.ndim != 2 or atoms.shape[0] == 0:
            raise InvalidArgumentError("atoms must be a nonempty (n, d) array")
        if not np.all(np.isfinite(atoms)):
            raise InvalidArgumentError("atoms must be finite")
        weights = np.asarray(self.weights, dtype=float).ravel()
        if weights.shape[0] != atoms.shape[0]:
            raise InvalidArgumentError(
                f"{weights.shape[0]} weights for {atoms.shape[0]} atoms"
            )
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise InvalidArgumentError("weights must be finite and >= 0")
        total = weights.sum()
        if abs(total - 1.0) > WEIGHT_TOL:
            raise InvalidArgumentError(
                f"weights sum to {total!r}, outside 1 +/- {WEIGHT_TOL}"
            )
        weights = weights / total
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    @classmethod
    def from_points(cls, points, weights=None) -> "DiscreteMeasure":
        """Build a measure from raw points; uniform weights by default."""
        atoms = np.atleast_2d(np.asarray(points, dtype=float))
        if atoms.shape[0] == 1 and atoms.shape[1] > 1 and np.ndim(points) == 1:
            atoms = atoms.T  # a flat list of scalars is n points in R^1
        if weights is None:
            weights = np.full(atoms.shape[0], 1.0 / atoms.shape[0])
        return cls(atoms, np.asarray(weights, dtype=float))


@dataclass(frozen=True)
class GroundMetric:
    """Ground metric on the sample space.

    ``euclidean`` works in any dimension; ``absolute-difference`` is the
    d = 1 special case (identical values, kept as a distinct kind because
    several procedures are stated for scalars).
    """

    kind: str = "euclidean"

    def __post_init__(self):
        if self.kind not in _METRICS:
            raise InvalidArgumentError(
                f"unknown metric {self.kind!r}; expected one of {_METRICS}"
            )

    def pairwise(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Dense distance matrix between rows of x and rows of y."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if x.shape[1] != y.shape[1]:
            raise InvalidArgumentError(
                f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}"
            )
        if self.kind == "absolute-difference":
            if x.shape[1] != 1:
                raise InvalidArgumentError("absolute-difference requires d = 1")
            return np.abs(x[:, 0][:, None] - y[:, 0][None, :])
        diff = x[:, None, :] - y[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def distance(self, a, b) -> float:
        return float(self.pairwise(np.atleast_2d(a), np.atleast_2d(b))[0, 0])


def trimmed_cost(d_value: float, lam: float) -> float:
    """min(d, 2*lam); the elementwise trimming rule."""
    if not (d_value >= 0.0):
        raise InvalidArgumentError(f"distance must be >= 0, got {d_value!r}")
    if not (lam > 0.0):
        raise InvalidArgumentError(f"lambda must be > 0, got {lam!r}")
    return min(float(d_value), 2.0 * float(lam))


@dataclass(frozen=True)
class TrimmedCostMatrix:
    """Raw pairwise distances plus their trimmed counterpart at level lam.

    ``trimmed_set`` is the boolean mask of pairs with raw distance >= 2*lam
    (the pairs whose plan mass flags outliers).
    """

    raw: np.ndarray
    lam: float
    trimmed: np.ndarray = field(init=False)
    trimmed_set: np.ndarray = field(init=False)

    def __post_init__(self):
        raw = np.asarray(self.raw, dtype=float)
        if raw.ndim != 2:
            raise InvalidArgumentError("raw cost matrix must be 2-D")
        if np.any(raw < 0) or not np.all(np.isfinite(raw)):
            raise InvalidArgumentError("raw distances must be finite and >= 0")
        if not (self.lam > 0):
            raise InvalidArgumentError(f"lambda must be > 0, got {self.lam!r}")
        raw = raw.copy()
        raw.setflags(write=False)
        trimmed = np.minimum(raw, 2.0 * self.lam)
        trimmed.setflags(write=False)
        trimmed_set = raw >= 2.0 * self.lam
        trimmed_set.setflags(write=False)
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "trimmed", trimmed)
        object.__setattr__(self, "trimmed_set", trimmed_set)

    @property
    def shape(self) -> tuple[int, int]:
        return self.raw.shape

    def retrim(self, lam: float) -> "TrimmedCostMatrix":
        """Re-trim the retained raw matrix at a new level (lambda sweeps)."""
        return TrimmedCostMatrix(self.raw, lam)


def build_cost_matrix(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    metric: GroundMetric,
    lam: float,
) -> TrimmedCostMatrix:
    """Pairwise trimmed cost matrix between the supports of mu and nu."""
    if mu.dim != nu.dim:
        raise InvalidArgumentError(
            f"measures have different dimensions: {mu.dim} vs {nu.dim}"
        )
    return TrimmedCostMatrix(metric.pairwise(mu.atoms, nu.atoms), lam)


def load_measure_csv(path) -> DiscreteMeasure:
    """Read a measure from CSV: one row per atom, coordinate columns, and an
    optional final ``weight`` column (absent means uniform 1/n).

    A header row is required; the weight column is recognized by name.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidArgumentError(f"{path}: empty file") from None
        if any(_looks_numeric(cell) for cell in header):
            raise InvalidArgumentError(f"{path}: header row required")
        has_weight = header and header[-1].strip().lower() in ("weight", "w")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise InvalidArgumentError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise InvalidArgumentError(f"{path}: no atoms")
    data = np.asarray(rows, dtype=float)
    if data.shape[1] != len(header):
        raise InvalidArgumentError(f"{path}: ragged rows")
    if has_weight:
        if data.shape[1] < 2:
            raise InvalidArgumentError(f"{path}: weight column but no coordinates")
        return DiscreteMeasure(data[:, :-1], data[:, -1])
    n = data.shape[0]
    return DiscreteMeasure(data, np.full(n, 1.0 / n))


def save_measure_csv(path, measure: DiscreteMeasure, *, with_weights: bool = True) -> None:
    """Write a measure in the CSV layout accepted by ``load_measure_csv``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        cols = [f"x{i}" for i in range(measure.dim)]
        if with_weights:
            writer.writerow(cols + ["weight"])
            for atom, w in zip(measure.atoms, measure.weights):
                writer.writerow([_fmt(v) for v in atom] + [_fmt(w)])
        else:
            writer.writerow(cols)
            for atom in measure.atoms:
                writer.writerow([_fmt(v) for v in atom])


def _fmt(v: float) -> str:
    """17 significant digits: round-trips exactly through float()."""
    return format(float(v), ".17g")


def _looks_numeric(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return not math.isnan(float(cell))
