import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_ot.errors import InvalidArgumentError
from robust_ot.measure import (
    DiscreteMeasure,
    GroundMetric,
    TrimmedCostMatrix,
    build_cost_matrix,
    load_measure_csv,
    save_measure_csv,
    trimmed_cost,
)


class TestTrimmedCost:
    def test_cap_active(self):
        assert trimmed_cost(3.0, 1.0) == 2.0

    def test_zero_distance(self):
        assert trimmed_cost(0.0, 5.0) == 0.0

    def test_below_cap(self):
        assert trimmed_cost(1.5, 1.0) == 1.5

    def test_rejects_bad_inputs(self):
        with pytest.raises(InvalidArgumentError):
            trimmed_cost(-0.1, 1.0)
        with pytest.raises(InvalidArgumentError):
            trimmed_cost(1.0, 0.0)
        with pytest.raises(InvalidArgumentError):
            trimmed_cost(1.0, -2.0)


class TestBuildCostMatrix:
    def test_single_pair(self, euclid):
        mu = DiscreteMeasure.from_points([0.0])
        nu = DiscreteMeasure.from_points([3.0])
        costs = build_cost_matrix(mu, nu, euclid, 1.0)
        assert costs.raw.tolist() == [[3.0]]
        assert costs.trimmed.tolist() == [[2.0]]
        assert costs.trimmed_set.tolist() == [[True]]

    def test_elementwise_min(self, absdiff):
        mu = DiscreteMeasure.from_points([0.0, 10.0])
        nu = DiscreteMeasure.from_points([1.0, 2.0])
        costs = build_cost_matrix(mu, nu, absdiff, 1.0)
        assert costs.trimmed.tolist() == [[1.0, 2.0], [2.0, 2.0]]

    def test_identical_measures_zero_diagonal(self, euclid):
        rng = np.random.default_rng(0)
        mu = DiscreteMeasure.from_points(rng.normal(size=(5, 2)))
        costs = build_cost_matrix(mu, mu, euclid, 0.7)
        assert np.all(np.diag(costs.trimmed) == 0.0)

    def test_dimension_mismatch(self, euclid):
        mu = DiscreteMeasure.from_points(np.zeros((2, 2)))
        nu = DiscreteMeasure.from_points([1.0, 2.0])
        with pytest.raises(InvalidArgumentError):
            build_cost_matrix(mu, nu, euclid, 1.0)

    def test_lambda_monotone_and_raw_recovery(self, euclid):
        rng = np.random.default_rng(1)
        mu = DiscreteMeasure.from_points(rng.normal(size=(6, 2)))
        nu = DiscreteMeasure.from_points(rng.normal(size=(4, 2)))
        c1 = build_cost_matrix(mu, nu, euclid, 0.3)
        c2 = c1.retrim(0.9)
        assert np.all(c1.trimmed <= c2.trimmed)
        big = c1.retrim(0.5 * float(c1.raw.max()) + 1.0)
        assert np.array_equal(big.trimmed, big.raw)
        small = c1.retrim(0.49 * float(c1.raw.max()))
        assert not np.array_equal(small.trimmed, small.raw)

    def test_invariants_on_instance(self):
        raw = np.array([[0.0, 5.0], [2.0, 0.1]])
        costs = TrimmedCostMatrix(raw, 1.0)
        assert np.all(costs.trimmed == np.minimum(raw, 2.0))
        assert np.all(costs.trimmed <= 2.0)
        assert np.array_equal(costs.trimmed_set, raw >= 2.0)


class TestTrimmedMetricAxioms:
    def test_triangle_inequality_exhaustive(self):
        # Capped distance stays a metric: check all triples over small clouds.
        rng = np.random.default_rng(7)
        for trial in range(20):
            pts = rng.normal(0.0, 2.0, size=(rng.integers(3, 11), rng.integers(1, 4)))
            lam = float(rng.uniform(0.05, 3.0))
            metric = GroundMetric("euclidean")
            c = np.minimum(metric.pairwise(pts, pts), 2.0 * lam)
            n = pts.shape[0]
            for i in range(n):
                for j in range(n):
                    for k in range(n):
                        assert c[i, k] <= c[i, j] + c[j, k] + 1e-12

    @given(
        st.lists(st.floats(-50, 50), min_size=2, max_size=2),
        st.lists(st.floats(-50, 50), min_size=2, max_size=2),
        st.floats(0.01, 10.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_symmetry_and_identity(self, p, q, lam):
        metric = GroundMetric("euclidean")
        a, b = np.array(p), np.array(q)
        dab = trimmed_cost(metric.distance(a, b), lam)
        dba = trimmed_cost(metric.distance(b, a), lam)
        assert dab == dba
        assert trimmed_cost(metric.distance(a, a), lam) == 0.0
        assert dab >= 0.0


class TestDiscreteMeasure:
    def test_normalizes_small_deviation(self):
        w = np.array([0.5, 0.5 + 5e-9])
        m = DiscreteMeasure(np.array([[0.0], [1.0]]), w)
        assert m.weights.sum() == pytest.approx(1.0, abs=1e-15)

    def test_rejects_large_deviation(self):
        with pytest.raises(InvalidArgumentError):
            DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([0.5, 0.6]))

    def test_rejects_negative_weight(self):
        with pytest.raises(InvalidArgumentError):
            DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([1.2, -0.2]))

    def test_rejects_empty(self):
        with pytest.raises(InvalidArgumentError):
            DiscreteMeasure(np.zeros((0, 1)), np.zeros(0))

    def test_duplicate_atoms_not_merged(self):
        m = DiscreteMeasure(np.array([[1.0], [1.0]]), np.array([0.25, 0.75]))
        assert m.n == 2

    def test_from_points_uniform(self):
        m = DiscreteMeasure.from_points([3.0, 4.0, 5.0, 9.0])
        assert m.dim == 1
        assert np.all(m.weights == 0.25)
        assert m.is_uniform


class TestMeasureCsv:
    def test_roundtrip_with_weights(self, tmp_path):
        m = DiscreteMeasure(np.array([[0.1, 2.0], [3.0, -4.0]]), np.array([0.3, 0.7]))
        path = tmp_path / "m.csv"
        save_measure_csv(path, m)
        back = load_measure_csv(path)
        assert np.array_equal(back.atoms, m.atoms)
        assert np.array_equal(back.weights, m.weights)

    def test_uniform_when_no_weight_column(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("x0\n1.5\n2.5\n3.5\n")
        m = load_measure_csv(path)
        assert np.all(m.weights == pytest.approx(1 / 3))

    def test_header_required(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1.0\n2.0\n")
        with pytest.raises(InvalidArgumentError):
            load_measure_csv(path)

    def test_metric_validation(self):
        with pytest.raises(InvalidArgumentError):
            GroundMetric("mahalanobis")
