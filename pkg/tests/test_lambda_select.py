import math

import numpy as np
import pytest

from robust_ot.errors import InvalidArgumentError
from robust_ot.lambda_select import (
    absolute_slopes,
    log_grid,
    q_ratio,
    select_lambda,
    select_lambda_for_sample,
)
from robust_ot.measure import DiscreteMeasure
from robust_ot.sampling import ContaminationSpec, GenerativeModelSpec, contaminate


class TestQRatio:
    def test_tau_zero_is_one(self):
        for sigma, lam, t in [(1.0, 2.0, 1.0), (0.3, 10.0, 2.0), (0.0, 1.0, 0.5)]:
            assert q_ratio(100, 0.0, lam, t, sigma) == pytest.approx(1.0)

    def test_sigma_zero_simplifies(self):
        n, tau, t = 200, 0.1, 1.0
        assert q_ratio(n, tau, 7.0, t, 0.0) == pytest.approx(t / (t + tau * n))

    def test_in_unit_interval(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            v = q_ratio(
                int(rng.integers(10, 1000)),
                float(rng.uniform(0.0, 0.5)),
                float(rng.uniform(0.01, 100.0)),
                float(rng.uniform(0.1, 5.0)),
                float(rng.uniform(0.0, 10.0)),
            )
            assert 0.0 < v <= 1.0 + 1e-12

    def test_rejects_bad_tau(self):
        with pytest.raises(InvalidArgumentError):
            q_ratio(10, 1.0, 1.0, 1.0, 1.0)


class TestAbsoluteSlopes:
    def test_constant_curve(self):
        assert absolute_slopes([1.0, 2.0, 3.0], [0.4, 0.4, 0.4]).tolist() == [0.0, 0.0]

    def test_simple_case(self):
        assert absolute_slopes([1.0, 2.0], [1.0, 0.5]).tolist() == [0.5]

    def test_matches_finite_differences(self):
        # Analytic Q with constant sigma: slopes track the derivative.
        n, tau, t, sigma = 200, 0.1, 1.0, 2.0
        grid = np.linspace(1.0, 40.0, 400)
        q = np.array([q_ratio(n, tau, lam, t, sigma) for lam in grid])
        slopes = absolute_slopes(grid, q)
        h = grid[1] - grid[0]
        centered = np.abs((q[2:] - q[:-2]) / (2 * h))
        mids = 0.5 * (slopes[1:] + slopes[:-1])
        assert np.allclose(mids, centered, atol=1e-6)

    def test_rejects_non_increasing_grid(self):
        with pytest.raises(InvalidArgumentError):
            absolute_slopes([1.0, 1.0], [0.0, 0.0])


class TestSelectLambda:
    def test_all_qualify(self):
        lam, warned = select_lambda([1.0, 2.0, 3.0], [0.0005, 0.0001], iota=0.001)
        assert lam == 1.0 and not warned

    def test_first_suffix(self):
        grid = [1.0, 2.0, 3.0, 4.0, 5.0]
        slopes = [0.5, 0.002, 0.0005, 0.0004]
        lam, warned = select_lambda(grid, slopes, iota=0.001)
        assert lam == 3.0 and not warned

    def test_no_suffix_warns(self):
        lam, warned = select_lambda([1.0, 2.0, 3.0], [0.5, 0.4], iota=0.001)
        assert lam == 3.0 and warned

    def test_grid_refinement_invariance(self):
        grid = [1.0, 2.0, 3.0, 4.0, 5.0]
        slopes = [0.5, 0.002, 0.0005, 0.0004]
        lam, _ = select_lambda(grid, slopes, iota=0.001)
        refined = grid + [6.0, 7.0]
        refined_slopes = slopes + [0.0003, 0.0002]
        lam2, _ = select_lambda(refined, refined_slopes, iota=0.001)
        assert lam2 == lam

    def test_rejects_empty(self):
        with pytest.raises(InvalidArgumentError):
            select_lambda([], [], iota=0.1)


@pytest.fixture(scope="module")
def contaminated_sample():
    model = GenerativeModelSpec("lognormal-sum", {"gamma": 0.0, "sigma": 1.0, "L": 10})
    spec = ContaminationSpec(0.1, 4.0, "location-shift")
    sample, _, _ = contaminate(model, spec, 200, seed=11)
    return DiscreteMeasure.from_points(sample)


class TestPipeline:
    def test_report_shape(self, contaminated_sample):
        report = select_lambda_for_sample(contaminated_sample)
        assert report.grid.shape[0] == 60
        assert np.all((report.q_values > 0) & (report.q_values <= 1 + 1e-12))
        assert np.all(report.as_values >= 0)
        assert report.lambda_star in report.grid

    def test_q_nonincreasing_on_benchmark(self):
        # Empirical monotonicity on the benchmark generator (not asserted
        # for arbitrary samples; the plug-in sigma must be concave-ish).
        model = GenerativeModelSpec("lognormal-sum", {"gamma": 0.0, "sigma": 1.0, "L": 10})
        spec = ContaminationSpec(0.1, 4.0, "location-shift")
        for seed in range(8):
            sample, _, _ = contaminate(model, spec, 200, seed=seed)
            report = select_lambda_for_sample(DiscreteMeasure.from_points(sample))
            diffs = np.diff(report.q_values)
            assert np.all(diffs <= 1e-6)

    def test_selected_level_matches_benchmark_range(self, contaminated_sample):
        report = select_lambda_for_sample(contaminated_sample)
        assert not report.warned
        assert 2.0 <= math.log(report.lambda_star) <= 5.0

    def test_log_grid_validation(self):
        with pytest.raises(InvalidArgumentError):
            log_grid(2.0, 1.0)
