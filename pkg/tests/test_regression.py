import numpy as np
import pytest

from robust_ot.errors import AlgorithmFailureError, InvalidArgumentError
from robust_ot.regression import (
    RegressionDataset,
    RobustFitReport,
    ols_fit,
    robot_outlier_step,
    robot_regression,
)
from robust_ot.sampling import child_rng


class TestOlsFit:
    def test_exact_line(self):
        x = np.array([0.0, 1.0, 2.0, 3.0])
        a, b, s = ols_fit(x, 2.0 * x + 1.0)
        assert (a, b) == (pytest.approx(2.0), pytest.approx(1.0))
        assert s == pytest.approx(0.0, abs=1e-12)

    def test_constant_response(self):
        x = np.array([0.0, 1.0, 2.0])
        a, b, s = ols_fit(x, np.array([4.0, 4.0, 4.0]))
        assert a == pytest.approx(0.0)
        assert b == pytest.approx(4.0)
        assert s == pytest.approx(0.0, abs=1e-12)

    def test_consistency(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 10, 10_000)
        y = x + rng.normal(0, 0.1, x.size)
        a, _, _ = ols_fit(x, y)
        assert a == pytest.approx(1.0, abs=0.01)

    def test_degenerate_design(self):
        with pytest.raises(InvalidArgumentError):
            ols_fit(np.ones(5), np.arange(5.0))
        with pytest.raises(InvalidArgumentError):
            ols_fit(np.array([0.0, 1.0]), np.array([0.0, 1.0]))


class TestOutlierStep:
    def test_clean_residuals_unreachable_cap(self):
        # Residuals and reference both inside a band strictly below the cap:
        # no pairing can reach 2*lam, so nothing is flagged.
        rng = child_rng(1, "reference")  # peek at the synthetic draw
        sigma, lam, n = 0.5, 10.0, 200
        ref = sigma * rng.standard_normal(n)
        residuals = 0.5 * np.clip(np.random.default_rng(2).standard_normal(n), -4, 4)
        assert np.abs(residuals).max() + np.abs(ref).max() < 2 * lam
        h = robot_outlier_step(residuals, sigma, lam, n, seed=1)
        assert h.size == 0

    def test_huge_residual_flagged(self):
        rng = np.random.default_rng(3)
        residuals = rng.normal(0, 1, 9).tolist() + [1e6]
        h = robot_outlier_step(np.array(residuals), 1.0, 1.0, 10, seed=4)
        assert 9 in h.tolist()

    def test_huge_lambda_flags_nothing(self):
        rng = np.random.default_rng(5)
        residuals = np.concatenate([rng.normal(0, 1, 20), [50.0]])
        h = robot_outlier_step(residuals, 1.0, 1e9, residuals.size, seed=6)
        assert h.size == 0

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            robot_outlier_step(np.array([1.0]), 0.0, 1.0, 1, seed=0)
        with pytest.raises(InvalidArgumentError):
            robot_outlier_step(np.array([1.0, 2.0]), 1.0, 1.0, 3, seed=0)


def make_contaminated(n=400, eps=0.2, eta=8.0, seed=0):
    rng = child_rng(seed, "gen")
    x = rng.uniform(0, 10, n)
    y = x + 1.0 + rng.normal(0, 1, n)
    n_out = int(round(eps * n))
    idx = child_rng(seed, "pos").choice(n, n_out, replace=False)
    y[idx] += child_rng(seed, "shift").normal(eta + x[idx], 1.0)
    return x, y, np.sort(idx)


class TestRobotRegression:
    def test_clean_data_barely_touched(self):
        # Fresh references can flag a few tie-distance inliers per round, so
        # the "near-empty" contract is on the average removal fraction.
        fracs = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            x = rng.uniform(0, 10, 500)
            y = x + 1.0 + rng.normal(0, 1, 500)
            report = robot_regression(RegressionDataset(x, y), lam=1.0, max_iters=10, seed=seed + 100)
            fracs.append(report.final_removed.size / x.size)
            if seed == 0:
                a0, b0, _ = ols_fit(x, y)
                assert report.alpha_hat == pytest.approx(a0, abs=0.05)
                assert report.beta_hat == pytest.approx(b0, abs=0.2)
        assert np.mean(fracs) < 0.02

    def test_zero_removals_reproduce_ols(self):
        # Perfect-line data: sigma hits 0 immediately, loop exits, fit == OLS.
        x = np.linspace(0, 5, 20)
        y = 3.0 * x - 2.0
        report = robot_regression(RegressionDataset(x, y), lam=1.0, max_iters=5, seed=9)
        assert report.alpha_hat == pytest.approx(3.0, abs=1e-12)
        assert report.beta_hat == pytest.approx(-2.0, abs=1e-12)
        assert report.final_removed.size == 0

    def test_contaminated_recovery(self):
        x, y, out_idx = make_contaminated(seed=10)
        report = robot_regression(RegressionDataset(x, y), lam=1.0, max_iters=10, seed=11)
        a_ols, _, _ = ols_fit(x, y)
        assert abs(report.alpha_hat - 1.0) < abs(a_ols - 1.0)
        recall = np.isin(out_idx, report.final_removed).mean()
        assert recall >= 0.8

    def test_final_mask_matches_last_round(self):
        x, y, _ = make_contaminated(seed=12)
        data = RegressionDataset(x, y)
        report = robot_regression(data, lam=1.0, max_iters=6, seed=13)
        assert np.array_equal(np.nonzero(~report.kept_mask)[0], report.final_removed)
        assert np.array_equal(data.kept_mask, report.kept_mask)
        # the fitted coefficients are exactly OLS on the kept rows
        a, b, _ = ols_fit(x[report.kept_mask], y[report.kept_mask])
        assert report.alpha_hat == pytest.approx(a, abs=1e-12)
        assert report.beta_hat == pytest.approx(b, abs=1e-12)

    def test_total_removal_fails(self):
        # All rows sit absurdly far from any normal reference at tiny lambda.
        x = np.array([0.0, 1.0, 2.0, 3.0])
        y = np.array([0.0, 1e8, -1e8, 1e8])
        with pytest.raises(AlgorithmFailureError):
            robot_regression(RegressionDataset(x, y), lam=1e-6, max_iters=5, seed=14)

    def test_report_roundtrip(self):
        x, y, _ = make_contaminated(n=100, seed=15)
        report = robot_regression(RegressionDataset(x, y), lam=1.0, max_iters=3, seed=16)
        payload = report.to_dict()
        assert payload["iterations"] == report.iterations
        assert isinstance(payload["removed_indices"], list)
        assert isinstance(RobustFitReport().to_dict(), dict)
