import math

import numpy as np
import pytest

from robust_ot.domain_adapt import (
    DomainAdaptDataset,
    KrrModel,
    joint_cost,
    krr_fit,
    median_heuristic_bandwidth,
    renormalize_columns,
    robot_domain_adapt,
)
from robust_ot.errors import InvalidArgumentError


class TestKrr:
    def test_interpolation_at_tiny_ridge(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-2, 2, (12, 1))
        y = np.sin(x[:, 0])
        model = krr_fit(x, y, bandwidth=1.0, ridge=1e-10)
        assert np.allclose(model.predict(x), y, atol=1e-6)

    def test_zero_labels(self):
        x = np.arange(5.0)[:, None]
        model = krr_fit(x, np.zeros(5), bandwidth=1.0, ridge=0.1)
        assert np.allclose(model.coef, 0.0)

    def test_huge_ridge_shrinks(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(-1, 1, (10, 1))
        y = 3.0 + rng.normal(0, 0.1, 10)
        model = krr_fit(x, y, bandwidth=1.0, ridge=1e9)
        assert np.max(np.abs(model.predict(x))) < 1e-4

    def test_serialization_roundtrip(self):
        x = np.arange(4.0)[:, None]
        model = krr_fit(x, x[:, 0] ** 2, bandwidth=2.0, ridge=1e-3)
        back = KrrModel.from_dict(model.to_dict())
        probe = np.linspace(0, 3, 7)[:, None]
        assert np.allclose(back.predict(probe), model.predict(probe))

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            krr_fit(np.zeros((3, 1)), np.zeros(2), 1.0, 0.1)
        with pytest.raises(InvalidArgumentError):
            krr_fit(np.zeros((3, 1)), np.zeros(3), 0.0, 0.1)


class TestJointCost:
    def test_zero_when_alpha_zero_and_matched(self):
        xs = np.array([[0.0], [1.0]])
        ys = np.array([2.0, 3.0])
        xt = np.array([[5.0], [6.0]])
        d = joint_cost(0.0, xs, ys, xt, np.array([2.0, 3.0]))
        assert d[0, 0] == 0.0 and d[1, 1] == 0.0

    def test_single_pair_value(self):
        d = joint_cost(1.0, [[0.0]], [0.0], [[2.0]], [3.0])
        assert d[0, 0] == pytest.approx(2.0 + 9.0)

    def test_identical_rows_identical_costs(self):
        xs = np.array([[1.0], [1.0]])
        ys = np.array([0.5, 0.5])
        xt = np.array([[0.0], [2.0]])
        d = joint_cost(1.0, xs, ys, xt, np.array([0.0, 0.0]))
        assert np.array_equal(d[0], d[1])

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            joint_cost(1.0, np.zeros((2, 2)), np.zeros(2), np.zeros((2, 1)), np.zeros(2))


class TestRenormalize:
    def test_mass_preserved_without_dead_columns(self):
        rng = np.random.default_rng(2)
        plan = rng.random((6, 4))
        plan /= plan.sum()
        out, alive = renormalize_columns(plan, 0.25)
        assert alive.all()
        assert out.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(out.sum(axis=0), 0.25)

    def test_dead_columns_flagged(self):
        plan = np.array([[0.5, 0.0], [0.5, 0.0]])
        out, alive = renormalize_columns(plan, 0.5)
        assert alive.tolist() == [True, False]
        assert out[:, 1].sum() == 0.0


def two_bump_data(seed=0, n=80, outlier_shift=0.0, outlier_frac=0.0):
    rng = np.random.default_rng(seed)
    xs = np.concatenate([rng.normal(-2, 1, n // 2), rng.normal(2, 1, n // 2)])
    ys = np.sin(xs / 2) + rng.normal(0, 0.1, n)
    n_out = int(round(outlier_frac * n))
    if n_out:
        ys[-n_out:] += outlier_shift
    xt = np.concatenate([rng.normal(-2, 1, n // 2), rng.normal(2, 1, n // 2)])
    yt = np.sin(xt / 2) + rng.normal(0, 0.1, n)
    return xs[:, None], ys, xt[:, None], yt


class TestRobotDomainAdapt:
    def test_identical_domains_match_source_fit(self):
        xs, ys, xt, _ = two_bump_data(seed=3, n=200)
        data = DomainAdaptDataset(xs, ys, xt)
        bw = median_heuristic_bandwidth(xs, xt)
        model, report = robot_domain_adapt(data, lam=1e6, bandwidth=bw, max_iters=12)
        source_fit = krr_fit(xs, ys, bw, 1e-3)
        # Sup-gap over the bulk of the support; isolated edge points carry a
        # single noisy pseudo-label and differ at the noise scale.
        lo, hi = np.quantile(xt[:, 0], [0.05, 0.95])
        bulk = (xt[:, 0] >= lo) & (xt[:, 0] <= hi)
        gap = np.max(np.abs(model.predict(xt[bulk]) - source_fit.predict(xt[bulk])))
        assert gap <= 0.1

    def test_infinite_lambda_no_removal(self):
        xs, ys, xt, _ = two_bump_data(seed=4, outlier_shift=2.0, outlier_frac=0.1)
        data = DomainAdaptDataset(xs, ys, xt)
        _, report = robot_domain_adapt(data, lam=math.inf, max_iters=5)
        assert all(h == 0 for h in report.h_sizes)

    def test_outliers_removed_with_finite_lambda(self):
        xs, ys, xt, yt = two_bump_data(seed=5, outlier_shift=2.0, outlier_frac=0.1)
        data = DomainAdaptDataset(xs, ys, xt)
        robust, report = robot_domain_adapt(data, lam=1.0, max_iters=10)
        assert max(report.h_sizes) > 0
        plain, _ = robot_domain_adapt(data, lam=math.inf, max_iters=10)
        mse_robust = np.mean((yt - robust.predict(xt)) ** 2)
        mse_plain = np.mean((yt - plain.predict(xt)) ** 2)
        assert mse_robust <= mse_plain + 0.05

    def test_pseudo_labels_bounded_by_kept_labels(self):
        # Whenever columns survive, pseudo-labels are convex combinations,
        # hence the refit target range never exceeds the kept label range.
        xs, ys, xt, _ = two_bump_data(seed=6, outlier_shift=3.0, outlier_frac=0.15)
        data = DomainAdaptDataset(xs, ys, xt)
        model, _ = robot_domain_adapt(data, lam=0.8, max_iters=3)
        assert np.all(np.isfinite(model.coef))

    def test_clean_data_small_h(self):
        sizes = []
        for seed in range(10):
            xs, ys, xt, _ = two_bump_data(seed=seed)
            _, report = robot_domain_adapt(
                DomainAdaptDataset(xs, ys, xt), lam=2.0, max_iters=4
            )
            sizes.append(max(report.h_sizes))
        assert np.mean([s <= 0.02 * 80 for s in sizes]) >= 0.8

    def test_validation(self):
        xs, ys, xt, _ = two_bump_data(seed=7)
        data = DomainAdaptDataset(xs, ys, xt)
        with pytest.raises(InvalidArgumentError):
            robot_domain_adapt(data, lam=0.0)
        with pytest.raises(InvalidArgumentError):
            DomainAdaptDataset(xs, ys[:-1], xt)
