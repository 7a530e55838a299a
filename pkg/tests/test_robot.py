import itertools
import math

import numpy as np
import pytest

from conftest import random_measure
from robust_ot.errors import InvalidArgumentError
from robust_ot.measure import DiscreteMeasure, GroundMetric
from robust_ot.robot import (
    merged_potential,
    recover_tv_modification,
    robot_distance,
    robot_value,
    sensitivity_curve,
    verify_dual,
)
from robust_ot.solver import w1_distance


def check_solution_invariants(sol, mu):
    assert -1e-12 <= sol.value <= 2.0 * sol.lam + 1e-9
    assert np.all(sol.s <= 1e-12)
    assert sum(sol.s) == pytest.approx(-sol.trimmed_mass, abs=1e-9)
    assert np.all(mu.weights + sol.s >= -1e-9)


class TestRobotDistance:
    def test_point_masses_capped(self, euclid):
        mu = DiscreteMeasure.from_points([0.0])
        nu = DiscreteMeasure.from_points([3.0])
        sol = robot_distance(mu, nu, euclid, 1.0)
        assert sol.value == pytest.approx(2.0)
        check_solution_invariants(sol, mu)

    def test_two_atom_enumeration(self, absdiff):
        mu = DiscreteMeasure.from_points([0.0, 10.0])
        nu = DiscreteMeasure.from_points([1.0, 2.0])
        sol = robot_distance(mu, nu, absdiff, 1.0)
        assert sol.value == pytest.approx(1.5)
        check_solution_invariants(sol, mu)

    def test_identity(self, euclid):
        rng = np.random.default_rng(0)
        mu = random_measure(rng, max_atoms=8, dim=2)
        for lam in (0.1, 1.0, 50.0):
            assert robot_distance(mu, mu, euclid, lam).value == pytest.approx(0.0, abs=1e-10)

    def test_symmetry(self, euclid):
        rng = np.random.default_rng(1)
        for _ in range(10):
            mu = random_measure(rng, max_atoms=10, dim=2)
            nu = random_measure(rng, max_atoms=10, dim=2)
            lam = float(rng.uniform(0.1, 3.0))
            assert robot_distance(mu, nu, euclid, lam).value == pytest.approx(
                robot_distance(nu, mu, euclid, lam).value, abs=1e-9
            )

    def test_metric_axioms_sampled(self, euclid):
        rng = np.random.default_rng(2)
        for _ in range(25):
            measures = [random_measure(rng, max_atoms=8, dim=2) for _ in range(3)]
            lam = float(rng.uniform(0.2, 3.0))
            d01 = robot_value(measures[0], measures[1], euclid, lam)
            d12 = robot_value(measures[1], measures[2], euclid, lam)
            d02 = robot_value(measures[0], measures[2], euclid, lam)
            assert d02 <= d01 + d12 + 1e-8

    def test_monotone_in_lambda_and_w1_limit(self, euclid):
        rng = np.random.default_rng(3)
        for _ in range(10):
            mu = random_measure(rng, max_atoms=8, dim=1)
            nu = random_measure(rng, max_atoms=6, dim=1)
            lams = np.linspace(0.05, 4.0, 12)
            values = [robot_value(mu, nu, euclid, lam) for lam in lams]
            assert all(v1 <= v2 + 1e-9 for v1, v2 in zip(values, values[1:]))
            w1 = w1_distance(mu, nu, euclid)
            assert all(v <= w1 + 1e-9 for v in values)
            assert all(v <= 2 * lam + 1e-12 for v, lam in zip(values, lams))
            dmax = float(
                np.abs(mu.atoms[:, 0][:, None] - nu.atoms[:, 0][None, :]).max()
            )
            assert robot_value(mu, nu, euclid, 0.5 * dmax + 1e-9) == pytest.approx(
                w1, abs=1e-9
            )

    def test_value_routes_agree(self, euclid, absdiff):
        # 1-D fast kernel vs the generic LP/assignment route.
        rng = np.random.default_rng(4)
        for _ in range(10):
            n = int(rng.integers(2, 30))
            m = int(rng.integers(2, 30))
            mu = DiscreteMeasure.from_points(rng.normal(0, 2, n))
            nu = DiscreteMeasure.from_points(rng.normal(1, 2, m))
            lam = float(rng.uniform(0.1, 2.0))
            fast = robot_value(mu, nu, absdiff, lam)
            full = robot_distance(mu, nu, euclid, lam).value
            assert fast == pytest.approx(full, abs=1e-9)

    def test_rejects_bad_lambda(self, euclid):
        mu = DiscreteMeasure.from_points([0.0])
        with pytest.raises(InvalidArgumentError):
            robot_distance(mu, mu, euclid, 0.0)

    def test_contamination_moves_capped_distance_little(self, euclid):
        # Offset Gaussian clouds; replanting 20% of the source far away
        # barely moves the capped distance while the untrimmed one jumps.
        from robust_ot.sampling import child_rng

        rel_capped, rel_plain = [], []
        for seed in range(20):
            rng = child_rng(seed, "fig1")
            n = 150
            clean = rng.normal(-1, 1, (n, 2))
            target = rng.normal(1, 1, (n, 2))
            contaminated = clean.copy()
            contaminated[-n // 5 :] = rng.normal(-9, 1, (n // 5, 2))
            mu_c = DiscreteMeasure.from_points(clean)
            mu_d = DiscreteMeasure.from_points(contaminated)
            nu = DiscreteMeasure.from_points(target)
            base = robot_value(mu_c, nu, euclid, 3.0)
            moved = robot_value(mu_d, nu, euclid, 3.0)
            rel_capped.append(abs(moved - base) / base)
            w_base = w1_distance(mu_c, nu, euclid)
            w_moved = w1_distance(mu_d, nu, euclid)
            rel_plain.append(abs(w_moved - w_base) / w_base)
        assert np.mean(rel_capped) < 0.25
        assert np.mean(rel_plain) > 0.60


class TestTvModification:
    def test_no_trimmed_mass(self, absdiff):
        mu = DiscreteMeasure.from_points([0.0, 1.0])
        nu = DiscreteMeasure.from_points([0.5, 1.5])
        sol = robot_distance(mu, nu, absdiff, 10.0)
        s, outliers = recover_tv_modification(sol, mu)
        assert np.all(s == 0.0)
        assert outliers.size == 0

    def test_full_trim(self, euclid):
        mu = DiscreteMeasure.from_points([0.0])
        nu = DiscreteMeasure.from_points([100.0])
        sol = robot_distance(mu, nu, euclid, 1.0)
        s, outliers = recover_tv_modification(sol, mu)
        assert s.tolist() == [-1.0]
        assert outliers.tolist() == [0]

    def test_three_atom_outlier_bruteforce(self, absdiff):
        # One source atom beyond the cap from every target; enumerate all
        # permutation couplings to confirm its mass rides trimmed edges.
        mu = DiscreteMeasure.from_points([0.0, 1.0, 50.0])
        nu = DiscreteMeasure.from_points([0.2, 0.9, 1.4])
        lam = 1.0
        raw = np.abs(mu.atoms[:, 0][:, None] - nu.atoms[:, 0][None, :])
        trimmed = np.minimum(raw, 2 * lam)
        best = min(
            (sum(trimmed[i, p[i]] for i in range(3)), p)
            for p in itertools.permutations(range(3))
        )
        assert raw[2, best[1][2]] >= 2 * lam
        sol = robot_distance(mu, nu, absdiff, lam)
        _, outliers = recover_tv_modification(sol, mu)
        assert outliers.tolist() == [2]


class TestVerifyDual:
    def test_zero_potential(self, euclid):
        rng = np.random.default_rng(5)
        mu = random_measure(rng, max_atoms=6, dim=2)
        nu = random_measure(rng, max_atoms=6, dim=2)
        lam = 1.0
        feasible, dual_value, gap = verify_dual(
            mu, nu, euclid, lam, np.zeros(mu.n + nu.n)
        )
        assert feasible
        assert dual_value == 0.0
        assert gap >= -1e-12
        assert gap == pytest.approx(robot_value(mu, nu, euclid, lam), abs=1e-12)

    def test_merged_optimal_potential(self, euclid):
        rng = np.random.default_rng(6)
        for _ in range(25):
            mu = random_measure(rng, max_atoms=30, dim=2)
            nu = random_measure(rng, max_atoms=30, dim=2)
            lam = float(rng.uniform(0.2, 3.0))
            psi = merged_potential(mu, nu, euclid, lam)
            feasible, _, gap = verify_dual(mu, nu, euclid, lam, psi)
            assert feasible
            assert abs(gap) <= 1e-8

    def test_constructed_violation(self, euclid):
        mu = DiscreteMeasure.from_points([[0.0], [0.5]])
        nu = DiscreteMeasure.from_points([[0.25]])
        lam = 1.0
        psi = np.array([0.0, 2.0 * lam + 1.0, 0.0])
        feasible, _, _ = verify_dual(mu, nu, euclid, lam, psi)
        assert not feasible

    def test_length_mismatch(self, euclid):
        mu = DiscreteMeasure.from_points([0.0])
        nu = DiscreteMeasure.from_points([1.0])
        with pytest.raises(InvalidArgumentError):
            verify_dual(mu, nu, euclid, 1.0, np.zeros(3))


class TestSensitivityCurve:
    def test_no_replacement_effect(self):
        sample = DiscreteMeasure.from_points([0.5, -0.3, 1.2])
        curve = sensitivity_curve(sample, [1.2], lam=2.0)
        assert curve[0][1] == 0.0

    def test_cap_when_far(self):
        sample = DiscreteMeasure.from_points([0.0, 0.0, 0.0, 0.0])
        lam = 1.5
        for x in (3.0, -3.0, 100.0):
            (_, delta), = sensitivity_curve(sample, [x], lam=lam)
            assert delta == 2.0 * lam  # exact saturation

    def test_analytic_form(self):
        # Replacing one atom moves 1/n mass: the curve equals
        # min(|x - last_atom|, 2*lam) exactly (dual certificate).
        rng = np.random.default_rng(7)
        atoms = rng.standard_normal(64)
        sample = DiscreteMeasure.from_points(atoms)
        lam = 1.0
        grid = np.linspace(-8, 8, 33)
        for x, delta in sensitivity_curve(sample, grid, lam):
            assert delta == pytest.approx(min(abs(x - atoms[-1]), 2 * lam), abs=1e-9)

    def test_untrimmed_curve_unbounded(self):
        rng = np.random.default_rng(8)
        sample = DiscreteMeasure.from_points(rng.standard_normal(32))
        far = 1e6
        (_, delta), = sensitivity_curve(sample, [far], lam=math.inf)
        assert delta > 1e5

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            sensitivity_curve(DiscreteMeasure.from_points([1.0]), [0.0], 1.0)
        two_d = DiscreteMeasure.from_points(np.zeros((3, 2)))
        with pytest.raises(InvalidArgumentError):
            sensitivity_curve(two_d, [0.0], 1.0)
