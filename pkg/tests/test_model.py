"""Core model: label law, score, sampling, exact population risks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bitlogit.bounds import population_hessian
from bitlogit.model import (
    DistributionSpec,
    LabeledSample,
    Parameter,
    batch_score,
    excess_logistic_risk,
    logistic_loss,
    logistic_prob,
    population_logistic_risk,
    population_logistic_risk_mc,
    sample_label,
    sample_x,
    score,
    sigmoid,
)
from bitlogit.rng import derive_rng


def brute_force_risk(theta_true, theta_hat, points, probs):
    """Oracle: plain-python sum over the support and both labels."""
    total = 0.0
    for x, f in zip(points, probs):
        u_true = float(np.dot(theta_true, x))
        u_hat = float(np.dot(theta_hat, x))
        for y in (-1, 1):
            p_y = 1.0 / (1.0 + math.exp(-y * u_true))
            total += f * p_y * math.log(1.0 + math.exp(-y * u_hat))
    return total


class TestLogisticProb:
    def test_zero_parameter_is_fair(self):
        rng = np.random.default_rng(42)
        for d in (1, 3, 7):
            x = rng.normal(size=d)
            assert logistic_prob(np.zeros(d), x, 1) == 0.5

    def test_label_probabilities_sum_to_one(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            d = rng.integers(1, 6)
            theta = rng.normal(size=d) * 5
            x = rng.normal(size=d) * 5
            total = logistic_prob(theta, x, 1) + logistic_prob(theta, x, -1)
            assert total == pytest.approx(1.0, abs=0)

    def test_hand_value_log3(self):
        # <theta, x> = ln 3 gives 1 / (1 + 1/3) = 3/4
        theta = np.array([math.log(3.0)])
        assert logistic_prob(theta, np.array([1.0]), 1) == pytest.approx(0.75, abs=1e-15)

    def test_stable_at_extreme_margins(self):
        theta = np.array([700.0])
        p = logistic_prob(theta, np.array([1.0]), -1)
        assert 0.0 < p < 1.0
        p = logistic_prob(theta, np.array([-1.0]), 1)
        assert 0.0 < p < 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            logistic_prob(np.zeros(2), np.zeros(3), 1)

    def test_bad_label(self):
        with pytest.raises(ValueError, match="label"):
            logistic_prob(np.zeros(2), np.zeros(2), 0)


class TestScore:
    def test_zero_parameter_halves_features(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=4)
        for y in (-1, 1):
            np.testing.assert_allclose(score(np.zeros(4), (x, y)), 0.5 * y * x)

    def test_label_flip_negates_at_zero(self):
        x = np.array([1.0, -2.0, 0.5])
        np.testing.assert_allclose(score(np.zeros(3), (x, 1)),
                                   -score(np.zeros(3), (x, -1)))

    def test_matches_finite_difference_gradient(self):
        # d log p_theta(x, y) / d theta_i by central differences
        rng = np.random.default_rng(2024)
        theta = rng.normal(size=3)
        x = rng.normal(size=3)
        for y in (-1, 1):
            s = score(theta, (x, y))
            h = 1e-6
            fd = np.empty(3)
            for i in range(3):
                tp, tm = theta.copy(), theta.copy()
                tp[i] += h
                tm[i] -= h
                fd[i] = (math.log(logistic_prob(tp, x, y))
                         - math.log(logistic_prob(tm, x, y))) / (2 * h)
            np.testing.assert_allclose(s, fd, atol=1e-6)

    def test_accepts_labeled_sample(self):
        s = LabeledSample(np.array([1.0, -1.0]), 1)
        np.testing.assert_allclose(score(np.zeros(2), s),
                                   score(np.zeros(2), (s.x, s.y)))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_projection_domination(self, seed):
        # |<u, S>| <= |<u, x>| for any unit u: the prefactor is at most 1
        rng = np.random.default_rng(seed)
        d = int(rng.integers(1, 8))
        theta = rng.normal(size=d) * 3
        x = rng.normal(size=d) * 3
        y = int(rng.choice([-1, 1]))
        u = rng.normal(size=d)
        u /= np.linalg.norm(u)
        s = score(theta, (x, y))
        assert abs(u @ s) <= abs(u @ x) + 1e-12


class TestBatchScore:
    def test_single_sample_batch(self):
        x = np.array([0.3, -0.7])
        np.testing.assert_allclose(batch_score(np.zeros(2), [(x, 1)]),
                                   score(np.zeros(2), (x, 1)))

    def test_two_samples_add_exactly(self):
        rng = np.random.default_rng(0)
        theta = rng.normal(size=3)
        a, b = rng.normal(size=3), rng.normal(size=3)
        expected = score(theta, (a, 1)) + score(theta, (b, -1))
        np.testing.assert_array_equal(batch_score(theta, [(a, 1), (b, -1)]), expected)

    def test_label_negation_cancels_at_zero(self):
        x = np.array([2.0, 1.0])
        out = batch_score(np.zeros(2), [(x, 1), (x, -1)])
        np.testing.assert_array_equal(out, np.zeros(2))

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            batch_score(np.zeros(2), [])


class TestZeroMeanScore:
    def test_score_has_zero_mean_under_model(self):
        # sum_{x,y} f(x) p_theta(y|x) S_theta(x,y) = 0 on finite supports
        rng = np.random.default_rng(5)
        for d in (1, 2, 3, 4):
            theta = rng.normal(size=d)
            dist = DistributionSpec.uniform_hypercube(d)
            points, probs = dist.support()
            mean = np.zeros(d)
            for x, f in zip(points, probs):
                for y in (-1, 1):
                    mean += f * logistic_prob(theta, x, y) * score(theta, (x, y))
            np.testing.assert_allclose(mean, 0.0, atol=1e-10)


class TestSampling:
    def test_hypercube_support(self):
        rng = derive_rng(1, "support")
        draws = sample_x(DistributionSpec.uniform_hypercube(2), rng, 50)
        assert set(np.unique(draws)) <= {-1.0, 1.0}

    def test_single_atom_is_degenerate(self):
        x0 = np.array([0.5, -2.0])
        dist = DistributionSpec.single_atom(x0)
        rng = derive_rng(1, "atom")
        np.testing.assert_array_equal(sample_x(dist, rng), x0)

    def test_hypercube_coordinate_means(self):
        rng = derive_rng(1, "means")
        draws = sample_x(DistributionSpec.uniform_hypercube(8), rng, 100_000)
        assert np.max(np.abs(draws.mean(axis=0))) < 0.02

    def test_fair_labels_at_zero_parameter(self):
        rng = derive_rng(1, "fair")
        x = np.ones((100_000, 3))
        y = sample_label(np.zeros(3), x, rng)
        assert abs(np.mean(y == 1) - 0.5) < 0.01

    def test_saturated_labels(self):
        rng = derive_rng(1, "saturated")
        x = np.ones((10_000, 1))
        y = sample_label(np.array([20.0]), x, rng)
        assert np.mean(y == 1) > 0.999

    def test_streams_replay(self):
        a = sample_x(DistributionSpec.spherical_gaussian(3, 1.0), derive_rng(9, "s"), 10)
        b = sample_x(DistributionSpec.spherical_gaussian(3, 1.0), derive_rng(9, "s"), 10)
        np.testing.assert_array_equal(a, b)
        ya = sample_label(np.ones(3), a, derive_rng(9, "labels"))
        yb = sample_label(np.ones(3), b, derive_rng(9, "labels"))
        np.testing.assert_array_equal(ya, yb)


class TestPopulationRisk:
    def test_zero_estimate_risk_is_log_two(self):
        rng = np.random.default_rng(3)
        for d in (1, 3):
            theta_true = rng.normal(size=d)
            dist = DistributionSpec.uniform_hypercube(d)
            risk = population_logistic_risk(theta_true, np.zeros(d), dist)
            assert risk == pytest.approx(math.log(2.0), abs=1e-14)

    def test_matches_brute_force_enumeration(self):
        dist = DistributionSpec.uniform_hypercube(2)
        points, probs = dist.support()
        theta_true = np.array([1.0, 0.0])
        risk = population_logistic_risk(theta_true, theta_true, dist)
        assert risk == pytest.approx(
            brute_force_risk(theta_true, theta_true, points, probs), abs=1e-14)

    def test_random_pairs_match_oracle(self):
        rng = np.random.default_rng(11)
        dist = DistributionSpec.uniform_hypercube(3)
        points, probs = dist.support()
        for _ in range(20):
            th, tt = rng.normal(size=3), rng.normal(size=3)
            assert population_logistic_risk(tt, th, dist) == pytest.approx(
                brute_force_risk(tt, th, points, probs), abs=1e-13)

    def test_excess_risk_nonnegative(self):
        rng = np.random.default_rng(8)
        dist = DistributionSpec.uniform_hypercube(3)
        for _ in range(100):
            tt = rng.normal(size=3) * 2
            th = rng.normal(size=3) * 2
            assert excess_logistic_risk(tt, th, dist) >= -1e-12

    def test_excess_zero_at_truth(self):
        dist = DistributionSpec.uniform_hypercube(2)
        theta = np.array([0.7, -0.2])
        assert excess_logistic_risk(theta, theta, dist) == 0.0

    def test_excess_second_order_taylor(self):
        # excess(theta + eps u) ~= eps^2/2 u^T H u for the exact Hessian H
        rng = np.random.default_rng(21)
        dist = DistributionSpec.uniform_hypercube(3)
        theta = rng.normal(size=3)
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        eps = 1e-3
        excess = excess_logistic_risk(theta, theta + eps * u, dist)
        h = population_hessian(theta, dist)
        quad = 0.5 * eps**2 * float(u @ h @ u)
        assert excess == pytest.approx(quad, rel=0.1)

    def test_one_dimensional_enumeration(self):
        # d=1 hypercube, theta_true=0, theta_hat=1: oracle by direct sum
        dist = DistributionSpec.uniform_hypercube(1)
        value = population_logistic_risk(np.zeros(1), np.ones(1), dist)
        expected = 0.0
        for x in (-1.0, 1.0):
            for y in (-1, 1):
                # f(x) = 1/2 and p_0(y|x) = 1/2
                expected += 0.25 * math.log(1.0 + math.exp(-y * x))
        assert value == pytest.approx(expected, abs=1e-15)
        excess = excess_logistic_risk(np.zeros(1), np.ones(1), dist)
        assert excess == pytest.approx(expected - math.log(2.0), abs=1e-15)

    def test_risk_convexity_in_estimate(self):
        rng = np.random.default_rng(13)
        dist = DistributionSpec.uniform_hypercube(3)
        tt = rng.normal(size=3)
        for _ in range(50):
            a, b = rng.normal(size=3) * 2, rng.normal(size=3) * 2
            t = rng.uniform(0.05, 0.95)
            lhs = population_logistic_risk(tt, t * a + (1 - t) * b, dist)
            rhs = (t * population_logistic_risk(tt, a, dist)
                   + (1 - t) * population_logistic_risk(tt, b, dist))
            assert lhs <= rhs + 1e-12

    def test_large_dimension_needs_monte_carlo(self):
        dist = DistributionSpec.uniform_hypercube(21)
        with pytest.raises(ValueError, match="population_logistic_risk_mc"):
            population_logistic_risk(np.zeros(21), np.zeros(21), dist)

    def test_monte_carlo_agrees_with_exact(self):
        dist = DistributionSpec.uniform_hypercube(4)
        rng = derive_rng(2, "mc-risk")
        theta = np.array([0.5, -0.5, 0.25, 0.0])
        exact = population_logistic_risk(theta, np.zeros(4), dist)
        est = population_logistic_risk_mc(theta, np.zeros(4), dist, 50_000, rng)
        assert abs(est.value - exact) < 4 * max(est.stderr, 1e-12) + 1e-6


class TestDomainTypes:
    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            Parameter(np.array([np.inf]))
        with pytest.raises(ValueError):
            Parameter(np.array([[1.0]]))
        p = Parameter(np.array([1.0, 2.0]), box_radius=3.0)
        assert p.d == 2
        np.testing.assert_array_equal(np.asarray(p), [1.0, 2.0])

    def test_labeled_sample_validation(self):
        with pytest.raises(ValueError):
            LabeledSample(np.array([1.0]), 2)
        s = LabeledSample([1.0, -1.0], -1)
        assert s.y == -1

    def test_finite_support_probabilities_checked(self):
        with pytest.raises(ValueError, match="sum"):
            DistributionSpec.finite_support(np.eye(2), [0.5, 0.6])

    def test_dict_round_trip(self):
        for spec in (
            DistributionSpec.uniform_hypercube(3),
            DistributionSpec.spherical_gaussian(2, 1.5),
            DistributionSpec.product_laplace(2, 0.7),
            DistributionSpec.finite_support([[1.0, 0.0], [0.0, 1.0]], [0.25, 0.75]),
        ):
            back = DistributionSpec.from_dict(spec.to_dict())
            assert back.kind == spec.kind
            assert back.d == spec.d
            assert back.tail_class == spec.tail_class

    def test_sigmoid_saturation_behavior(self):
        assert sigmoid(800.0) == 1.0
        assert sigmoid(-800.0) == 0.0
        assert 0.0 < sigmoid(-700.0) < 1.0
        assert logistic_loss(0.0) == pytest.approx(math.log(2.0))
