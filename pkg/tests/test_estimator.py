"""Averaged SGD, per-group assembly, and the class-conditional data law."""

import math
import warnings

import numpy as np
import pytest

from bitlogit.estimator import (
    SGDConfig,
    ZeroSampleGroupWarning,
    class_conditional_x_marginal,
    distributed_estimate,
    sample_class_conditional,
    sgd_logistic,
    solve_groups,
    verify_class_conditional_construction,
)
from bitlogit.model import (
    DistributionSpec,
    excess_logistic_risk,
    logistic_loss,
    logistic_prob,
    score,
    sigmoid,
)
from bitlogit.quantize import Message, decode_group, encode_group, make_group_partition
from bitlogit.rng import derive_rng


class TestSgdLogistic:
    def test_monotone_likelihood_run(self):
        # all-positive labels on x = +1 push the estimate up toward the ball
        config = SGDConfig()
        outs = []
        for n in (2, 10, 2000):
            samples = [(np.array([1.0]), 1)] * n
            est = sgd_logistic(samples, config, derive_rng(0, "mono", n))
            outs.append(est.item())
        assert outs[0] > 0
        assert outs[0] <= outs[1] <= outs[2] <= 2.0  # rho = 2 sqrt(1)
        assert outs[2] > 1.9  # pinned near the projection radius

    def test_null_model_estimate_stays_small(self):
        rng = derive_rng(1, "null")
        x, y = sample_class_conditional(np.zeros(2), 10_000, rng)
        samples = list(zip(x, y.astype(int)))
        theta_hat = sgd_logistic(samples, SGDConfig(), derive_rng(1, "sgd"))
        assert float(np.linalg.norm(theta_hat)) <= 0.15

    def test_step_gradient_is_negated_score(self):
        # the loss gradient equals minus the score; cross-check by finite
        # differences of the loss itself
        rng = np.random.default_rng(7)
        theta = rng.normal(size=3)
        x = rng.normal(size=3)
        for y in (-1, 1):
            grad = -score(theta, (x, y))
            h = 1e-6
            fd = np.empty(3)
            for i in range(3):
                tp, tm = theta.copy(), theta.copy()
                tp[i] += h
                tm[i] -= h
                fd[i] = (logistic_loss(y * float(x @ tp))
                         - logistic_loss(y * float(x @ tm))) / (2 * h)
            np.testing.assert_allclose(grad, fd, atol=1e-6)

    def test_iterates_stay_in_ball(self):
        rng = derive_rng(2, "ball-data")
        x, y = sample_class_conditional(np.array([3.0, -3.0]), 500, rng)
        samples = list(zip(x, y.astype(int)))
        config = SGDConfig(step_scale=5.0, projection_radius=0.7)
        seen = []
        sgd_logistic(samples, config, derive_rng(2, "ball-sgd"),
                     iterate_hook=lambda t, th: seen.append(np.linalg.norm(th)))
        assert max(seen) <= 0.7 + 1e-12

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            sgd_logistic([], SGDConfig(), derive_rng(0, "x"))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SGDConfig(step_scale=0.0)
        with pytest.raises(ValueError):
            SGDConfig(epochs=0)
        with pytest.raises(ValueError):
            SGDConfig(projection_radius=-1.0)

    def test_averaging_start_must_leave_steps(self):
        samples = [(np.array([1.0]), 1)] * 4
        with pytest.raises(ValueError, match="averaging_start"):
            sgd_logistic(samples, SGDConfig(averaging_start=4), derive_rng(0, "a"))


def build_messages(theta, n, assignment, seed):
    x, y = sample_class_conditional(theta, n, derive_rng(seed, "data"))
    return [encode_group((x[i], int(y[i])), assignment, i) for i in range(n)]


class TestDistributedEstimate:
    def test_single_group_reduces_to_plain_sgd(self):
        d, k, n = 3, 4, 400
        theta = np.array([0.5, -0.25, 0.1])
        assignment = make_group_partition(d=d, k=k, n=n)
        assert assignment.n_groups == 1
        messages = build_messages(theta, n, assignment, seed=3)
        config = SGDConfig()
        est = distributed_estimate(messages, assignment, config, derive_rng(3, "sgd"))
        # the assembly sorts a group's samples by message value before the
        # seeded shuffle; reproduce the same stream and ordering directly
        direct_samples = [decode_group(Message(m, k), assignment, 0)
                          for m in sorted(msg.m for msg in messages)]
        direct = sgd_logistic(direct_samples, config,
                              derive_rng(3, "sgd").spawn(1)[0])
        np.testing.assert_array_equal(est, direct)

    def test_within_group_permutation_invariance(self):
        d, k, n = 4, 3, 200
        theta = np.array([1.0, -1.0, 0.5, -0.5])
        assignment = make_group_partition(d=d, k=k, n=n)
        messages = build_messages(theta, n, assignment, seed=4)
        base = distributed_estimate(messages, assignment, SGDConfig(),
                                    derive_rng(4, "sgd"))
        # swap two messages routed to the same group (indices i, i + n_groups)
        permuted = list(messages)
        g = assignment.n_groups
        permuted[0], permuted[g] = permuted[g], permuted[0]
        again = distributed_estimate(permuted, assignment, SGDConfig(),
                                     derive_rng(4, "sgd"))
        np.testing.assert_array_equal(base, again)

    def test_recovery_at_moderate_sample_size(self):
        d, k, n = 4, 3, 20_000
        theta = np.array([1.0, -1.0, 0.5, -0.5])
        assignment = make_group_partition(d=d, k=k, n=n)
        messages = build_messages(theta, n, assignment, seed=5)
        est = distributed_estimate(messages, assignment, SGDConfig(),
                                   derive_rng(5, "sgd"))
        assert float(np.linalg.norm(est - theta)) <= 0.2

    def test_scatter_covers_each_coordinate_once(self):
        d, k, n = 5, 3, 60
        theta = np.zeros(d)
        assignment = make_group_partition(d=d, k=k, n=n)
        messages = build_messages(theta, n, assignment, seed=6)
        estimates = solve_groups(messages, assignment, SGDConfig(),
                                 derive_rng(6, "sgd"))
        covered = [j for est in estimates
                   for j in assignment.groups[est.group_id]]
        assert sorted(covered) == list(range(d))

    def test_zero_sample_group_flagged(self):
        assignment = make_group_partition(d=4, k=3, n=1)
        theta = np.zeros(4)
        messages = build_messages(theta, 1, assignment, seed=7)
        with pytest.warns(ZeroSampleGroupWarning):
            est = distributed_estimate(messages, assignment, SGDConfig(),
                                       derive_rng(7, "sgd"))
        np.testing.assert_array_equal(est[2:], 0.0)

    def test_message_budget_mismatch_rejected(self):
        assignment = make_group_partition(d=4, k=3, n=2)
        bad = [Message(0, 2), Message(0, 2)]
        with pytest.raises(ValueError, match="k="):
            distributed_estimate(bad, assignment, SGDConfig(), derive_rng(0, "m"))

    def test_message_count_mismatch_rejected(self):
        assignment = make_group_partition(d=4, k=3, n=4)
        with pytest.raises(ValueError, match="messages"):
            distributed_estimate([Message(0, 3)], assignment, SGDConfig(),
                                 derive_rng(0, "m"))


class TestClassConditionalData:
    def test_fair_labels_and_agreement_rates(self):
        theta = np.array([1.0, -0.5])
        rng = derive_rng(8, "freq")
        x, y = sample_class_conditional(theta, 200_000, rng)
        assert abs(np.mean(y == 1) - 0.5) < 0.01
        agree = x * y[:, None]
        np.testing.assert_allclose(np.mean(agree == 1, axis=0),
                                   sigmoid(theta), atol=0.01)

    def test_replayable(self):
        theta = np.array([0.3, 0.1, -0.2])
        a = sample_class_conditional(theta, 50, derive_rng(9, "rep"))
        b = sample_class_conditional(theta, 50, derive_rng(9, "rep"))
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_marginal_matches_long_run_frequencies(self):
        theta = np.array([0.8, -0.3])
        dist = class_conditional_x_marginal(theta)
        rng = derive_rng(10, "marg")
        x, _ = sample_class_conditional(theta, 400_000, rng)
        points, probs = dist.support()
        for point, p in zip(points, probs):
            freq = np.mean(np.all(x == point, axis=1))
            assert freq == pytest.approx(p, abs=0.005)

    def test_marginal_uniform_at_zero(self):
        dist = class_conditional_x_marginal(np.zeros(3))
        _, probs = dist.support()
        np.testing.assert_allclose(probs, 1 / 8, atol=1e-15)

    def test_joint_reconstruction_is_exact(self):
        # f(x) p_theta(y|x) from the marginal must equal the construction's
        # joint (1/2) prod_j p(x_j | y), point by point
        theta = np.array([0.9, -1.4])
        dist = class_conditional_x_marginal(theta)
        points, probs = dist.support()
        agree_prob = sigmoid(theta)
        for x, f in zip(points, probs):
            for y in (-1, 1):
                lhs = f * logistic_prob(theta, x, y)
                rhs = 0.5
                for j in range(2):
                    rhs *= agree_prob[j] if x[j] == y else 1.0 - agree_prob[j]
                assert lhs == pytest.approx(rhs, rel=1e-12)


class TestConstructionCheck:
    def test_zero_parameter_posterior_is_half(self):
        check = verify_class_conditional_construction(np.zeros(3))
        assert check.ok
        assert check.posterior_max_err <= 1e-15

    def test_log3_two_dimensional_case(self):
        theta = np.array([math.log(3.0), 0.0])
        check = verify_class_conditional_construction(theta)
        assert check.ok
        # spot check one point by hand: P(+1 | x) = sigmoid(<theta, x>)
        dist = class_conditional_x_marginal(theta)
        points, _ = dist.support()
        for x in points:
            assert logistic_prob(theta, x, 1) == pytest.approx(
                sigmoid(float(x @ theta)), abs=1e-12)

    def test_random_parameters_up_to_six_dimensions(self):
        rng = np.random.default_rng(30)
        for d in range(1, 7):
            theta = rng.normal(size=d)
            check = verify_class_conditional_construction(theta)
            assert check.ok, (d, check)

    def test_block_marginal_matches_small_construction(self):
        theta = np.array([0.7, -0.2, 1.1])
        check = verify_class_conditional_construction(theta,
                                                      blocks=[(0,), (1, 2)])
        assert check.ok
        assert check.block_posterior_max_err <= 1e-10

    def test_dimension_cap(self):
        with pytest.raises(ValueError, match="d <= 6"):
            verify_class_conditional_construction(np.zeros(7))


class TestExcessRiskConsistency:
    def test_doubling_samples_does_not_hurt(self):
        d, k = 4, 3
        theta = np.array([0.8, -0.8, 0.4, -0.4])
        dist = class_conditional_x_marginal(theta)
        means = {}
        errs = {}
        for n in (1000, 2000):
            excesses = []
            for trial in range(20):
                assignment = make_group_partition(d=d, k=k, n=n)
                messages = build_messages(theta, n, assignment,
                                          seed=1000 + 17 * trial + n)
                est = distributed_estimate(messages, assignment, SGDConfig(),
                                           derive_rng(20, "sgd", n, trial))
                excesses.append(excess_logistic_risk(theta, est, dist))
            means[n] = np.mean(excesses)
            errs[n] = np.std(excesses, ddof=1) / math.sqrt(len(excesses))
        pooled = math.hypot(errs[1000], errs[2000])
        assert means[2000] <= means[1000] + pooled
