import math

import numpy as np
import pytest

from ctxldp.core import (
    Channel,
    Distribution,
    Partition,
    RawEstimate,
    SensitiveSet,
    apply_channel,
    tv_distance,
)
from ctxldp.estimation import (
    BlockEstimatorSpec,
    HighLowEstimatorSpec,
    block_estimate,
    empirical_risk,
    exact_expected_estimate,
    high_low_estimate,
    project_to_simplex,
    run_trial,
)
from ctxldp.mechanisms import block_hr_channel, high_low_hr_channel
from util import random_distribution


def hl_variance_bound(k, s, eps, n):
    c = (math.exp(eps) + 1) / (math.exp(eps) - 1)
    return (3 * s * c**2 + c) / n


def hl_l1_bound(k, s, eps, n):
    c = (math.exp(eps) + 1) / (math.exp(eps) - 1)
    return math.sqrt(3 * s**2 * c**2 / n) + math.sqrt(c * k / n)


def bs_variance_bound(sizes, eps, n):
    c = (math.exp(eps) + 1) / (math.exp(eps) - 1)
    return 12 * max(sizes) * c**2 / n


def bs_l1_bound(sizes, eps, n):
    c = (math.exp(eps) + 1) / (math.exp(eps) - 1)
    return 2 * c * math.sqrt(3 * sum(s * s for s in sizes) / n)


class TestHighLowEstimator:
    def test_single_sample_tail_output(self):
        # k=3, s=1, eps=ln 3, one observation of the first flag output:
        # mass(A)_hat = 2(0 - 1/2) = -1, p0 = 4(0 - 1/4) + 1 = 0, p1 = 2*1 = 2
        spec = HighLowEstimatorSpec(3, 1, math.log(3))
        est = high_low_estimate([2], spec)
        assert est.values.tolist() == pytest.approx([0.0, 2.0, 0.0], abs=1e-12)

    def test_single_sample_hadamard_output(self):
        # one observation of output 0 (inside the plus set of symbol 0)
        spec = HighLowEstimatorSpec(3, 1, math.log(3))
        est = high_low_estimate([0], spec)
        assert est.values.tolist() == pytest.approx([2.0, 0.0, 0.0], abs=1e-12)

    def test_unbiased_exact_expectation(self):
        rng = np.random.default_rng(30)
        k, s, eps = 16, 4, 1.0
        Q = high_low_hr_channel(SensitiveSet(k, s), eps)
        spec = HighLowEstimatorSpec(k, s, eps)
        for _ in range(20):
            p = random_distribution(rng, k)
            est = exact_expected_estimate(Q, spec, p)
            assert np.max(np.abs(est.values - p.weights)) < 1e-12

    def test_point_mass_recovered_from_exact_frequencies(self):
        k, s, eps = 12, 3, 0.8
        Q = high_low_hr_channel(SensitiveSet(k, s), eps)
        spec = HighLowEstimatorSpec(k, s, eps)
        for x in range(k):
            est = exact_expected_estimate(Q, spec, Distribution.point_mass(k, x))
            assert np.max(np.abs(est.values - Distribution.point_mass(k, x).weights)) < 1e-12

    def test_errors(self):
        spec = HighLowEstimatorSpec(3, 1, 1.0)
        with pytest.raises(ValueError):
            high_low_estimate([], spec)
        with pytest.raises(ValueError):
            high_low_estimate([4], spec)  # out of range for S + t = 4

    def test_expected_sum_is_one_but_realized_sum_is_not(self):
        # the decoder is unbiased, so expected estimates sum to 1 exactly;
        # a finite sample's estimate sums to 1 only on average
        rng = np.random.default_rng(31)
        k, s, eps = 9, 2, 1.0
        Q = high_low_hr_channel(SensitiveSet(k, s), eps)
        spec = HighLowEstimatorSpec(k, s, eps)
        p = random_distribution(rng, k)
        assert exact_expected_estimate(Q, spec, p).values.sum() == pytest.approx(1.0, abs=1e-12)
        est = high_low_estimate([0], spec)
        assert abs(est.values.sum() - 1.0) > 0.1  # single sample: visibly off 1

    def test_realized_sum_concentrates(self):
        rng = np.random.default_rng(32)
        k, s, eps, n = 9, 2, 1.0, 200_000
        Q = high_low_hr_channel(SensitiveSet(k, s), eps)
        spec = HighLowEstimatorSpec(k, s, eps)
        p = random_distribution(rng, k)
        cdf = np.cumsum(p.weights)
        xs = np.searchsorted(cdf, rng.random(n), side="right")
        from ctxldp.mechanisms import privatize_all

        est = high_low_estimate(privatize_all(Q, xs, seed=0), spec)
        assert est.values.sum() == pytest.approx(1.0, abs=0.05)


class TestBlockEstimator:
    def test_unbiased_exact_expectation(self):
        rng = np.random.default_rng(33)
        part = Partition.from_sizes([5, 3, 8])
        Q = block_hr_channel(part, 1.0)
        spec = BlockEstimatorSpec(part, 1.0)
        for _ in range(20):
            p = random_distribution(rng, part.k)
            est = exact_expected_estimate(Q, spec, p)
            assert np.max(np.abs(est.values - p.weights)) < 1e-12

    def test_single_block_point_mass(self):
        part = Partition.single_block(6)
        Q = block_hr_channel(part, 1.0)
        spec = BlockEstimatorSpec(part, 1.0)
        est = exact_expected_estimate(Q, spec, Distribution.point_mass(6, 2))
        assert np.max(np.abs(est.values - Distribution.point_mass(6, 2).weights)) < 1e-12

    def test_uniform_maps_to_uniform(self):
        part = Partition.from_sizes([4, 4])
        Q = block_hr_channel(part, 0.5)
        spec = BlockEstimatorSpec(part, 0.5)
        est = exact_expected_estimate(Q, spec, Distribution.uniform(8))
        assert np.max(np.abs(est.values - 0.125)) < 1e-12

    def test_spec_channel_mismatch(self):
        part = Partition.from_sizes([4, 4])
        other = Partition.from_sizes([2, 6])
        Q = block_hr_channel(part, 1.0)
        with pytest.raises(ValueError):
            exact_expected_estimate(Q, BlockEstimatorSpec(other, 1.0), Distribution.uniform(8))


class TestDiagnosticSpecs:
    def test_identity_affine_map_returns_marginal(self):
        class Passthrough:
            out_size = 3
            k = 3

            def estimate_from_marginal(self, marginal):
                return RawEstimate(marginal.weights)

        Q = Channel([[0.2, 0.3, 0.5]] * 3)
        p = Distribution([0.6, 0.3, 0.1])
        est = exact_expected_estimate(Q, Passthrough(), p)
        assert np.allclose(est.values, [0.2, 0.3, 0.5])


class TestProjection:
    def test_valid_distribution_unchanged(self):
        out = project_to_simplex(RawEstimate([0.25, 0.75]))
        assert np.allclose(out.weights, [0.25, 0.75])

    def test_clip_then_renormalize(self):
        out = project_to_simplex(RawEstimate([-0.2, 0.6, 0.6]))
        assert np.allclose(out.weights, [0.0, 0.5, 0.5])

    def test_all_negative_gives_uniform(self):
        out = project_to_simplex(RawEstimate([-1.0, -1.0]))
        assert np.allclose(out.weights, [0.5, 0.5])

    def test_projection_at_most_doubles_tv(self):
        rng = np.random.default_rng(34)
        for _ in range(200):
            k = int(rng.integers(2, 10))
            p = random_distribution(rng, k)
            raw = RawEstimate(rng.normal(scale=1.0, size=k))
            before = tv_distance(raw, p)
            after = tv_distance(project_to_simplex(raw), p)
            assert after <= 2 * before + 1e-12


class TestRisk:
    def test_constant_estimator_diagnostic_is_zero(self):
        p = Distribution.uniform(8)
        part = Partition.from_sizes([4, 4])
        Q = block_hr_channel(part, 1.0)
        spec = BlockEstimatorSpec(part, 1.0)
        mean, std = empirical_risk(p, Q, spec, n=100, reps=5, seed=0, estimator=lambda ys: p)
        assert mean == 0.0 and std == 0.0

    def test_deterministic_given_seed(self):
        p = Distribution.uniform(8)
        part = Partition.from_sizes([4, 4])
        Q = block_hr_channel(part, 1.0)
        spec = BlockEstimatorSpec(part, 1.0)
        a = empirical_risk(p, Q, spec, n=500, reps=3, seed=9)
        b = empirical_risk(p, Q, spec, n=500, reps=3, seed=9)
        assert a == b

    def test_high_low_risk_within_analytic_bounds(self):
        k, s, eps, n, reps = 30, 3, 1.0, 20_000, 12
        p = Distribution.uniform(k)
        Q = high_low_hr_channel(SensitiveSet(k, s), eps)
        spec = HighLowEstimatorSpec(k, s, eps)
        mean_l2, _ = empirical_risk(p, Q, spec, n=n, reps=reps, seed=1, metric="l2sq")
        mean_tv, _ = empirical_risk(p, Q, spec, n=n, reps=reps, seed=1, metric="tv")
        assert mean_l2 <= 1.05 * hl_variance_bound(k, s, eps, n)
        assert 2 * mean_tv <= 1.05 * hl_l1_bound(k, s, eps, n)

    def test_block_risk_within_analytic_bounds(self):
        sizes = [10, 10, 10]
        eps, n, reps = 1.0, 20_000, 12
        part = Partition.from_sizes(sizes)
        p = Distribution.uniform(part.k)
        Q = block_hr_channel(part, eps)
        spec = BlockEstimatorSpec(part, eps)
        mean_l2, _ = empirical_risk(p, Q, spec, n=n, reps=reps, seed=2, metric="l2sq")
        mean_tv, _ = empirical_risk(p, Q, spec, n=n, reps=reps, seed=2, metric="tv")
        assert mean_l2 <= 1.05 * bs_variance_bound(sizes, eps, n)
        assert 2 * mean_tv <= 1.05 * bs_l1_bound(sizes, eps, n)

    def test_error_shrinks_when_n_doubles(self):
        part = Partition.from_sizes([8, 8])
        p = Distribution.uniform(part.k)
        Q = block_hr_channel(part, 1.0)
        spec = BlockEstimatorSpec(part, 1.0)
        means = [
            empirical_risk(p, Q, spec, n=n, reps=20, seed=4)[0]
            for n in (2_000, 4_000, 8_000, 16_000)
        ]
        assert all(a > b for a, b in zip(means, means[1:]))

    def test_projection_flag_yields_simplex_scale_errors(self):
        part = Partition.single_block(16)
        p = Distribution.point_mass(16, 0)
        Q = block_hr_channel(part, 1.0)
        spec = BlockEstimatorSpec(part, 1.0)
        raw_tv, _ = empirical_risk(p, Q, spec, n=50, reps=10, seed=5)
        proj_tv, _ = empirical_risk(p, Q, spec, n=50, reps=10, seed=5, project=True)
        assert proj_tv <= 1.0 + 1e-12  # projected estimates live on the simplex
        assert raw_tv > proj_tv  # tiny n: raw estimates overshoot badly

    def test_run_trial_returns_both_metrics(self):
        part = Partition.from_sizes([4, 4])
        p = Distribution.uniform(8)
        Q = block_hr_channel(part, 1.0)
        spec = BlockEstimatorSpec(part, 1.0)
        tv, l2 = run_trial(p, Q, spec, n=1000, seed=6)
        assert tv >= 0 and l2 >= 0
