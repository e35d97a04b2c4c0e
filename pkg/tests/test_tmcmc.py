import numpy as np
import pytest
from scipy.stats import halfnorm, kstest, lognorm

from genemix.engine import mc_standard_error
from genemix.tmcmc import (
    TmcmcConfig,
    mh_step,
    propose_additive,
    propose_additive_multiplicative,
)


class TestAdditiveMove:
    def test_zero_scales_leave_state_unchanged(self):
        cfg = TmcmcConfig(scales=np.zeros(4))
        rng = np.random.default_rng(0)
        theta = np.array([1.0, -2.0, 0.5, 3.0])
        prop, lj = propose_additive(theta, cfg, rng)
        assert np.array_equal(prop, theta)
        assert lj == 0.0

    def test_step_size_distribution_is_half_normal(self):
        cfg = TmcmcConfig(scales=np.ones(1))
        rng = np.random.default_rng(1)
        steps = np.empty(100_000)
        theta = np.zeros(1)
        for i in range(steps.size):
            prop, _ = propose_additive(theta, cfg, rng)
            steps[i] = abs(prop[0])
        assert kstest(steps, halfnorm.cdf).pvalue > 0.01

    def test_log_jacobian_identically_zero(self):
        cfg = TmcmcConfig(scales=np.full(5, 0.3))
        rng = np.random.default_rng(2)
        theta = rng.standard_normal(5)
        for _ in range(500):
            _, lj = propose_additive(theta, cfg, rng)
            assert lj == 0.0

    def test_sign_flip_is_an_involution(self):
        # theta' = theta + s*a*|eps|; applying the move with flipped signs
        # and the same |eps| returns theta exactly
        scales = np.array([0.5, 1.5, 2.0])
        theta = np.array([0.2, -1.0, 3.0])
        eps = 0.7354
        signs = np.array([1, -1, 1])
        forward = theta + signs * scales * eps
        back = forward + (-signs) * scales * eps
        assert np.allclose(back, theta, rtol=0, atol=1e-15)


class TestAdditiveMultiplicativeMove:
    def test_no_positive_coordinates_means_zero_jacobian(self):
        cfg = TmcmcConfig(scales=np.full(3, 0.1))
        rng = np.random.default_rng(3)
        theta = np.array([1.0, 2.0, 3.0])
        for _ in range(200):
            _, lj = propose_additive_multiplicative(theta, cfg, rng)
            assert lj == 0.0

    def test_jacobian_equals_sum_of_log_ratios(self):
        cfg = TmcmcConfig(scales=np.full(2, 0.1),
                          positive_mask=np.array([True, True]), mult_prob=1.0)
        rng = np.random.default_rng(4)
        theta = np.array([0.8, 2.5])
        for _ in range(200):
            prop, lj = propose_additive_multiplicative(theta, cfg, rng)
            assert lj == pytest.approx(np.log(prop / theta).sum())

    def test_single_multiplicative_exponent(self):
        cfg = TmcmcConfig(scales=np.array([0.1]),
                          positive_mask=np.array([True]), mult_prob=1.0)
        rng = np.random.default_rng(5)
        theta = np.array([1.0])
        prop, lj = propose_additive_multiplicative(theta, cfg, rng)
        # theta=1 makes the proposal equal exp(s|eps|), so lj = s|eps|
        assert lj == pytest.approx(np.log(prop[0]))

    def test_multiplicative_branch_preserves_sign(self):
        cfg = TmcmcConfig(scales=np.zeros(2),
                          positive_mask=np.array([True, True]), mult_prob=1.0)
        rng = np.random.default_rng(6)
        theta = np.array([0.3, 4.0])
        for _ in range(500):
            theta, _ = propose_additive_multiplicative(theta, cfg, rng)
            assert (theta > 0).all()


class TestMhStep:
    def test_equal_target_always_accepts(self):
        cfg = TmcmcConfig(scales=np.full(3, 0.5), move_mix=1.0)
        rng = np.random.default_rng(7)
        theta = np.zeros(3)
        for _ in range(300):
            new, accepted, _ = mh_step(theta, lambda t: 0.0, cfg, rng)
            assert accepted
            assert not np.array_equal(new, theta)
            theta = new

    def test_minus_inf_proposal_rejected(self):
        cfg = TmcmcConfig(scales=np.full(1, 100.0), move_mix=1.0)
        rng = np.random.default_rng(8)
        theta = np.array([0.5])

        def target(t):
            return 0.0 if abs(t[0] - 0.5) < 1e-12 else -np.inf

        for _ in range(100):
            new, accepted, _ = mh_step(theta, target, cfg, rng)
            assert not accepted
            assert new[0] == 0.5

    def test_requires_finite_current_value(self):
        cfg = TmcmcConfig(scales=np.ones(1))
        rng = np.random.default_rng(9)
        with pytest.raises(ValueError):
            mh_step(np.array([0.0]), lambda t: -np.inf, cfg, rng)

    def test_standard_normal_target_moments(self):
        dim = 5
        cfg = TmcmcConfig(scales=np.full(dim, 2.4 / np.sqrt(dim)), move_mix=1.0)
        rng = np.random.default_rng(10)
        theta = np.zeros(dim)
        n = 200_000
        first = np.empty(n)
        current = -0.5 * theta @ theta

        def target(t):
            return -0.5 * t @ t

        for i in range(n):
            theta, _, current = mh_step(theta, target, cfg, rng, current=current)
            first[i] = theta[0]
        se_mean = mc_standard_error(first)
        assert abs(first.mean()) < 3 * se_mean
        se_var = mc_standard_error(first ** 2)
        assert abs((first ** 2).mean() - 1.0) < 3 * se_var

    def test_lognormal_target_quantiles(self):
        dim = 2
        cfg = TmcmcConfig(scales=np.full(dim, 0.8), move_mix=0.0,
                          positive_mask=np.ones(dim, dtype=bool), mult_prob=1.0)
        rng = np.random.default_rng(11)
        theta = np.ones(dim)

        def target(t):
            if (t <= 0).any():
                return -np.inf
            lt = np.log(t)
            return float(-np.sum(lt) - 0.5 * np.sum(lt * lt))

        current = target(theta)
        n = 120_000
        chain = np.empty(n)
        for i in range(n):
            theta, _, current = mh_step(theta, target, cfg, rng, current=current)
            chain[i] = theta[0]
        thinned = chain[::20]
        assert kstest(thinned, lambda q: lognorm.cdf(q, s=1.0)).pvalue > 0.01

    def test_positivity_never_violated_with_constrained_target(self):
        dim = 4
        cfg = TmcmcConfig(scales=np.full(dim, 0.3), move_mix=0.5,
                          positive_mask=np.ones(dim, dtype=bool))
        rng = np.random.default_rng(12)
        theta = np.ones(dim)

        def target(t):
            if (t <= 0).any():
                return -np.inf
            return float(-np.sum(t))

        current = target(theta)
        for _ in range(100_000):
            theta, _, current = mh_step(theta, target, cfg, rng, current=current)
            assert (theta > 0).all()

    def test_detailed_balance_on_binned_chain(self):
        # two-state binning of a standard normal chain: transition counts
        # a->b and b->a must balance within Monte Carlo error
        cfg = TmcmcConfig(scales=np.array([1.2]), move_mix=1.0)
        rng = np.random.default_rng(13)
        theta = np.array([0.0])
        current = 0.0

        def target(t):
            return float(-0.5 * t @ t)

        n = 200_000
        states = np.empty(n, dtype=np.int64)
        for i in range(n):
            theta, _, current = mh_step(theta, target, cfg, rng, current=current)
            states[i] = int(theta[0] >= 0.0)
        ab = int(np.sum((states[:-1] == 0) & (states[1:] == 1)))
        ba = int(np.sum((states[:-1] == 1) & (states[1:] == 0)))
        assert abs(ab - ba) <= 3 * np.sqrt(ab + ba)


class TestConfigValidation:
    def test_negative_scales_rejected(self):
        with pytest.raises(ValueError):
            TmcmcConfig(scales=np.array([-0.1]))

    def test_move_mix_range(self):
        with pytest.raises(ValueError):
            TmcmcConfig(scales=np.ones(1), move_mix=1.5)

    def test_mask_shape_checked(self):
        with pytest.raises(ValueError):
            TmcmcConfig(scales=np.ones(2), positive_mask=np.array([True]))
