import numpy as np
import pytest
from scipy.stats import chisquare, ks_2samp

from maplab.chain_core import StochasticKernel
from maplab.errors import UnsupportedInitial
from maplab.fixtures import ct_two_state, iid_rademacher, two_state
from maplab.increments import deterministic, gaussian
from maplab.map_model import CtMapSpec, MapSpec, ct_sample_skeleton
from maplab.montecarlo import (increment_panel, simulate_ct,
                               simulate_discrete, spec_content_hash)


def _zero_spec():
    kernel = StochasticKernel(states=(0, 1), P=np.full((2, 2), 0.5))
    incs = {(i, j): deterministic([0.0]) for i in range(2) for j in range(2)}
    return MapSpec(kernel=kernel, increments=incs)


class TestDeterminism:
    def test_bit_identical_regeneration(self):
        spec = two_state()
        a = simulate_discrete(spec, 64, 500, 42)
        b = simulate_discrete(spec, 64, 500, 42)
        assert np.array_equal(a.terminal_Y, b.terminal_Y)
        assert a.spec_id == b.spec_id

    def test_seed_changes_output(self):
        spec = two_state()
        a = simulate_discrete(spec, 64, 500, 1)
        b = simulate_discrete(spec, 64, 500, 2)
        assert not np.array_equal(a.terminal_Y, b.terminal_Y)

    def test_spec_hash_distinguishes_models(self):
        assert (spec_content_hash(two_state())
                != spec_content_hash(iid_rademacher()))
        assert (spec_content_hash(ct_two_state())
                != spec_content_hash(two_state()))

    def test_ct_bit_identical(self):
        ct = ct_two_state()
        a = simulate_ct(ct, 10.0, 300, 9)
        b = simulate_ct(ct, 10.0, 300, 9)
        assert np.array_equal(a.terminal_Y, b.terminal_Y)

    def test_batch_immutable(self):
        batch = simulate_discrete(two_state(), 8, 10, 0)
        with pytest.raises(ValueError):
            batch.terminal_Y[0, 0] = 99.0


class TestDiscrete:
    def test_zero_increments(self):
        batch = simulate_discrete(_zero_spec(), 50, 200, 3)
        assert np.all(batch.terminal_Y == 0.0)

    def test_iid_lln(self):
        n = 10 ** 5
        batch = simulate_discrete(iid_rademacher(), n, 1, 7)
        assert abs(batch.terminal_Y[0, 0] / n) <= 4.0 / np.sqrt(n)

    def test_two_state_variance_oracle(self):
        n, paths = 10 ** 4, 10 ** 4
        batch = simulate_discrete(two_state(), n, paths, 11)
        v = np.var(batch.terminal_Y[:, 0] / np.sqrt(n))
        se = 0.72 * np.sqrt(2.0 / paths)   # var of a variance estimate
        assert abs(v - 0.72) <= 4 * se + 0.01

    def test_stationarity_chi_square(self):
        spec = two_state()
        batch = simulate_discrete(spec, 17, 20000, 5, keep_states=True)
        counts = np.bincount(batch.terminal_X, minlength=2)
        _, p = chisquare(counts, 20000 * spec.pi)
        assert p > 1e-3

    def test_gaussian_increments_distribution(self):
        kernel = StochasticKernel(states=(0,), P=np.array([[1.0]]))
        spec = MapSpec(kernel=kernel,
                       increments={(0, 0): gaussian([0.0], [[1.0]])})
        batch = simulate_discrete(spec, 4, 50000, 13)
        z = batch.terminal_Y[:, 0] / 2.0
        assert abs(z.mean()) < 0.02
        assert abs(z.std() - 1.0) < 0.02

    def test_initial_distribution_used(self):
        spec = two_state()
        batch = simulate_discrete(spec, 1, 20000, 3, mu=np.array([1.0, 0.0]),
                                  keep_states=True)
        # from state 0 the chain lands in state 1 with probability 0.3
        frac = batch.terminal_X.mean()
        assert abs(frac - 0.3) < 0.02

    def test_bad_initial_rejected(self):
        spec = two_state()
        with pytest.raises(UnsupportedInitial):
            simulate_discrete(spec, 4, 10, 0, mu=np.array([0.5, 0.6]))

    def test_mass_off_support_rejected(self):
        P = np.array([[0.5, 0.5], [0.0, 1.0]])   # pi = (0, 1)
        kernel = StochasticKernel(states=(0, 1), P=P)
        incs = {(0, 0): deterministic([0.0]), (0, 1): deterministic([0.0]),
                (1, 1): deterministic([0.0])}
        spec = MapSpec(kernel=kernel, increments=incs)
        with pytest.raises(UnsupportedInitial):
            simulate_discrete(spec, 4, 10, 0, mu=np.array([0.5, 0.5]))


class TestPanel:
    def test_panel_sums_to_terminal(self):
        spec = two_state()
        batch = simulate_discrete(spec, 32, 200, 21, keep_panel=True)
        np.testing.assert_allclose(batch.increment_panel.sum(axis=1),
                                   batch.terminal_Y[:, 0], atol=1e-10)

    def test_iid_lag_correlations_vanish(self):
        panel = increment_panel(iid_rademacher(), 6, 50000, 2)
        se = 1.0 / np.sqrt(50000)
        for lag in range(1, 6):
            c = np.corrcoef(panel[:, 0], panel[:, lag])[0, 1]
            assert abs(c) <= 4 * se

    def test_two_state_lag_correlations_bounded(self):
        panel = increment_panel(two_state(), 6, 50000, 4)
        se = 1.0 / np.sqrt(50000)
        for lag in range(1, 6):
            c = abs(np.corrcoef(panel[:, 0], panel[:, lag])[0, 1])
            assert c <= 0.5 ** (lag - 1) + 4 * se


class TestContinuous:
    def test_constant_reward_exact(self):
        ct = CtMapSpec(generator=np.array([[-1.0, 1.0], [2.0, -2.0]]),
                       reward=np.array([3.0, 3.0]))
        batch = simulate_ct(ct, 7.5, 100, 1)
        np.testing.assert_allclose(batch.terminal_Y[:, 0], 22.5, atol=1e-10)

    def test_single_state(self):
        ct = CtMapSpec(generator=np.array([[0.0]]), reward=np.array([1.0]))
        batch = simulate_ct(ct, 4.2, 10, 0)
        np.testing.assert_allclose(batch.terminal_Y[:, 0], 4.2, atol=1e-12)

    def test_mean_rate_oracle(self):
        ct = ct_two_state(centered=False)
        t = 1000.0
        batch = simulate_ct(ct, t, 2000, 6)
        mean = batch.terminal_Y[:, 0].mean() / t
        assert abs(mean - 1.0 / 3.0) < 0.005

    def test_jump_increments_counted(self):
        # zero reward, unit jump increments: Y_t = number of transitions
        ct = CtMapSpec(generator=np.array([[-1.0, 1.0], [1.0, -1.0]]),
                       reward=np.array([0.0, 0.0]),
                       jump_increments=np.ones((2, 2)))
        batch = simulate_ct(ct, 50.0, 2000, 8)
        y = batch.terminal_Y[:, 0]
        assert np.all(y == np.round(y))
        assert abs(y.mean() - 50.0) < 1.0   # jump rate is 1 in every state

    def test_integer_horizon_marks(self):
        ct = ct_two_state()
        batch = simulate_ct(ct, 8.0, 500, 3, record_steps=True)
        np.testing.assert_allclose(batch.increment_panel.sum(axis=1),
                                   batch.terminal_Y[:, 0], atol=1e-9)

    def test_fractional_horizon_integer_part(self):
        ct = ct_two_state()
        batch = simulate_ct(ct, 8.5, 500, 3)
        # |Y_t - Y_8| <= max|xi| * 0.5
        gap = np.abs(batch.terminal_Y[:, 0] - batch.integer_part_Y)
        assert np.max(gap) <= np.max(np.abs(ct.reward)) * 0.5 + 1e-9


class TestSkeletonConsistency:
    def test_two_sample_ks(self):
        ct = ct_two_state()
        skeleton = ct_sample_skeleton(ct)
        n, paths = 16, 20000
        a = simulate_ct(ct, float(n), paths, 100)
        b = simulate_discrete(skeleton, n, paths, 200)
        _, p = ks_2samp(a.terminal_Y[:, 0], b.terminal_Y[:, 0])
        assert p > 1e-3

    def test_skeleton_delegates_to_ct(self):
        skeleton = ct_sample_skeleton(ct_two_state())
        batch = simulate_discrete(skeleton, 8, 100, 5)
        ref = simulate_ct(ct_two_state(), 8.0, 100, 5)
        assert np.array_equal(batch.terminal_Y, ref.terminal_Y)
